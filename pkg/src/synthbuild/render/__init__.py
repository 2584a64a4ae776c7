from .kernel import BACKENDS, DEFAULT_BACKEND, get_kernel
from .raster import (FrameBufferSet, SEGMENTATION_PALETTE, encode_normal_map, normalize_depth,
                     project_vertex, rasterize, segmentation_image, shade)

__all__ = [
    "BACKENDS", "DEFAULT_BACKEND", "FrameBufferSet", "SEGMENTATION_PALETTE", "encode_normal_map",
    "get_kernel", "normalize_depth", "project_vertex", "rasterize", "segmentation_image", "shade",
]
