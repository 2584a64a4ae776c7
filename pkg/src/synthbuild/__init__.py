"""Procedural synthetic building datasets with 2D and 3D ground truth."""

from .config import DatasetConfig, parse_config
from .massing import TypologyClass

__version__ = "0.1.0"

__all__ = ["DatasetConfig", "TypologyClass", "parse_config", "__version__"]
