"""Single-pass software rasterizer for render, segmentation, depth and normals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import ComponentClass, Mesh, face_normals
from ..scene import CameraPose, LightSpec, MaterialAssignment, MaterialSpec, load_texture
from .kernel import get_kernel

NEAR_PLANE = 0.01  # m
BACKGROUND_COMPONENT = 255
AMBIENT = 0.25

SEGMENTATION_PALETTE = {
    ComponentClass.WALL: (228, 26, 28),
    ComponentClass.ROOF: (55, 126, 184),
    ComponentClass.WINDOW: (77, 175, 74),
    ComponentClass.BALCONY: (152, 78, 163),
    ComponentClass.DOOR: (255, 127, 0),
}
SEGMENTATION_BACKGROUND = (0, 0, 0)


@dataclass(frozen=True, eq=False)
class FrameBufferSet:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth_raw: np.ndarray  # (H, W) float32 view depth in meters, +inf = background
    component: np.ndarray  # (H, W) uint8 ComponentClass codes, 255 = background
    normal_cam: np.ndarray  # (H, W, 3) float32 camera-space unit normals, 0 = background
    triangle: np.ndarray  # (H, W) int32 source triangle, -1 = background

    @property
    def foreground(self) -> np.ndarray:
        return self.triangle >= 0


def _view_coords(cam: CameraPose, points: np.ndarray) -> np.ndarray:
    right, up, fwd = cam.basis()
    rel = np.asarray(points, dtype=np.float64) - np.asarray(cam.position)
    return np.stack([rel @ right, rel @ up, rel @ fwd], axis=-1)


def project_vertex(cam: CameraPose, p) -> tuple[float, float, float]:
    """Pixel (x, y) and view depth of a world point. Pixel (i, j) spans [i, i+1) x [j, j+1)."""
    xc, yc, zc = _view_coords(cam, np.asarray(p, dtype=np.float64)[None])[0]
    c, f = cam.image_size / 2, cam.focal_px
    return float(c + f * xc / zc), float(c - f * yc / zc), float(zc)


def _clip_near(tri: np.ndarray) -> list[np.ndarray]:
    """Sutherland-Hodgman clip of one view-space triangle against z >= NEAR_PLANE."""
    out = []
    n = len(tri)
    for k in range(n):
        a, b = tri[k], tri[(k + 1) % n]
        ina, inb = a[2] >= NEAR_PLANE, b[2] >= NEAR_PLANE
        if ina:
            out.append(a)
        if ina != inb:
            s = (NEAR_PLANE - a[2]) / (b[2] - a[2])
            p = a + s * (b - a)
            p[2] = NEAR_PLANE
            out.append(p)
    return [np.array([out[0], out[k], out[k + 1]]) for k in range(1, len(out) - 1)]


def screen_triangles(mesh: Mesh, cam: CameraPose):
    """Project, near-clip and back-face cull; returns (xs, ys, inv_depth, source index)."""
    view = _view_coords(cam, mesh.vertices)[mesh.triangles]  # (T, 3, 3)
    z = view[:, :, 2]
    keep = (z >= NEAR_PLANE).all(axis=1)
    partial = ~keep & (z >= NEAR_PLANE).any(axis=1)
    tris = [view[keep]]
    ids = [np.flatnonzero(keep)]
    for t in np.flatnonzero(partial):
        pieces = _clip_near(view[t])
        if pieces:
            tris.append(np.array(pieces))
            ids.append(np.full(len(pieces), t))
    view = np.concatenate(tris) if tris else np.zeros((0, 3, 3))
    src = np.concatenate(ids).astype(np.int64)
    order = np.argsort(src, kind="stable")
    view, src = view[order], src[order]

    c, f = cam.image_size / 2, cam.focal_px
    zc = view[:, :, 2]
    xs = c + f * view[:, :, 0] / zc
    ys = c - f * view[:, :, 1] / zc
    iz = 1.0 / zc
    area = (xs[:, 1] - xs[:, 0]) * (ys[:, 2] - ys[:, 0]) - (ys[:, 1] - ys[:, 0]) * (xs[:, 2] - xs[:, 0])
    # counter-clockwise in world becomes negative area once y points down
    front = area < 0
    xs, ys, iz, src = xs[front], ys[front], iz[front], src[front]
    swap = [0, 2, 1]
    return (np.ascontiguousarray(xs[:, swap]), np.ascontiguousarray(ys[:, swap]),
            np.ascontiguousarray(iz[:, swap]), src)


def shade_pixels(base: np.ndarray, normals: np.ndarray, light: LightSpec) -> np.ndarray:
    """Lambert with ambient floor: ``base * (0.25 + 0.75 max(0, n.l)) * color * strength``."""
    to_light = -np.asarray(light.direction, dtype=np.float64)
    ndotl = np.maximum(0.0, normals @ to_light)
    c = base * (AMBIENT + (1.0 - AMBIENT) * ndotl)[:, None] * np.asarray(light.color) * light.strength
    return np.floor(np.clip(c, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def shade(albedo, normal, light: LightSpec, texture_sample=None) -> tuple[int, int, int]:
    """Shade one pixel; ``texture_sample`` replaces ``albedo`` when given."""
    base = np.asarray(texture_sample if texture_sample is not None else albedo, dtype=np.float64)[None]
    out = shade_pixels(base, np.asarray(normal, dtype=np.float64)[None], light)[0]
    return tuple(int(v) for v in out)


def box_uv(world: np.ndarray, normals: np.ndarray, scale: float) -> np.ndarray:
    """Planar UVs picked by the dominant normal axis, in texture tiles."""
    axis = np.argmax(np.abs(normals), axis=1)
    uv = np.where((axis == 0)[:, None], world[:, [1, 2]],
                  np.where((axis == 1)[:, None], world[:, [0, 2]], world[:, [0, 1]]))
    return uv / scale


def sample_bilinear(tex: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Tiled bilinear lookup; v grows upward in the image."""
    h, w = tex.shape[:2]
    x = uv[:, 0] * w - 0.5
    y = -uv[:, 1] * h - 0.5
    x0, y0 = np.floor(x), np.floor(y)
    fx, fy = (x - x0)[:, None], (y - y0)[:, None]
    x0 = x0.astype(np.int64) % w
    y0 = y0.astype(np.int64) % h
    x1, y1 = (x0 + 1) % w, (y0 + 1) % h
    top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
    bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def rasterize(mesh: Mesh, cam: CameraPose, light: LightSpec, materials: dict[int, MaterialSpec],
              assignment: MaterialAssignment, backend: str | None = None) -> FrameBufferSet:
    """Z-buffer ``mesh`` once and derive all four image channels from that pass."""
    size = cam.image_size
    kernel = get_kernel(backend)
    if mesh.n_triangles:
        xs, ys, iz, src = screen_triangles(mesh, cam)
        zbuf, tbuf = kernel(xs, ys, iz, size)
    else:
        zbuf = np.zeros((size, size))
        tbuf = np.full((size, size), -1, np.int32)
        src = np.zeros(0, np.int64)

    fg = tbuf >= 0
    tri_img = np.full((size, size), -1, np.int32)
    tri = src[tbuf[fg]]
    tri_img[fg] = tri

    inv = zbuf[fg]
    depth64 = 1.0 / inv
    depth = np.full((size, size), np.inf, np.float32)
    depth[fg] = depth64.astype(np.float32)

    component = np.full((size, size), BACKGROUND_COMPONENT, np.uint8)
    component[fg] = mesh.component[tri]

    right, up, fwd = cam.basis()
    n_world = face_normals(mesh)[tri]
    n_cam = np.stack([n_world @ right, n_world @ up, -(n_world @ fwd)], axis=1)
    flip = n_cam[:, 2] < 0
    n_cam[flip] *= -1
    n_world[flip] *= -1
    normal_cam = np.zeros((size, size, 3), np.float32)
    normal_cam[fg] = n_cam.astype(np.float32)

    # base colour per pixel
    mat_ids = assignment.triangle_materials(mesh)[tri]
    base = np.empty((len(tri), 3))
    jj, ii = np.nonzero(fg)
    for mid in np.unique(mat_ids):
        sel = mat_ids == mid
        spec = materials[int(mid)]
        if spec.texture is None:
            base[sel] = spec.albedo
            continue
        c, f = size / 2, cam.focal_px
        ray = (fwd[None, :] + right[None, :] * ((ii[sel] + 0.5 - c) / f)[:, None]
               - up[None, :] * ((jj[sel] + 0.5 - c) / f)[:, None])
        world = np.asarray(cam.position) + depth64[sel][:, None] * ray
        base[sel] = sample_bilinear(load_texture(spec.texture), box_uv(world, n_world[sel], spec.texture_scale))

    rgb = np.zeros((size, size, 3), np.uint8)
    rgb[fg] = shade_pixels(base, n_world, light)
    return FrameBufferSet(rgb, depth, component, normal_cam, tri_img)


def encode_normal_map(fb: FrameBufferSet) -> np.ndarray:
    out = np.zeros(fb.normal_cam.shape, np.uint8)
    fg = fb.foreground
    n = fb.normal_cam[fg].astype(np.float64)
    out[fg] = np.floor(255.0 * (n + 1.0) / 2.0 + 0.5).astype(np.uint8)
    return out


def decode_normal_map(img: np.ndarray) -> np.ndarray:
    return img.astype(np.float64) / 255.0 * 2.0 - 1.0


def normalize_depth(depth_raw: np.ndarray) -> np.ndarray:
    """Per-image min-max scaling of foreground depth to 0..254; background is 255."""
    d = np.asarray(depth_raw, dtype=np.float64)
    fg = np.isfinite(d)
    out = np.full(d.shape, 255, np.uint8)
    if not fg.any():
        return out
    lo, hi = d[fg].min(), d[fg].max()
    if hi == lo:
        out[fg] = 0
    else:
        out[fg] = np.floor((d[fg] - lo) / (hi - lo) * 254.0 + 0.5).astype(np.uint8)
    return out


def segmentation_image(fb: FrameBufferSet) -> np.ndarray:
    lut = np.zeros((256, 3), np.uint8)
    for comp, rgb in SEGMENTATION_PALETTE.items():
        lut[int(comp)] = rgb
    lut[BACKGROUND_COMPONENT] = SEGMENTATION_BACKGROUND
    return lut[fb.component]
