"""Pure numpy z-buffer kernel.

Evaluates exactly the same floating-point expressions, in the same order, as
the compiled kernel, so both backends produce bit-identical buffers.
"""

from __future__ import annotations

import math

import numpy as np


def raster_triangles(xs: np.ndarray, ys: np.ndarray, izs: np.ndarray, size: int):
    """Fill triangles into an inverse-depth buffer.

    ``xs``, ``ys`` are (T, 3) screen coordinates (pixel units, y down) of
    triangles with positive signed area ``(x1-x0)(y2-y0) - (y1-y0)(x2-x0)``;
    ``izs`` holds 1/depth per corner. A pixel is covered when its centre is
    inside the triangle, with the top-left rule on edges. Returns
    ``(inv_depth, index)``: the largest interpolated 1/depth per pixel (0
    where empty) and the winning row of ``xs`` (-1 where empty). Ties keep
    the earlier row.
    """
    zbuf = np.zeros((size, size), dtype=np.float64)
    tbuf = np.full((size, size), -1, dtype=np.int32)
    lim_hi = size + 1.0
    for t, ((x0, x1, x2), (y0, y1, y2), (iz0, iz1, iz2)) in enumerate(
            zip(xs.tolist(), ys.tolist(), izs.tolist())):
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if not area > 0.0:
            continue
        minx = max(min(x0, x1, x2), -1.0)
        maxx = min(max(x0, x1, x2), lim_hi)
        miny = max(min(y0, y1, y2), -1.0)
        maxy = min(max(y0, y1, y2), lim_hi)
        i0 = max(0, int(math.ceil(minx - 0.5)))
        i1 = min(size - 1, int(math.floor(maxx - 0.5)))
        j0 = max(0, int(math.ceil(miny - 0.5)))
        j1 = min(size - 1, int(math.floor(maxy - 0.5)))
        if i1 < i0 or j1 < j0:
            continue
        px = np.arange(i0, i1 + 1, dtype=np.float64) + 0.5
        py = (np.arange(j0, j1 + 1, dtype=np.float64) + 0.5)[:, None]

        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

        inside = _edge_ok(w0, -(y2 - y1), x2 - x1)
        inside &= _edge_ok(w1, -(y0 - y2), x0 - x2)
        inside &= _edge_ok(w2, -(y1 - y0), x1 - x0)
        if not inside.any():
            continue
        iz = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area
        zsub = zbuf[j0:j1 + 1, i0:i1 + 1]
        win = inside & (iz > zsub)
        zsub[win] = iz[win]
        tbuf[j0:j1 + 1, i0:i1 + 1][win] = t
    return zbuf, tbuf


def _edge_ok(w: np.ndarray, dwdx: float, dwdy: float) -> np.ndarray:
    top_left = dwdx > 0.0 or (dwdx == 0.0 and dwdy > 0.0)
    return (w >= 0.0) if top_left else (w > 0.0)
