# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled z-buffer kernel; same contract and arithmetic as ``_kernel_py``."""

import numpy as np

from libc.math cimport ceil, floor


cdef inline bint _top_left(double dwdx, double dwdy) noexcept nogil:
    return dwdx > 0.0 or (dwdx == 0.0 and dwdy > 0.0)


def raster_triangles(const double[:, ::1] xs, const double[:, ::1] ys,
                     const double[:, ::1] izs, int size):
    zbuf_arr = np.zeros((size, size), dtype=np.float64)
    tbuf_arr = np.full((size, size), -1, dtype=np.int32)
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef int[:, ::1] tbuf = tbuf_arr
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t t
    cdef int i, j, i0, i1, j0, j1
    cdef double x0, x1, x2, y0, y1, y2, iz0, iz1, iz2, area
    cdef double minx, maxx, miny, maxy, px, py, w0, w1, w2, iz
    cdef double lim_hi = size + 1.0
    cdef bint tl0, tl1, tl2

    with nogil:
        for t in range(n):
            x0 = xs[t, 0]; x1 = xs[t, 1]; x2 = xs[t, 2]
            y0 = ys[t, 0]; y1 = ys[t, 1]; y2 = ys[t, 2]
            iz0 = izs[t, 0]; iz1 = izs[t, 1]; iz2 = izs[t, 2]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if not area > 0.0:
                continue
            minx = max(min(min(x0, x1), x2), -1.0)
            maxx = min(max(max(x0, x1), x2), lim_hi)
            miny = max(min(min(y0, y1), y2), -1.0)
            maxy = min(max(max(y0, y1), y2), lim_hi)
            i0 = max(0, <int>ceil(minx - 0.5))
            i1 = min(size - 1, <int>floor(maxx - 0.5))
            j0 = max(0, <int>ceil(miny - 0.5))
            j1 = min(size - 1, <int>floor(maxy - 0.5))
            tl0 = _top_left(-(y2 - y1), x2 - x1)
            tl1 = _top_left(-(y0 - y2), x0 - x2)
            tl2 = _top_left(-(y1 - y0), x1 - x0)
            for j in range(j0, j1 + 1):
                py = j + 0.5
                for i in range(i0, i1 + 1):
                    px = i + 0.5
                    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                    if not (w0 > 0.0 or (tl0 and w0 == 0.0)):
                        continue
                    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                    if not (w1 > 0.0 or (tl1 and w1 == 0.0)):
                        continue
                    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                    if not (w2 > 0.0 or (tl2 and w2 == 0.0)):
                        continue
                    iz = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area
                    if iz > zbuf[j, i]:
                        zbuf[j, i] = iz
                        tbuf[j, i] = <int>t
    return zbuf_arr, tbuf_arr
