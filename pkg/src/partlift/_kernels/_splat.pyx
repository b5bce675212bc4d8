# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled z-buffer splat rasterizer (hot kernel of view rendering)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def splat_zbuffer(cnp.int64_t[::1] px, cnp.int64_t[::1] py,
                  cnp.float64_t[::1] depth, cnp.int32_t[::1] index,
                  int width, int height, int radius):
    """Sequential disc painting with a strict nearest-depth test.

    Iterating in ascending index order with `depth < zbuf` makes the lowest
    point index win exact depth ties, matching the numpy fallback.
    """
    zbuf_arr = np.full((height, width), np.inf, dtype=np.float64)
    winner_arr = np.full((height, width), -1, dtype=np.int32)
    cdef cnp.float64_t[:, ::1] zbuf = zbuf_arr
    cdef cnp.int32_t[:, ::1] winner = winner_arr

    cdef Py_ssize_t i, n = px.shape[0]
    cdef int dx, dy, x, y, r2 = radius * radius
    cdef double d

    with nogil:
        for i in range(n):
            d = depth[i]
            for dy in range(-radius, radius + 1):
                y = <int>py[i] + dy
                if y < 0 or y >= height:
                    continue
                for dx in range(-radius, radius + 1):
                    if dx * dx + dy * dy > r2:
                        continue
                    x = <int>px[i] + dx
                    if x < 0 or x >= width:
                        continue
                    if d < zbuf[y, x]:
                        zbuf[y, x] = d
                        winner[y, x] = index[i]
    return zbuf_arr, winner_arr
