"""Pure-numpy z-buffer splatting, bit-identical to the compiled kernel.

Per pixel the winner is the point with the lexicographically smallest
(depth, point index), which equals sequential painting in ascending index
order with a strict depth test.
"""

import numpy as np


def disc_offsets(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx * dx + dy * dy <= radius * radius
    return np.stack([dx[keep], dy[keep]], axis=1)


def splat_zbuffer(px, py, depth, index, width, height, radius):
    """Rasterize points as discs with a nearest-depth z-buffer.

    px, py: projected integer pixel coordinates of the disc centers
    depth:  camera-forward depth per point
    index:  point id written into the winner buffer, ascending order
    Returns (zbuf float64 (H,W) with +inf empties, winner int32 (H,W) with -1 empties).
    """
    zbuf = np.full((height, width), np.inf, dtype=np.float64)
    winner = np.full((height, width), -1, dtype=np.int32)
    if len(px) == 0:
        return zbuf, winner

    offsets = disc_offsets(radius)
    xs = px[None, :] + offsets[:, 0][:, None]
    ys = py[None, :] + offsets[:, 1][:, None]
    inb = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)

    pix = (ys * width + xs)[inb]
    dep = np.broadcast_to(depth, xs.shape)[inb]
    idx = np.broadcast_to(index, xs.shape)[inb]

    order = np.lexsort((idx, dep, pix))
    pix, dep, idx = pix[order], dep[order], idx[order]
    first = np.ones(len(pix), dtype=bool)
    first[1:] = pix[1:] != pix[:-1]

    zbuf.ravel()[pix[first]] = dep[first]
    winner.ravel()[pix[first]] = idx[first]
    return zbuf, winner
