"""Pure-numpy implementations of the hot pixel kernels.

Reference path: always available, selected with IVISE_KERNELS=numpy. The
numba twins in numba_impl.py must produce bit-identical output, so every
formula here is written in the exact arithmetic order the loops use.
"""

from __future__ import annotations

import numpy as np

MAX_RUN = 65535  # run length fits a u16 on the wire


def box_blur3(img: np.ndarray) -> np.ndarray:
    """3x3 box blur on an HxWx3 uint8 image, border replicated.

    Output channel = round(sum9 / 9), computed in integer arithmetic.
    """
    padded = np.pad(img.astype(np.int32), ((1, 1), (1, 1), (0, 0)), mode="edge")
    h, w = img.shape[:2]
    total = np.zeros((h, w, 3), dtype=np.int32)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            total += padded[dy:dy + h, dx:dx + w]
    return ((total + 4) // 9).astype(np.uint8)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an HxWx3 uint8 image (half-pixel centers)."""
    in_h, in_w = img.shape[:2]
    sy = _source_coords(out_h, in_h)
    sx = _source_coords(out_w, in_w)

    y0 = np.minimum(np.floor(sy).astype(np.int64), max(in_h - 2, 0))
    x0 = np.minimum(np.floor(sx).astype(np.int64), max(in_w - 2, 0))
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]

    p = img.astype(np.float64)
    top = (1.0 - fx) * p[y0][:, x0] + fx * p[y0][:, x1]
    bot = (1.0 - fx) * p[y1][:, x0] + fx * p[y1][:, x1]
    val = (1.0 - fy) * top + fy * bot
    return np.floor(val + 0.5).astype(np.uint8)


def _source_coords(n_out: int, n_in: int) -> np.ndarray:
    s = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(s, 0.0, float(n_in - 1))


def kmeans_assign(pixels: np.ndarray, centers: np.ndarray):
    """One assignment pass: nearest center per pixel (squared distance).

    Returns (labels, per-center coordinate sums, per-center counts). Ties go
    to the lowest center index.
    """
    d = pixels[:, None, :] - centers[None, :, :]
    dist2 = (d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]) + d[..., 2] * d[..., 2]
    labels = np.argmin(dist2, axis=1).astype(np.int64)
    k = centers.shape[0]
    sums = np.zeros((k, 3), dtype=np.float64)
    np.add.at(sums, labels, pixels)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return labels, sums, counts


def rle_encode_runs(values: np.ndarray):
    """Run-length encode an Nx3 uint8 value sequence.

    Returns (run_values Rx3 uint8, run_lengths R int64), runs capped at
    MAX_RUN so each length fits a u16.
    """
    n = values.shape[0]
    if n == 0:
        return np.zeros((0, 3), dtype=np.uint8), np.zeros(0, dtype=np.int64)
    change = np.any(values[1:] != values[:-1], axis=1)
    starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
    ends = np.concatenate((starts[1:], [n]))
    lengths = ends - starts

    pieces = (lengths + MAX_RUN - 1) // MAX_RUN
    out_vals = np.repeat(values[starts], pieces, axis=0)
    out_lens = np.empty(int(pieces.sum()), dtype=np.int64)
    pos = 0
    for length, count in zip(lengths, pieces):
        for j in range(count):
            out_lens[pos] = min(MAX_RUN, length - j * MAX_RUN)
            pos += 1
    return out_vals, out_lens


def triangle_interior(ax: float, ay: float, bx: float, by: float,
                      cx: float, cy: float,
                      x_lo: int, x_hi: int, y_lo: int, y_hi: int):
    """Integer pixel centers inside or on a triangle, row-major order.

    Scans the inclusive window [x_lo..x_hi] x [y_lo..y_hi]; a center counts
    as inside when the three edge cross-products do not carry both signs
    (tolerance 1e-9 treats on-edge as inside).
    """
    if x_hi < x_lo or y_hi < y_lo:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    xs = np.arange(x_lo, x_hi + 1, dtype=np.float64)[None, :]
    ys = np.arange(y_lo, y_hi + 1, dtype=np.float64)[:, None]
    d1 = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
    d2 = (cx - bx) * (ys - by) - (cy - by) * (xs - bx)
    d3 = (ax - cx) * (ys - cy) - (ay - cy) * (xs - cx)
    tol = 1e-9
    has_neg = (d1 < -tol) | (d2 < -tol) | (d3 < -tol)
    has_pos = (d1 > tol) | (d2 > tol) | (d3 > tol)
    iy, ix = np.nonzero(~(has_neg & has_pos))
    return ix.astype(np.int64) + x_lo, iy.astype(np.int64) + y_lo
