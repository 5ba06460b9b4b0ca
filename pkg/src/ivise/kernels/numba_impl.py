"""Numba-compiled twins of the numpy kernels.

Same arithmetic, same order of operations, so results are bit-identical to
numpy_impl. Import fails cleanly when numba is absent; the dispatcher in
__init__ falls back to the numpy path.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_RUN = 65535


@njit(cache=True)
def box_blur3(img):
    h, w = img.shape[0], img.shape[1]
    out = np.empty((h, w, 3), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                total = np.int32(0)
                for dy in range(-1, 2):
                    yy = y + dy
                    if yy < 0:
                        yy = 0
                    elif yy >= h:
                        yy = h - 1
                    for dx in range(-1, 2):
                        xx = x + dx
                        if xx < 0:
                            xx = 0
                        elif xx >= w:
                            xx = w - 1
                        total += np.int32(img[yy, xx, c])
                out[y, x, c] = np.uint8((total + 4) // 9)
    return out


@njit(cache=True)
def bilinear_resize(img, out_h, out_w):
    in_h, in_w = img.shape[0], img.shape[1]
    out = np.empty((out_h, out_w, 3), dtype=np.uint8)
    scale_y = in_h / out_h
    scale_x = in_w / out_w
    y_cap = max(in_h - 2, 0)
    x_cap = max(in_w - 2, 0)
    for i in range(out_h):
        sy = (i + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        elif sy > in_h - 1:
            sy = float(in_h - 1)
        y0 = int(np.floor(sy))
        if y0 > y_cap:
            y0 = y_cap
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = (j + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            elif sx > in_w - 1:
                sx = float(in_w - 1)
            x0 = int(np.floor(sx))
            if x0 > x_cap:
                x0 = x_cap
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            for c in range(3):
                top = (1.0 - fx) * img[y0, x0, c] + fx * img[y0, x1, c]
                bot = (1.0 - fx) * img[y1, x0, c] + fx * img[y1, x1, c]
                val = (1.0 - fy) * top + fy * bot
                out[i, j, c] = np.uint8(min(255.0, max(0.0, np.floor(val + 0.5))))
    return out


@njit(cache=True)
def kmeans_assign(pixels, centers):
    n = pixels.shape[0]
    k = centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sums = np.zeros((k, 3), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        best = 0
        d0 = pixels[i, 0] - centers[0, 0]
        d1 = pixels[i, 1] - centers[0, 1]
        d2 = pixels[i, 2] - centers[0, 2]
        best_d = (d0 * d0 + d1 * d1) + d2 * d2
        for j in range(1, k):
            d0 = pixels[i, 0] - centers[j, 0]
            d1 = pixels[i, 1] - centers[j, 1]
            d2 = pixels[i, 2] - centers[j, 2]
            d = (d0 * d0 + d1 * d1) + d2 * d2
            if d < best_d:
                best_d = d
                best = j
        labels[i] = best
        sums[best, 0] += pixels[i, 0]
        sums[best, 1] += pixels[i, 1]
        sums[best, 2] += pixels[i, 2]
        counts[best] += 1
    return labels, sums, counts


@njit(cache=True)
def rle_encode_runs(values):
    n = values.shape[0]
    if n == 0:
        return np.zeros((0, 3), dtype=np.uint8), np.zeros(0, dtype=np.int64)
    # first pass: count emitted runs (value changes plus MAX_RUN splits)
    n_runs = 0
    run_len = 1
    for i in range(1, n + 1):
        same = False
        if i < n:
            same = (values[i, 0] == values[i - 1, 0]
                    and values[i, 1] == values[i - 1, 1]
                    and values[i, 2] == values[i - 1, 2])
        if same:
            run_len += 1
        else:
            n_runs += (run_len + MAX_RUN - 1) // MAX_RUN
            run_len = 1
    out_vals = np.empty((n_runs, 3), dtype=np.uint8)
    out_lens = np.empty(n_runs, dtype=np.int64)
    pos = 0
    start = 0
    for i in range(1, n + 1):
        same = False
        if i < n:
            same = (values[i, 0] == values[i - 1, 0]
                    and values[i, 1] == values[i - 1, 1]
                    and values[i, 2] == values[i - 1, 2])
        if not same:
            length = i - start
            while length > 0:
                piece = min(MAX_RUN, length)
                out_vals[pos, 0] = values[start, 0]
                out_vals[pos, 1] = values[start, 1]
                out_vals[pos, 2] = values[start, 2]
                out_lens[pos] = piece
                pos += 1
                length -= piece
            start = i
    return out_vals, out_lens


@njit(cache=True)
def triangle_interior(ax, ay, bx, by, cx, cy, x_lo, x_hi, y_lo, y_hi):
    if x_hi < x_lo or y_hi < y_lo:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    tol = 1e-9
    n_max = (x_hi - x_lo + 1) * (y_hi - y_lo + 1)
    xs = np.empty(n_max, dtype=np.int64)
    ys = np.empty(n_max, dtype=np.int64)
    count = 0
    for iy in range(y_lo, y_hi + 1):
        py = float(iy)
        for ix in range(x_lo, x_hi + 1):
            px = float(ix)
            d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
            d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
            has_neg = (d1 < -tol) or (d2 < -tol) or (d3 < -tol)
            has_pos = (d1 > tol) or (d2 > tol) or (d3 > tol)
            if not (has_neg and has_pos):
                xs[count] = ix
                ys[count] = iy
                count += 1
    return xs[:count].copy(), ys[:count].copy()
