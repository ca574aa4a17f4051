"""Slow reference implementations used to cross-check the fast paths.

Nothing here shares code with the routines it checks beyond the mask
boundary definition.
"""

from __future__ import annotations

import math

import numpy as np


def brute_zero_set(mask) -> list[tuple[int, int]]:
    m = np.asarray(mask)
    h, w = m.shape
    z = []
    for r in range(h):
        for c in range(w):
            if not m[r, c]:
                z.append((r, c))
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and not m[rr, cc]:
                    z.append((r, c))
                    break
    return z


def brute_edt(mask) -> np.ndarray:
    """Nearest zero-set pixel by exhaustive search."""
    m = np.asarray(mask)
    h, w = m.shape
    z = brute_zero_set(m)
    out = np.zeros((h, w))
    if not z:
        return out
    zr = np.array([p[0] for p in z], dtype=np.float64)
    zc = np.array([p[1] for p in z], dtype=np.float64)
    for r in range(h):
        for c in range(w):
            out[r, c] = math.sqrt(float(np.min((zr - r) ** 2 + (zc - c) ** 2)))
    return out


def brute_boundary(mask) -> list[tuple[int, int]]:
    """4-neighbour boundary with the frame treated as background."""
    m = np.asarray(mask)
    h, w = m.shape
    pts = []
    for r in range(h):
        for c in range(w):
            if not m[r, c]:
                continue
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not m[rr, cc]:
                    pts.append((r, c))
                    break
    return pts


def percentile_linear(values, q: float) -> float:
    v = sorted(values)
    if len(v) == 1:
        return float(v[0])
    pos = (len(v) - 1) * q / 100.0
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    return float(v[lo] + (v[hi] - v[lo]) * (pos - lo))


def brute_hd95(a, b, spacing: float = 1.0) -> float:
    ba, bb = brute_boundary(a), brute_boundary(b)
    d = []
    for p in ba:
        d.append(min(math.dist(p, q) for q in bb))
    for q in bb:
        d.append(min(math.dist(q, p) for p in ba))
    return percentile_linear(d, 95.0) * spacing


def brute_dice(a, b) -> float:
    a = [int(x) for x in np.asarray(a).ravel()]
    b = [int(x) for x in np.asarray(b).ravel()]
    inter = sum(1 for x, y in zip(a, b) if x and y)
    tot = sum(a) + sum(b)
    return 1.0 if tot == 0 else 2.0 * inter / tot


def loop_weighted_prototype(features, weight, eps: float = 1e-6) -> np.ndarray:
    """Straight-loop ``sum(w f) / (sum(w) + eps)``."""
    c, h, w = features.shape
    num = [0.0] * c
    den = 0.0
    for r in range(h):
        for col in range(w):
            wt = float(weight[r, col])
            den += wt
            for k in range(c):
                num[k] += wt * float(features[k, r, col])
    return np.array([x / (den + eps) for x in num])


def loop_stats(g, mask, speed, eps: float = 1e-6, eps_grad: float = 1e-8):
    """Straight-loop centrality, boundary strength (Sobel, replicate border) and speed variance."""
    h, w = mask.shape
    num = den = 0.0
    for r in range(h):
        for c in range(w):
            num += float(g[r, c]) * float(mask[r, c])
            den += float(mask[r, c])
    cg = num / (den + eps)
    kx = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))
    tot = 0.0
    for r in range(h):
        for c in range(w):
            sx = sy = 0.0
            for i in range(3):
                for j in range(3):
                    v = float(mask[min(max(r + i - 1, 0), h - 1), min(max(c + j - 1, 0), w - 1)])
                    sx += kx[i][j] * v
                    sy += kx[j][i] * v
            tot += math.sqrt(sx * sx + sy * sy + eps_grad)
    bs = tot / (h * w)
    vals = [float(x) for x in np.asarray(speed).ravel()]
    mu = sum(vals) / len(vals)
    sv = sum((x - mu) ** 2 for x in vals) / len(vals)
    return cg, bs, sv


def central_difference(fn, x: np.ndarray, idx, h: float = 1e-5) -> float:
    xp = x.copy()
    xm = x.copy()
    xp[idx] += h
    xm[idx] -= h
    return (fn(xp) - fn(xm)) / (2.0 * h)
