"""Independent reference computations used by the test-suite."""

from __future__ import annotations

import itertools
import math

import numpy as np


def _simpson_pieces(fn, bps):
    bps = np.unique(np.asarray(bps, dtype=float))
    total = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        m = 0.5 * (a + b)
        total += (b - a) / 6 * (fn(a) + 4 * fn(m) + fn(b))
    return total


def cell_pair_kernel(offset: int, h: float, L: float) -> float:
    """``int_{cell a} int_{cell b} T_L(x - y)`` for cells ``offset`` apart.

    ``T_L`` is the autocorrelation of the normalised 1-D box of width ``L``.
    """
    u = offset * h

    def integrand(s):
        return (h - abs(s)) * max(0.0, L - abs(u + s)) / (L * L)

    bps = [-h, 0.0, h] + [x for x in (-L - u, -u, L - u) if -h < x < h]
    return _simpson_pieces(integrand, bps)


def u1_autocorrelation(values: np.ndarray, L: float) -> float:
    """``||f * phi_L||_2`` by summing over all pairs of cells."""
    N, d = values.shape[0], values.ndim
    h = 1.0 / N
    ker = np.array([cell_pair_kernel(o, h, L) for o in range(-(N - 1), N)])
    idx = np.arange(N)
    K = ker[idx[:, None] - idx[None, :] + N - 1]
    if d == 1:
        total = values @ K @ values
    elif d == 2:
        total = np.sum(values * (K @ values @ K.T))
    else:
        raise ValueError("oracle supports d <= 2")
    return math.sqrt(max(float(total), 0.0))


def u1_riemann(values: np.ndarray, L: float, nodes: int = 4000) -> float:
    """Midpoint-rule estimate of the squared window deviation integral (1-D)."""
    N = values.shape[0]
    t = -L / 2 + (np.arange(nodes) + 0.5) * (1 + L) / nodes
    lo = np.clip(t - L / 2, 0, 1)
    hi = np.clip(t + L / 2, 0, 1)
    edges = np.arange(N + 1) / N
    over = np.maximum(0, np.minimum(hi[:, None], edges[None, 1:]) - np.maximum(lo[:, None], edges[None, :-1]))
    w = over @ values / L
    return math.sqrt(np.sum(w * w) * (1 + L) / nodes)


def brute_degeneracy(n: int, edges) -> int:
    """Max over vertex subsets of the min induced degree."""
    best = 0
    for r in range(1, n + 1):
        for sub in itertools.combinations(range(n), r):
            s = set(sub)
            deg = {v: 0 for v in sub}
            for i, j in edges:
                if i in s and j in s:
                    deg[i] += 1
                    deg[j] += 1
            best = max(best, min(deg.values()))
    return best


def circle_box_overlap_quadrature(lam: float, nodes: int = 128) -> float:
    """``int_{[0,1]^2} P(x + lam*u in [0,1]^2) dx`` with ``u`` uniform on the circle.

    Tensor Gauss-Legendre in ``x`` (``nodes`` per axis, split at the kinks
    ``lam`` and ``1 - lam``); the arc fraction inside the square is exact.
    """
    cuts = [0.0, lam, 1 - lam, 1.0] if lam < 0.5 else [0.0, 1.0]
    share = np.diff(cuts)
    counts = np.maximum(1, np.round(share / share.sum() * nodes).astype(int))
    counts[np.argmax(counts)] += nodes - counts.sum()
    x, wx = [], []
    for a, b, k in zip(cuts[:-1], cuts[1:], counts):
        g, w = np.polynomial.legendre.leggauss(int(k))
        x.append(a + (b - a) * 0.5 * (g + 1))
        wx.append((b - a) * 0.5 * w)
    x, wx = np.concatenate(x), np.concatenate(wx)
    total = 0.0
    for xi, wi in zip(x, wx):
        for yi, wj in zip(x, wx):
            total += wi * wj * _arc_fraction_inside(xi, yi, lam)
    return total


def _arc_fraction_inside(x: float, y: float, r: float) -> float:
    """Fraction of the circle of radius ``r`` about (x, y) lying in [0,1]^2."""
    cuts = [0.0, 2 * math.pi]
    for c, off in ((x, 0.0), (1 - x, 0.0), (y, 0.5 * math.pi), (1 - y, 0.5 * math.pi)):
        if c < r:
            a = math.acos(c / r)
            for base in (0.0, math.pi):
                for sgn in (-1, 1):
                    cuts.append((base + off + sgn * a) % (2 * math.pi))
    cuts = sorted(cuts)
    inside = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        m = 0.5 * (a + b)
        px, py = x + r * math.cos(m), y + r * math.sin(m)
        if 0 <= px <= 1 and 0 <= py <= 1:
            inside += b - a
    return inside / (2 * math.pi)


def pair_enumeration(member: np.ndarray, lam: float, delta: float) -> bool:
    """Any two member cells whose centres are ``lam`` apart within ``delta``."""
    N = member.shape[0]
    cells = np.argwhere(member)
    if len(cells) == 0:
        return False
    c = (cells + 0.5) / N
    for i in range(len(c)):
        dist = np.sqrt(np.sum((c - c[i]) ** 2, axis=1))
        if np.any(np.abs(dist - lam) <= delta):
            return True
    return False
