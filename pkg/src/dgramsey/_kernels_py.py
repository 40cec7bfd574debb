"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends agree
to rounding. Vertex indices here are ordering positions, not graph labels.
"""

from __future__ import annotations

import numpy as np

TANGENCY_SLACK = 1e-12
DEPENDENCE_TOL = 1e-10

STATUS_OK = 0
STATUS_EMPTY = 1
STATUS_DEGENERATE = 2
STATUS_NO_PRED = 3

BACKEND = "python"


def fold_batch(pred_pos, pred_ptr, pred_sq, gauss):
    """Sequentially fold ``S`` configurations at once.

    ``gauss`` has shape (S, n+1, d); row 0 is unused. Returns points
    (S, n+1, d), sphere radii (S, n+1) and a per-sample status code.
    """
    gauss = np.asarray(gauss, dtype=np.float64)
    S, n1, d = gauss.shape
    pts = np.zeros((S, n1, d))
    radii = np.zeros((S, n1))
    status = np.zeros(S, dtype=np.int8)
    for j in range(1, n1):
        lo, hi = int(pred_ptr[j]), int(pred_ptr[j + 1])
        ell = hi - lo
        if ell == 0:
            status[status == 0] = STATUS_NO_PRED
            continue
        x1 = pts[:, pred_pos[lo], :]
        t1 = float(pred_sq[lo])
        q = np.zeros((S, max(ell - 1, 0), d))
        a = np.zeros((S, max(ell - 1, 0)))
        for i in range(1, ell):
            e = pts[:, pred_pos[lo + i], :] - x1
            w = e.copy()
            size = np.sqrt(np.sum(e * e, axis=1))
            rii = np.zeros((S, i))
            for _ in range(2):
                for k in range(i - 1):
                    c = np.sum(q[:, k, :] * w, axis=1)
                    rii[:, k] += c
                    w -= c[:, None] * q[:, k, :]
            nw = np.sqrt(np.sum(w * w, axis=1))
            bad = (size == 0.0) | (nw <= DEPENDENCE_TOL * size)
            status[bad & (status == 0)] = STATUS_DEGENERATE
            nw = np.where(bad, 1.0, nw)
            q[:, i - 1, :] = w / nw[:, None]
            h = 0.5 * (t1 + np.sum(e * e, axis=1) - float(pred_sq[lo + i]))
            acc = h.copy()
            for k in range(i - 1):
                acc -= rii[:, k] * a[:, k]
            a[:, i - 1] = acc / nw
        offset = np.zeros((S, d))
        rad2 = np.full(S, t1)
        for k in range(ell - 1):
            offset += a[:, k, None] * q[:, k, :]
            rad2 -= a[:, k] * a[:, k]
        neg = rad2 < 0
        empty = rad2 < -TANGENCY_SLACK * max(1.0, t1)
        status[empty & (status == 0)] = STATUS_EMPTY
        rad2 = np.where(neg, 0.0, rad2)
        r = np.sqrt(rad2)
        g = gauss[:, j, :].copy()
        for _ in range(2):
            for k in range(ell - 1):
                c = np.sum(q[:, k, :] * g, axis=1)
                g -= c[:, None] * q[:, k, :]
        ng = np.sqrt(np.sum(g * g, axis=1))
        status[(ng == 0.0) & (status == 0)] = STATUS_DEGENERATE
        ng = np.where(ng == 0.0, 1.0, ng)
        pts[:, j, :] = x1 + offset + (r / ng)[:, None] * g
        radii[:, j] = r
    return pts, radii, status


# ---------------------------------------------------------------------------
# copy search


def _complement(q, d):
    """Pivoted Gram-Schmidt completion; identical to the compiled version."""
    basis = [row for row in q]
    out = []
    for _ in range(d - len(q)):
        best = None
        best_norm = -1.0
        for m in range(d):
            w = np.zeros(d)
            w[m] = 1.0
            for _ in range(2):
                for b in basis:
                    w = w - (b @ w) * b
            nw = np.sqrt(w @ w)
            if nw > best_norm:
                best, best_norm = w, nw
        v = best / best_norm
        basis.append(v)
        out.append(v)
    return out


def _sphere(points, pred_idx, radii, d):
    """Centre, radius and flat basis for target distances ``radii``; None if degenerate."""
    x1 = points[pred_idx[0]]
    t1 = radii[0] * radii[0]
    ell = len(pred_idx)
    q = []
    r = np.zeros((ell, ell))
    a = np.zeros(ell)
    for i in range(1, ell):
        e = points[pred_idx[i]] - x1
        w = e.copy()
        size = np.sqrt(e @ e)
        for _ in range(2):
            for k in range(i - 1):
                c = q[k] @ w
                r[i, k] += c
                w = w - c * q[k]
        nw = np.sqrt(w @ w)
        if size == 0.0 or nw <= DEPENDENCE_TOL * size:
            return None
        q.append(w / nw)
        acc = 0.5 * (t1 + e @ e - radii[i] * radii[i])
        for k in range(i - 1):
            acc -= r[i, k] * a[k]
        a[i - 1] = acc / nw
    offset = np.zeros(d)
    rad2 = t1
    for k in range(ell - 1):
        offset = offset + a[k] * q[k]
        rad2 -= a[k] * a[k]
    rad = np.sqrt(rad2) if rad2 > 0 else 0.0
    return x1 + offset, rad, np.array(_complement(q, d)).reshape(-1, d)


def _box_offsets(hw, d):
    rng = np.arange(-hw, hw + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def search_copy(member, N, d, anchors, pred_pos, pred_ptr, pred_len, dirs, dir_ptr, halfw, delta):
    """Depth-first search for a delta-robust copy anchored at member cells.

    Returns ``(anchor_slot, cells)`` for the first witness in anchor order, or
    ``(-1, None)``. ``cells`` lists flat cell indices by ordering position.
    """
    member = np.asarray(member, dtype=np.uint8).ravel()
    n1 = len(pred_ptr) - 1
    strides = np.array([N ** (d - 1 - m) for m in range(d)], dtype=np.int64)
    boxes = [None] + [_box_offsets(int(halfw[j]), d) for j in range(1, n1)]

    def center(cell):
        idx = (cell // strides) % N
        return (idx + 0.5) / N

    def candidates(j, pts):
        lo, hi = int(pred_ptr[j]), int(pred_ptr[j + 1])
        preds = [int(p) for p in pred_pos[lo:hi]]
        lens = [float(x) for x in pred_len[lo:hi]]
        sph = _sphere(pts, preds, lens, d)
        if sph is None:
            return np.zeros(0, dtype=np.int64)
        c, rad, basis = sph
        k = basis.shape[0]
        table = np.asarray(dirs[dir_ptr[j] : dir_ptr[j + 1]]).reshape(-1, k)
        cand = np.empty((table.shape[0], d))
        for b in range(table.shape[0]):
            v = np.zeros(d)
            for m in range(k):
                v = v + table[b, m] * basis[m]
            cand[b] = c + rad * v
        base = np.floor(cand * N).astype(np.int64)
        cells = base[:, None, :] + boxes[j][None, :, :]
        cells = cells.reshape(-1, d)
        ok = np.all((cells >= 0) & (cells < N), axis=1)
        flat = cells[ok] @ strides
        if flat.size == 0:
            return flat
        _, first = np.unique(flat, return_index=True)
        flat = flat[np.sort(first)]
        flat = flat[member[flat] != 0]
        if flat.size == 0:
            return flat
        centers = ((flat[:, None] // strides) % N + 0.5) / N
        keep = np.ones(flat.size, dtype=bool)
        for p, ln in zip(preds, lens):
            diff = centers - pts[p]
            dist = np.sqrt(np.sum(diff * diff, axis=1))
            keep &= np.abs(dist - ln) <= delta
        return flat[keep]

    def dfs(j, pts, cells):
        if j == n1:
            return True
        for cell in candidates(j, pts):
            pts[j] = center(int(cell))
            cells[j] = int(cell)
            if dfs(j + 1, pts, cells):
                return True
        return False

    for slot, a in enumerate(np.asarray(anchors, dtype=np.int64)):
        if not member[a]:
            continue
        pts = np.zeros((n1, d))
        cells = np.full(n1, -1, dtype=np.int64)
        pts[0] = center(int(a))
        cells[0] = int(a)
        if dfs(1, pts, cells):
            return slot, cells
    return -1, None
