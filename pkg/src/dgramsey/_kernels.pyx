# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot kernels: batched folding and the copy search.

Mirrors ``_kernels_py`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs
from libcpp.vector cimport vector

cnp.import_array()

cdef enum:
    MAXD = 8

cdef double TANGENCY_SLACK = 1e-12
cdef double DEPENDENCE_TOL = 1e-10

BACKEND = "compiled"


def fold_batch(const long[:] pred_pos, const long[:] pred_ptr, const double[:] pred_sq, gauss_in):
    cdef double[:, :, :] gauss = np.ascontiguousarray(gauss_in, dtype=np.float64)
    cdef Py_ssize_t S = gauss.shape[0], n1 = gauss.shape[1], d = gauss.shape[2]
    if d > MAXD:
        raise ValueError("dimension above 8 is not supported")
    pts_arr = np.zeros((S, n1, d))
    radii_arr = np.zeros((S, n1))
    status_arr = np.zeros(S, dtype=np.int8)
    cdef double[:, :, :] pts = pts_arr
    cdef double[:, :] radii = radii_arr
    cdef signed char[:] status = status_arr
    cdef double q[MAXD][MAXD]
    cdef double rr[MAXD][MAXD]
    cdef double a[MAXD]
    cdef double e[MAXD]
    cdef double w[MAXD]
    cdef double g[MAXD]
    cdef double off[MAXD]
    cdef Py_ssize_t s, j, i, k, m, lo, ell, p1, rep
    cdef double t1, size, nw, c, h, rad2, r, ng, ee, acc
    with nogil:
        for s in range(S):
            for j in range(1, n1):
                lo = pred_ptr[j]
                ell = pred_ptr[j + 1] - lo
                if ell == 0:
                    if status[s] == 0:
                        status[s] = 3
                    continue
                p1 = pred_pos[lo]
                t1 = pred_sq[lo]
                for i in range(1, ell):
                    ee = 0.0
                    for m in range(d):
                        e[m] = pts[s, pred_pos[lo + i], m] - pts[s, p1, m]
                        w[m] = e[m]
                        ee = ee + e[m] * e[m]
                    size = sqrt(ee)
                    for k in range(i):
                        rr[i][k] = 0.0
                    for rep in range(2):
                        for k in range(i - 1):
                            c = 0.0
                            for m in range(d):
                                c = c + q[k][m] * w[m]
                            rr[i][k] = rr[i][k] + c
                            for m in range(d):
                                w[m] = w[m] - c * q[k][m]
                    nw = 0.0
                    for m in range(d):
                        nw = nw + w[m] * w[m]
                    nw = sqrt(nw)
                    if size == 0.0 or nw <= DEPENDENCE_TOL * size:
                        if status[s] == 0:
                            status[s] = 2
                        nw = 1.0
                    for m in range(d):
                        q[i - 1][m] = w[m] / nw
                    h = 0.5 * (t1 + ee - pred_sq[lo + i])
                    acc = h
                    for k in range(i - 1):
                        acc = acc - rr[i][k] * a[k]
                    a[i - 1] = acc / nw
                rad2 = t1
                for m in range(d):
                    off[m] = 0.0
                for k in range(ell - 1):
                    for m in range(d):
                        off[m] = off[m] + a[k] * q[k][m]
                    rad2 = rad2 - a[k] * a[k]
                if rad2 < 0.0:
                    if rad2 < -TANGENCY_SLACK * (t1 if t1 > 1.0 else 1.0):
                        if status[s] == 0:
                            status[s] = 1
                    rad2 = 0.0
                r = sqrt(rad2)
                for m in range(d):
                    g[m] = gauss[s, j, m]
                for rep in range(2):
                    for k in range(ell - 1):
                        c = 0.0
                        for m in range(d):
                            c = c + q[k][m] * g[m]
                        for m in range(d):
                            g[m] = g[m] - c * q[k][m]
                ng = 0.0
                for m in range(d):
                    ng = ng + g[m] * g[m]
                ng = sqrt(ng)
                if ng == 0.0:
                    if status[s] == 0:
                        status[s] = 2
                    ng = 1.0
                for m in range(d):
                    pts[s, j, m] = pts[s, p1, m] + off[m] + (r / ng) * g[m]
                radii[s, j] = r
    return pts_arr, radii_arr, status_arr


# ---------------------------------------------------------------------------
# copy search

cdef inline void cell_center(long cell, int d, long N, double* out) noexcept nogil:
    cdef int m
    for m in range(d - 1, -1, -1):
        out[m] = ((cell % N) + 0.5) / N
        cell = cell // N


cdef int build_sphere(double[:, :] pts, const long[:] pred_pos, const double[:] pred_len,
                      long lo, long ell, int d, double* center, double* rad,
                      double basis[MAXD][MAXD], int* kdim) noexcept nogil:
    cdef double q[MAXD][MAXD]
    cdef double rr[MAXD][MAXD]
    cdef double a[MAXD]
    cdef double e[MAXD]
    cdef double w[MAXD]
    cdef double t1, size, nw, c, ee, acc, rad2, best_norm
    cdef long p1 = pred_pos[lo]
    cdef int i, k, m, rep, cnt, mm, b, nb
    t1 = pred_len[lo] * pred_len[lo]
    for i in range(1, ell):
        ee = 0.0
        for m in range(d):
            e[m] = pts[pred_pos[lo + i], m] - pts[p1, m]
            w[m] = e[m]
            ee = ee + e[m] * e[m]
        size = sqrt(ee)
        for k in range(i):
            rr[i][k] = 0.0
        for rep in range(2):
            for k in range(i - 1):
                c = 0.0
                for m in range(d):
                    c = c + q[k][m] * w[m]
                rr[i][k] = rr[i][k] + c
                for m in range(d):
                    w[m] = w[m] - c * q[k][m]
        nw = 0.0
        for m in range(d):
            nw = nw + w[m] * w[m]
        nw = sqrt(nw)
        if size == 0.0 or nw <= DEPENDENCE_TOL * size:
            return 0
        for m in range(d):
            q[i - 1][m] = w[m] / nw
        acc = 0.5 * (t1 + ee - pred_len[lo + i] * pred_len[lo + i])
        for k in range(i - 1):
            acc = acc - rr[i][k] * a[k]
        a[i - 1] = acc / nw
    for m in range(d):
        center[m] = 0.0
    rad2 = t1
    for k in range(ell - 1):
        for m in range(d):
            center[m] = center[m] + a[k] * q[k][m]
        rad2 = rad2 - a[k] * a[k]
    for m in range(d):
        center[m] = pts[p1, m] + center[m]
    rad[0] = sqrt(rad2) if rad2 > 0.0 else 0.0
    # complement of span(q): pivoted Gram-Schmidt over the standard basis
    cnt = <int>(ell - 1)
    nb = 0
    for i in range(d - cnt):
        best_norm = -1.0
        for mm in range(d):
            for m in range(d):
                w[m] = 0.0
            w[mm] = 1.0
            for rep in range(2):
                for b in range(cnt):
                    c = 0.0
                    for m in range(d):
                        c = c + q[b][m] * w[m]
                    for m in range(d):
                        w[m] = w[m] - c * q[b][m]
                for b in range(nb):
                    c = 0.0
                    for m in range(d):
                        c = c + basis[b][m] * w[m]
                    for m in range(d):
                        w[m] = w[m] - c * basis[b][m]
            nw = 0.0
            for m in range(d):
                nw = nw + w[m] * w[m]
            nw = sqrt(nw)
            if nw > best_norm:
                best_norm = nw
                for m in range(d):
                    e[m] = w[m]
        for m in range(d):
            basis[nb][m] = e[m] / best_norm
        nb = nb + 1
    kdim[0] = nb
    return 1


cdef void gather(double[:, :] pts, const unsigned char[:] member, long N, int d,
                 const long[:] pred_pos, const double[:] pred_len, long lo, long ell,
                 const double[:] dirs, long dlo, long dhi, int hw, double delta,
                 long[:] stamp, long tag, vector[long]* out) noexcept nogil:
    cdef double center[MAXD]
    cdef double basis[MAXD][MAXD]
    cdef double p[MAXD]
    cdef double cc[MAXD]
    cdef long base[MAXD]
    cdef long idx[MAXD]
    cdef double rad, dist, diff
    cdef int kdim, m, k, ok
    cdef long b, nb, cell, i, total, t, rem
    cdef long side = 2 * hw + 1
    if not build_sphere(pts, pred_pos, pred_len, lo, ell, d, center, &rad, basis, &kdim):
        return
    nb = (dhi - dlo) // kdim
    total = 1
    for m in range(d):
        total = total * side
    for b in range(nb):
        for m in range(d):
            p[m] = 0.0
        for k in range(kdim):
            for m in range(d):
                p[m] = p[m] + dirs[dlo + b * kdim + k] * basis[k][m]
        for m in range(d):
            p[m] = center[m] + rad * p[m]
            base[m] = <long>floor(p[m] * N)
        for t in range(total):
            rem = t
            ok = 1
            for m in range(d - 1, -1, -1):
                idx[m] = base[m] + (rem % side) - hw
                rem = rem // side
                if idx[m] < 0 or idx[m] >= N:
                    ok = 0
            if not ok:
                continue
            cell = 0
            for m in range(d):
                cell = cell * N + idx[m]
            if stamp[cell] == tag:
                continue
            stamp[cell] = tag
            if not member[cell]:
                continue
            for m in range(d):
                cc[m] = (idx[m] + 0.5) / N
            ok = 1
            for i in range(ell):
                dist = 0.0
                for m in range(d):
                    diff = cc[m] - pts[pred_pos[lo + i], m]
                    dist = dist + diff * diff
                dist = sqrt(dist)
                if not (fabs(dist - pred_len[lo + i]) <= delta):
                    ok = 0
                    break
            if ok:
                out.push_back(cell)


def search_copy(member_in, long N, int d, const long[:] anchors, const long[:] pred_pos,
                const long[:] pred_ptr, const double[:] pred_len, const double[:] dirs,
                const long[:] dir_ptr, const long[:] halfw, double delta):
    cdef const unsigned char[:] member = np.ascontiguousarray(member_in, dtype=np.uint8).ravel()
    cdef Py_ssize_t n1 = pred_ptr.shape[0] - 1
    if d > MAXD:
        raise ValueError("dimension above 8 is not supported")
    stamp_arr = np.full(member.shape[0], -1, dtype=np.int64)
    cdef long[:] stamp = stamp_arr
    pts_arr = np.zeros((n1, d))
    cdef double[:, :] pts = pts_arr
    cells_arr = np.full(n1, -1, dtype=np.int64)
    cdef long[:] cells = cells_arr
    cdef vector[vector[long]] lists
    cdef vector[long] cursor
    lists.resize(n1)
    cursor.resize(n1)
    cdef long tag = 0
    cdef long slot, a, j, cell
    cdef long found = -1
    cdef double cbuf[MAXD]
    cdef int m
    with nogil:
        for slot in range(anchors.shape[0]):
            a = anchors[slot]
            if not member[a]:
                continue
            cell_center(a, d, N, cbuf)
            for m in range(d):
                pts[0, m] = cbuf[m]
            cells[0] = a
            if n1 == 1:
                found = slot
                break
            j = 1
            lists[1].clear()
            gather(pts, member, N, d, pred_pos, pred_len, pred_ptr[1], pred_ptr[2] - pred_ptr[1],
                   dirs, dir_ptr[1], dir_ptr[2], <int>halfw[1], delta, stamp, tag, &lists[1])
            tag = tag + 1
            cursor[1] = 0
            while j >= 1:
                if cursor[j] >= <long>lists[j].size():
                    j = j - 1
                    continue
                cell = lists[j][cursor[j]]
                cursor[j] = cursor[j] + 1
                cells[j] = cell
                cell_center(cell, d, N, cbuf)
                for m in range(d):
                    pts[j, m] = cbuf[m]
                if j == n1 - 1:
                    found = slot
                    break
                j = j + 1
                lists[j].clear()
                gather(pts, member, N, d, pred_pos, pred_len, pred_ptr[j], pred_ptr[j + 1] - pred_ptr[j],
                       dirs, dir_ptr[j], dir_ptr[j + 1], <int>halfw[j], delta, stamp, tag, &lists[j])
                tag = tag + 1
                cursor[j] = 0
            if found >= 0:
                break
    if found < 0:
        return -1, None
    return found, cells_arr.copy()
