"""Grid-resolution search for scaled copies of a distance graph inside a set."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BudgetZero, FoldInfeasible, ToleranceNonpositive
from .geometry import Embedding, verify_isometric
from .graphs import DegeneracyOrdering, DistanceGraph, degeneracy_ordering
from .gridset import GridSet
from .rng import STREAM_SEARCH, substream

# cells per direction step on 1-spheres when no budget is given
AUTO_ARC_CELLS = 4.0
# directions per sphere above one dimension when no budget is given
AUTO_HIGH_BUDGET = 256


@dataclass(frozen=True)
class CopyQuery:
    graph: DistanceGraph
    lam: float
    tolerance: float | None = None
    anchor_stride: int | None = None
    rotation_budget: int | None = None
    ordering: DegeneracyOrdering | None = None

    def resolved(self, N: int) -> "CopyQuery":
        """Fill defaults that depend on the grid size and validate."""
        d = self.graph.dim
        tol = self.tolerance if self.tolerance is not None else math.sqrt(d) / N
        if not tol > 0:
            raise ToleranceNonpositive("tolerance must be positive")
        if tol < math.sqrt(d) / N * (1 - 1e-12):
            raise ToleranceNonpositive(f"tolerance {tol} is below the cell diagonal sqrt(d)/N")
        stride = self.anchor_stride if self.anchor_stride is not None else (1 if N <= 256 else -(-N // 256))
        if stride < 1 or (self.rotation_budget is not None and self.rotation_budget < 1):
            raise BudgetZero("anchor stride and rotation budget must be at least 1")
        ordering = self.ordering or degeneracy_ordering(self.graph)
        return CopyQuery(self.graph, float(self.lam), float(tol), int(stride), self.rotation_budget, ordering)


def _direction_table(k: int, budget: int, seed: int, j: int) -> np.ndarray:
    """Unit vectors in R^k spread over the sphere (low-discrepancy when k <= 3)."""
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        ang = 2 * np.pi * (np.arange(budget) + 0.5) / budget
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if k == 3:
        i = np.arange(budget) + 0.5
        z = 1 - 2 * i / budget
        phi = np.pi * (1 + math.sqrt(5)) * i
        rho = np.sqrt(np.maximum(0.0, 1 - z * z))
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    g = substream(seed, STREAM_SEARCH, j).standard_normal((budget, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _covering_radius(table: np.ndarray, seed: int, j: int) -> float:
    """Largest distance from a sphere point to the nearest table direction."""
    k = table.shape[1]
    if k == 1:
        return 0.0
    if k == 2:
        return 2 * math.sin(math.pi / (2 * table.shape[0]))
    # empirical for higher spheres, with a safety factor
    probe = substream(seed, STREAM_SEARCH, 10_000 + j).standard_normal((4096, k))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    nearest = np.max(np.min(np.linalg.norm(probe[:, None, :] - table[None, :, :], axis=2), axis=1))
    return float(1.25 * nearest)


@dataclass
class SearchPlan:
    """Flattened arrays consumed by the search kernels."""

    pred_pos: np.ndarray
    pred_ptr: np.ndarray
    pred_len: np.ndarray
    dirs: np.ndarray
    dir_ptr: np.ndarray
    halfw: np.ndarray
    budgets: list[int] = field(default_factory=list)


def plan_search(q: CopyQuery, N: int, seed: int = 0) -> SearchPlan:
    g, ordering, d = q.graph, q.ordering, q.graph.dim
    n1 = len(ordering.order)
    pos, ptr, lens = [], [0, 0], []
    dirs, dptr, halfw, budgets = [], [0, 0], [0], [0]
    for j in range(1, n1):
        preds = ordering.pred_positions(j)
        if not preds:
            raise FoldInfeasible(f"vertex {ordering.order[j]} has no predecessor")
        if len(preds) > d:
            raise FoldInfeasible("dimension is below degeneracy + 1")
        v = ordering.order[j]
        plen = [q.lam * math.sqrt(g.sq_length(ordering.order[p], v)) for p in preds]
        pos.extend(preds)
        lens.extend(plen)
        ptr.append(len(pos))
        k = d - len(preds) + 1
        r_bound = min(plen)
        if q.rotation_budget is not None:
            budget = int(q.rotation_budget)
        elif k == 2:
            budget = max(16, math.ceil(2 * math.pi * r_bound * N / AUTO_ARC_CELLS))
        else:
            budget = AUTO_HIGH_BUDGET
        table = _direction_table(k, budget, seed, j)
        reach = q.tolerance + r_bound * _covering_radius(table, seed, j)
        halfw.append(math.ceil(reach * N + 0.5))
        budgets.append(table.shape[0])
        dirs.append(table.ravel())
        dptr.append(dptr[-1] + table.size)
    return SearchPlan(
        np.asarray(pos, dtype=np.int64),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(lens, dtype=float),
        np.concatenate(dirs) if dirs else np.zeros(0),
        np.asarray(dptr, dtype=np.int64),
        np.asarray(halfw, dtype=np.int64),
        budgets,
    )


def _fits(q: CopyQuery) -> bool:
    return q.lam * q.graph.diameter() <= math.sqrt(q.graph.dim) * (1 + 1e-12)


def find_copy(A: GridSet, q: CopyQuery, seed: int = 0, workers: int = 1, backend: str | None = None) -> Embedding | None:
    """First delta-robust copy of ``lam * graph`` on member cell centres, or None.

    Anchors are member cells in row-major order, thinned by the stride. The
    answer is one-sided: None means nothing was found under the budgets.
    """
    N, d = A.cells_per_side, A.dim
    if q.graph.dim != d:
        raise FoldInfeasible("graph and set dimensions differ")
    q = q.resolved(N)
    if not _fits(q):
        return None
    member = np.ascontiguousarray(A.membership.ravel().astype(np.uint8))
    anchors = np.flatnonzero(member)[:: q.anchor_stride].astype(np.int64)
    if anchors.size == 0:
        return None
    plan = plan_search(q, N, seed)
    kern = kernels.get(backend)

    def run(chunk: np.ndarray):
        return kern.search_copy(
            member, N, d, chunk, plan.pred_pos, plan.pred_ptr, plan.pred_len, plan.dirs, plan.dir_ptr, plan.halfw, q.tolerance
        )

    workers = max(1, int(workers))
    if workers == 1:
        slot, cells = run(anchors)
    else:
        parts = np.array_split(anchors, workers)
        offsets = np.cumsum([0] + [len(p) for p in parts[:-1]])
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, parts))
        slot, cells = -1, None
        for off, (s, c) in zip(offsets, results):
            if s >= 0:
                slot, cells = int(off + s), c
                break
    if slot < 0:
        return None
    return _witness(A, q, cells)


def _witness(A: GridSet, q: CopyQuery, cells: np.ndarray) -> Embedding:
    N, d = A.cells_per_side, A.dim
    idx = np.stack(np.unravel_index(np.asarray(cells, dtype=np.int64), (N,) * d), axis=1)
    centers = (idx + 0.5) / N
    pts = np.zeros((q.graph.n_vertices, d))
    for p, v in enumerate(q.ordering.order):
        pts[v] = centers[p]
    emb = Embedding(pts, q.lam, q.graph, q.ordering, ("grid-witness", f"tolerance={q.tolerance!r}"))
    return emb


def check_witness(A: GridSet, emb: Embedding, tol: float) -> bool:
    """Independent soundness check: member cells and edge lengths within ``tol``."""
    N = A.cells_per_side
    idx = np.floor(np.asarray(emb.points) * N).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= N):
        return False
    if not all(A.membership[tuple(i)] for i in idx):
        return False
    return verify_isometric(emb, tol=tol, absolute=True)


# ---------------------------------------------------------------------------
# scans


def _longest(flags: Sequence[bool], lambdas: Sequence[float], value: bool):
    best, start, best_span = 0, None, None
    for i, f in enumerate(list(flags) + [not value]):
        if f == value:
            if start is None:
                start = i
        elif start is not None:
            if i - start > best:
                best, best_span = i - start, (float(lambdas[start]), float(lambdas[i - 1]))
            start = None
    return best_span


@dataclass
class ScanReport:
    lambdas: list[float]
    found: list[bool]
    witnesses: list[Embedding | None]
    tolerance: float
    anchor_stride: int
    rotation_budget: int | None

    @property
    def longest_gap(self) -> tuple[float, float] | None:
        return _longest(self.found, self.lambdas, False)

    @property
    def longest_run(self) -> tuple[float, float] | None:
        return _longest(self.found, self.lambdas, True)

    def gaps(self) -> list[tuple[float, float]]:
        out, start = [], None
        for i, f in enumerate(self.found + [True]):
            if not f and start is None:
                start = i
            elif f and start is not None:
                out.append((self.lambdas[start], self.lambdas[i - 1]))
                start = None
        return out

    def to_csv(self, witness_files: Sequence[str] | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "found", "witness_file"])
        files = witness_files or [""] * len(self.lambdas)
        for lam, f, name in zip(self.lambdas, self.found, files):
            w.writerow([repr(float(lam)), int(f), name])
        return buf.getvalue()


def geometric_lambdas(lam_lo: float, lam_hi: float, steps: int) -> np.ndarray:
    if not (0 < lam_lo < lam_hi) or steps < 2:
        raise ValueError("need 0 < lam_lo < lam_hi and steps >= 2")
    return lam_lo * (lam_hi / lam_lo) ** (np.arange(steps) / (steps - 1))


def scan_lambda(
    A: GridSet,
    graph: DistanceGraph,
    lam_lo: float,
    lam_hi: float,
    steps: int,
    ordering: DegeneracyOrdering | None = None,
    tolerance: float | None = None,
    anchor_stride: int | None = None,
    rotation_budget: int | None = None,
    seed: int = 0,
    workers: int = 1,
    backend: str | None = None,
) -> ScanReport:
    """Run :func:`find_copy` over a geometric progression of scales."""
    ordering = ordering or degeneracy_ordering(graph)
    lams = geometric_lambdas(lam_lo, lam_hi, steps)
    found, wits = [], []
    tol = stride = None
    for lam in lams:
        q = CopyQuery(graph, float(lam), tolerance, anchor_stride, rotation_budget, ordering)
        r = q.resolved(A.cells_per_side)
        tol, stride = r.tolerance, r.anchor_stride
        emb = find_copy(A, r, seed=seed, workers=workers, backend=backend)
        found.append(emb is not None)
        wits.append(emb)
    return ScanReport([float(x) for x in lams], found, wits, float(tol), int(stride), rotation_budget)


def threshold_from_report(report: ScanReport) -> float:
    """Largest scanned scale without a copy (inf if the last one is absent)."""
    if not report.found or all(report.found):
        return 0.0
    if not report.found[-1]:
        return math.inf
    return max(lam for lam, f in zip(report.lambdas, report.found) if not f)


def threshold_estimate(A: GridSet, graph: DistanceGraph, lam_lo: float, lam_hi: float, steps: int, **kw) -> float:
    return threshold_from_report(scan_lambda(A, graph, lam_lo, lam_hi, steps, **kw))
