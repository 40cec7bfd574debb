"""Monte Carlo estimation of localized counting functions.

Every estimator draws samples in fixed-size chunks; chunk ``c`` uses the
substream ``(seed, stream, c)`` and chunk statistics are merged in chunk
order, so results do not depend on how many workers evaluate the chunks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ImproperGraph, IndexOutOfRange, InvalidGraph, ScaleViolation
from .graphs import DegeneracyOrdering, DistanceGraph, degeneracy_ordering, is_proper
from .gridset import GridFunction, GridSet, evaluate, u1_norm
from .rng import STREAM_COUNT, STREAM_PILOT, chunk_sizes, substream

CHUNK = 1 << 15
PILOT_FOLDS = 1000


@dataclass(frozen=True)
class CountingEstimate:
    value: float
    std_error: float
    samples: int
    lam: float
    seed: int

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "lambda": self.lam,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc) -> "CountingEstimate":
        return cls(float(doc["value"]), float(doc["std_error"]), int(doc["samples"]), float(doc["lambda"]), int(doc["seed"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class CutoffProfile:
    """Hard acceptance windows: vertex ``j`` counts when its sphere radius is at
    least ``r_min[j]`` and it lies within ``R_max[j]`` of the anchor.

    Arrays are indexed by ordering position; entry 0 is unused. ``accept`` is
    an optional extra predicate ``(points, radii) -> bool mask`` on unit-scale
    folds.
    """

    r_min: np.ndarray
    R_max: np.ndarray
    accept: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        r = np.asarray(self.r_min, dtype=float)
        R = np.asarray(self.R_max, dtype=float)
        if r.shape != R.shape or np.any(r < 0) or np.any(r[1:] > R[1:]):
            raise ValueError("cutoffs need 0 <= r_min <= R_max per vertex")
        object.__setattr__(self, "r_min", r)
        object.__setattr__(self, "R_max", R)

    @classmethod
    def accept_all(cls, n_vertices: int, accept=None) -> "CutoffProfile":
        return cls(np.zeros(n_vertices), np.full(n_vertices, np.inf), accept)

    def weights(self, pts: np.ndarray, radii: np.ndarray, status: np.ndarray, lo: int = 1, hi: int | None = None) -> np.ndarray:
        """Product of the windows over positions ``lo..hi-1`` (1.0 or 0.0)."""
        hi = pts.shape[1] if hi is None else hi
        ok = status == 0
        if hi > lo:
            ok &= np.all(radii[:, lo:hi] >= self.r_min[lo:hi], axis=1)
            norms = np.sqrt(np.sum(pts[:, lo:hi, :] ** 2, axis=2))
            ok &= np.all(norms <= self.R_max[lo:hi], axis=1)
        if self.accept is not None:
            ok &= np.asarray(self.accept(pts, radii), dtype=bool)
        return ok.astype(float)

    def to_json(self) -> dict:
        return {"r_min": self.r_min.tolist(), "R_max": [float(x) for x in self.R_max]}


def _pred_arrays(graph: DistanceGraph, ordering: DegeneracyOrdering):
    pos, ptr, sq = [], [0, 0], []
    for j in range(1, len(ordering.order)):
        v = ordering.order[j]
        for p in ordering.pred_positions(j):
            pos.append(p)
            sq.append(graph.sq_length(ordering.order[p], v))
        ptr.append(len(pos))
    return np.asarray(pos, dtype=np.int64), np.asarray(ptr, dtype=np.int64), np.asarray(sq, dtype=float)


def _check(graph: DistanceGraph, ordering: DegeneracyOrdering | None, check_proper: bool = True) -> DegeneracyOrdering:
    ordering = ordering or degeneracy_ordering(graph)
    if check_proper and not is_proper(graph, ordering):
        raise ImproperGraph("graph is not proper for this ordering")
    for j in range(1, len(ordering.order)):
        if not ordering.predecessors[j]:
            raise InvalidGraph(f"vertex {ordering.order[j]} has no predecessor")
    return ordering


def unit_folds(graph: DistanceGraph, ordering: DegeneracyOrdering, gauss: np.ndarray, backend: str | None = None):
    """Fold a batch at unit scale with the anchor at the origin."""
    pos, ptr, sq = _pred_arrays(graph, ordering)
    return kernels.get(backend).fold_batch(pos, ptr, sq, np.ascontiguousarray(gauss))


def default_cutoffs(graph: DistanceGraph, ordering: DegeneracyOrdering | None = None, seed: int = 0, pilot: int = PILOT_FOLDS) -> CutoffProfile:
    """Radius floor at half the smallest pilot radius; support bound at twice the diameter."""
    ordering = _check(graph, ordering, check_proper=False)
    n1, d = len(ordering.order), graph.dim
    gauss = substream(seed, STREAM_PILOT).standard_normal((pilot, n1, d))
    pts, radii, status = unit_folds(graph, ordering, gauss)
    good = radii[status == 0]
    r_min = np.zeros(n1)
    if good.shape[0]:
        r_min[1:] = 0.5 * good[:, 1:].min(axis=0)
    R_max = np.full(n1, 2.0 * graph.diameter())
    R_max[0] = np.inf
    return CutoffProfile(r_min, R_max)


# ---------------------------------------------------------------------------
# chunked reductions


@dataclass
class _Moments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        return cls(int(x.size), mu, float(np.sum((x - mu) ** 2)))

    def merge(self, o: "_Moments") -> "_Moments":
        if o.n == 0:
            return self
        if self.n == 0:
            return o
        n = self.n + o.n
        delta = o.mean - self.mean
        return _Moments(n, self.mean + delta * o.n / n, self.m2 + o.m2 + delta * delta * self.n * o.n / n)

    def estimate(self, lam: float, seed: int) -> CountingEstimate:
        se = math.sqrt(self.m2 / (self.n - 1) / self.n) if self.n > 1 else 0.0
        return CountingEstimate(float(self.mean), float(se), int(self.n), float(lam), int(seed))


def _map_chunks(fn, samples: int, chunk: int, workers: int) -> list:
    sizes = chunk_sizes(samples, chunk)
    jobs = list(enumerate(sizes))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(c, s) for c, s in jobs]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


def _reduce(parts: Sequence[_Moments]) -> _Moments:
    acc = _Moments()
    for p in parts:
        acc = acc.merge(p)
    return acc


def _as_function(f, d: int) -> GridFunction:
    if f is None:
        return GridFunction.constant(1.0, 1, d)
    if isinstance(f, GridSet):
        return f.indicator()
    if isinstance(f, GridFunction):
        return f
    return GridFunction.constant(float(f), 1, d)


# ---------------------------------------------------------------------------
# estimators


def estimate_T(
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    functions: Sequence,
    lam: float,
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    chunk: int = CHUNK,
    backend: str | None = None,
) -> CountingEstimate:
    """Estimate ``T(f_0, ..., f_n)(lam)`` by sequential folding.

    ``functions[j]`` is paired with ordering position ``j``. ``None`` stands
    for the indicator of the unit cube; a number for that constant on it.
    Arguments leaving the unit cube contribute zero.
    """
    ordering = _check(graph, ordering)
    n1, d = len(ordering.order), graph.dim
    if len(functions) != n1:
        raise ValueError(f"need {n1} functions, got {len(functions)}")
    if not (0 < lam < 1):
        raise ValueError("scale must lie in (0, 1)")
    if samples < 1:
        raise ValueError("need at least one sample")
    cutoffs = cutoffs or default_cutoffs(graph, ordering, seed)
    fs = [_as_function(f, d) for f in functions]

    def work(c: int, size: int) -> _Moments:
        rng = substream(seed, STREAM_COUNT, c)
        x = rng.random((size, d))
        gauss = rng.standard_normal((size, n1, d))
        pts, radii, status = unit_folds(graph, ordering, gauss, backend)
        val = cutoffs.weights(pts, radii, status) * evaluate(fs[0], x)
        for j in range(1, n1):
            val = val * evaluate(fs[j], x - lam * pts[:, j, :])
        return _Moments.of(val)

    return _reduce(_map_chunks(work, samples, chunk, workers)).estimate(lam, seed)


def estimate_c0(
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None = None,
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    chunk: int = CHUNK,
    backend: str | None = None,
) -> CountingEstimate:
    """Total mass of the nested sphere measures (all functions one, no translation)."""
    ordering = _check(graph, ordering)
    n1, d = len(ordering.order), graph.dim
    cutoffs = cutoffs or default_cutoffs(graph, ordering, seed)

    def work(c: int, size: int) -> _Moments:
        rng = substream(seed, STREAM_COUNT, c)
        gauss = rng.standard_normal((size, n1, d))
        pts, radii, status = unit_folds(graph, ordering, gauss, backend)
        return _Moments.of(cutoffs.weights(pts, radii, status))

    return _reduce(_map_chunks(work, samples, chunk, workers)).estimate(0.0, seed)


@dataclass
class _PhaseSums:
    """Sufficient statistics of complex phases for the global U-statistic."""

    n: int = 0
    sa: float = 0.0
    sb: float = 0.0
    saa: float = 0.0
    sbb: float = 0.0
    sab: float = 0.0

    def merge(self, o: "_PhaseSums") -> "_PhaseSums":
        return _PhaseSums(self.n + o.n, self.sa + o.sa, self.sb + o.sb, self.saa + o.saa, self.sbb + o.sbb, self.sab + o.sab)

    def estimate(self, seed: int) -> CountingEstimate:
        K = self.n
        if K < 2:
            return CountingEstimate(0.0, 0.0, K, 0.0, seed)
        sq = self.sa * self.sa + self.sb * self.sb
        u = (sq - (self.saa + self.sbb)) / (K * (K - 1))
        p, q = self.sa / K, self.sb / K
        va = self.saa / K - p * p
        vb = self.sbb / K - q * q
        cab = self.sab / K - p * q
        zeta1 = p * p * va + q * q * vb + 2 * p * q * cab
        s2 = va + vb
        var = 4 * max(zeta1, 0.0) / K + s2 * s2 / (K * (K - 1))
        return CountingEstimate(float(u), float(math.sqrt(var)), K, 0.0, seed)


def estimate_I(
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    m: int,
    xi: Sequence[float],
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    inner: int = 2,
    mode: str = "auto",
    chunk: int = CHUNK,
    backend: str | None = None,
) -> CountingEstimate:
    """Estimate the averaged squared Fourier transform of the ``m``-th sphere measure.

    The measure at position ``m`` is weighted by the mass of its continuation
    over positions ``m+1..n`` (a continued fold inside the same sample).
    ``mode='pairs'`` draws ``inner`` independent continuations per outer
    sample and averages ``Re(z_k conj(z_l))`` over distinct pairs.
    ``mode='global'`` (the default for ``m = 1``, where nothing precedes the
    sphere) treats all samples as one group, the same unbiased U-statistic.
    """
    ordering = _check(graph, ordering)
    n1, d = len(ordering.order), graph.dim
    if not 1 <= m <= n1 - 1:
        raise IndexOutOfRange(f"m must lie in 1..{n1 - 1}")
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (d,):
        raise ValueError("frequency must have the graph's dimension")
    if mode == "auto":
        mode = "global" if m == 1 else "pairs"
    if mode not in ("global", "pairs"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "global" and m != 1:
        raise ValueError("the global U-statistic needs a sphere with no outer variables (m = 1)")
    if inner < 2:
        raise ValueError("need at least two inner draws")
    cutoffs = cutoffs or default_cutoffs(graph, ordering, seed)

    def phases(pts, radii, status):
        w = cutoffs.weights(pts, radii, status, lo=m)
        ang = -2 * np.pi * (pts[:, m, :] @ xi)
        return w * np.cos(ang), w * np.sin(ang)

    if mode == "global":

        def work_g(c: int, size: int) -> _PhaseSums:
            rng = substream(seed, STREAM_COUNT, c)
            gauss = rng.standard_normal((size, n1, d))
            a, b = phases(*unit_folds(graph, ordering, gauss, backend))
            return _PhaseSums(size, float(a.sum()), float(b.sum()), float(a @ a), float(b @ b), float(a @ b))

        acc = _PhaseSums()
        for part in _map_chunks(work_g, samples, chunk, workers):
            acc = acc.merge(part)
        est = acc.estimate(seed)
        return CountingEstimate(est.value, est.std_error, est.samples, 0.0, seed)

    outer_chunk = max(1, chunk // inner)

    def work_p(c: int, size: int) -> _Moments:
        rng = substream(seed, STREAM_COUNT, c)
        outer = rng.standard_normal((size, m, d))
        cont = rng.standard_normal((size, inner, n1 - m, d))
        gauss = np.concatenate([np.repeat(outer[:, None], inner, axis=1), cont], axis=2)
        pts, radii, status = unit_folds(graph, ordering, gauss.reshape(size * inner, n1, d), backend)
        # outer failures zero every inner phase, so the outer window ignores status
        w_out = cutoffs.weights(pts, radii, np.zeros_like(status), lo=1, hi=m).reshape(size, inner)[:, 0]
        a, b = phases(pts, radii, status)
        a, b = a.reshape(size, inner), b.reshape(size, inner)
        sa, sb = a.sum(axis=1), b.sum(axis=1)
        u = (sa * sa + sb * sb - np.sum(a * a + b * b, axis=1)) / (inner * (inner - 1))
        return _Moments.of(w_out * u)

    return _reduce(_map_chunks(work_p, samples, outer_chunk, workers)).estimate(0.0, seed)


# ---------------------------------------------------------------------------
# inequality checks


@dataclass(frozen=True)
class GvNReport:
    lhs: float
    rhs: float
    slack: float
    std_error: float
    estimate: CountingEstimate

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "std_error": self.std_error, "estimate": self.estimate.to_json()}


def gvn_check(
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    functions: Sequence,
    lam: float,
    L: float,
    eps: float,
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    enforce_scale: bool = True,
    backend: str | None = None,
) -> GvNReport:
    """Compare ``|T(f_0, ..., f_m, 1, ..., 1)|`` with ``||f_m||_{U^1(L)}``.

    ``functions`` lists ``f_0..f_m``; later positions are filled with the
    indicator of the unit cube.
    """
    if enforce_scale and L > eps**6 * lam * (1 + 1e-12):
        raise ScaleViolation(f"window {L} exceeds eps^6 * lambda = {eps**6 * lam}")
    ordering = ordering or degeneracy_ordering(graph)
    n1 = len(ordering.order)
    if not 1 <= len(functions) <= n1:
        raise IndexOutOfRange("need between 1 and n+1 functions")
    fm = _as_function(functions[-1], graph.dim)
    full = list(functions) + [None] * (n1 - len(functions))
    if np.all(fm.values == 0):
        est = CountingEstimate(0.0, 0.0, samples, float(lam), int(seed))
        return GvNReport(0.0, 0.0, 0.0, 0.0, est)
    est = estimate_T(graph, ordering, full, lam, cutoffs, samples, seed, workers, backend=backend)
    rhs = u1_norm(fm, L)
    lhs = abs(est.value)
    return GvNReport(lhs, rhs, lhs - rhs, est.std_error, est)


@dataclass(frozen=True)
class CorollaryReport:
    status: str
    u1: float
    eps: float
    window: float
    T: CountingEstimate
    c0: CountingEstimate
    alpha_power: float
    bound_holds: bool

    @property
    def hypothesis_met(self) -> bool:
        return self.u1 <= self.eps

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "u1": self.u1,
            "eps": self.eps,
            "window": self.window,
            "hypothesis_met": self.hypothesis_met,
            "T": self.T.to_json(),
            "c0": self.c0.to_json(),
            "alpha_power": self.alpha_power,
            "bound": 0.5 * self.c0.value * self.alpha_power,
            "bound_holds": self.bound_holds,
        }


def corollary_lower_bound_check(
    A: GridSet,
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    lam: float,
    eps: float,
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    backend: str | None = None,
) -> CorollaryReport:
    """Check ``T(1_A, ..., 1_A)(lam) >= (c0/2) alpha^(n+1)`` under the uniformity hypothesis.

    ``status`` is ``"ok"``, ``"bound-failed"`` or ``"hypothesis-not-met"``;
    the estimates are reported in every case.
    """
    ordering = _check(graph, ordering)
    n1 = len(ordering.order)
    cutoffs = cutoffs or default_cutoffs(graph, ordering, seed)
    window = eps**6 * lam
    u = u1_norm(A.balanced(), window)
    T = estimate_T(graph, ordering, [A] * n1, lam, cutoffs, samples, seed, workers, backend=backend)
    c0 = estimate_c0(graph, ordering, cutoffs, samples, seed, workers, backend=backend)
    ap = A.density**n1
    holds = T.value >= 0.5 * c0.value * ap - 3 * T.std_error
    if u > eps:
        status = "hypothesis-not-met"
    else:
        status = "ok" if holds else "bound-failed"
    return CorollaryReport(status, float(u), float(eps), float(window), T, c0, float(ap), bool(holds))
