"""Energy-increment localization over nested cube partitions.

Scales are stored by their reciprocals ``n_j = 1/L_j`` (integers), so every
divisibility and compatibility test is exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .counting import CountingEstimate, CutoffProfile, default_cutoffs, estimate_c0, estimate_T
from .errors import ChainExhausted, IncompatibleScale, LambdaOutsideWindow
from .graphs import DegeneracyOrdering, DistanceGraph, degeneracy_ordering
from .gridset import GridFunction, GridSet, box_counts


def _cells_per_cube(N: int, inverse: int) -> int:
    if inverse < 1 or N % inverse:
        raise IncompatibleScale(f"1/{inverse} is not a union of cells of the 1/{N} grid")
    return N // inverse


def _as_inverse(L) -> int:
    """``1/L`` as an integer; ``L`` may be a float, Fraction or int."""
    frac = Fraction(L) if isinstance(L, (int, Fraction)) else Fraction(float(L)).limit_denominator(1 << 40)
    if frac <= 0 or (1 / frac).denominator != 1:
        raise IncompatibleScale(f"scale {L} is not the reciprocal of an integer")
    return int(1 / frac)


@dataclass(frozen=True)
class ScaleChain:
    """Decreasing scales ``L_j = 1/inverses[j]`` with ``L_{j+1} | L_j``.

    Divisibility is enforced; the ratio, length and first-scale conditions
    of the localization lemma are only recorded in :attr:`violations`.
    """

    eps: float
    inverses: tuple[int, ...]
    c: float = 1.0
    C: float = 8.0
    violations: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        inv = tuple(int(x) for x in self.inverses)
        if len(inv) < 2:
            raise IncompatibleScale("a chain needs at least two scales")
        for a, b in zip(inv, inv[1:]):
            if b <= a or b % a:
                raise IncompatibleScale(f"1/{b} does not refine 1/{a}")
        object.__setattr__(self, "inverses", inv)
        v = []
        e7 = self.eps**7
        if 1 / inv[0] > e7 / 2:
            v.append(f"L_1 = 1/{inv[0]} exceeds eps^7/2")
        for j, (a, b) in enumerate(zip(inv, inv[1:]), start=1):
            if a / b > self.c * e7:
                v.append(f"L_{j + 1}/L_{j} = {a}/{b} exceeds c*eps^7")
        if len(inv) < self.C * self.eps**-2 + 2:
            v.append(f"length {len(inv)} is below C*eps^-2 + 2")
        object.__setattr__(self, "violations", tuple(v))

    @classmethod
    def from_scales(cls, eps: float, scales: Sequence, **kw) -> "ScaleChain":
        return cls(eps, tuple(_as_inverse(L) for L in scales), **kw)

    @property
    def scales(self) -> list[float]:
        return [1 / n for n in self.inverses]

    @property
    def level_bound(self) -> float:
        return self.C * self.eps**-2

    def check_grid(self, N: int) -> None:
        for n in self.inverses:
            _cells_per_cube(N, n)


def _block_counts(A: GridSet, m: int) -> np.ndarray:
    N, d = A.cells_per_side, A.dim
    k = N // m
    shape = []
    for _ in range(d):
        shape += [k, m]
    x = A.membership.astype(np.int64).reshape(shape)
    return x.sum(axis=tuple(range(1, 2 * d, 2)))


def conditional_expectation(A: GridSet, L) -> GridFunction:
    """Cube averages of ``1_A`` on the partition into cubes of side ``L``."""
    N, d = A.cells_per_side, A.dim
    m = _cells_per_cube(N, _as_inverse(L))
    avg = _block_counts(A, m) / float(m**d)
    for axis in range(d):
        avg = np.repeat(avg, m, axis=axis)
    return GridFunction(avg)


def energy(A: GridSet, L) -> float:
    """Squared L^2 norm of the conditional expectation, from integer counts."""
    N, d = A.cells_per_side, A.dim
    m = _cells_per_cube(N, _as_inverse(L))
    counts = _block_counts(A, m)
    s = int(np.sum(counts.astype(object) ** 2))
    return float(Fraction(s, m**d * N**d))


def _mass_apply(g: np.ndarray, axis: int) -> np.ndarray:
    """Apply the 1-D P1 mass matrix (unit spacing) along ``axis``."""
    g = np.moveaxis(g, axis, -1)
    out = np.empty_like(g)
    n = g.shape[-1]
    if n == 1:
        out[...] = 0.0
        return np.moveaxis(out, -1, axis)
    out[...] = (2.0 / 3.0) * g
    out[..., 0] = g[..., 0] / 3.0
    out[..., -1] = g[..., -1] / 3.0
    out[..., :-1] += g[..., 1:] / 6.0
    out[..., 1:] += g[..., :-1] / 6.0
    return np.moveaxis(out, -1, axis)


def cube_deviations(A: GridSet, cube_inverse: int, window_inverse: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cube densities and window deviations.

    For each cube ``Q`` of side ``1/cube_inverse``, the deviation is the mean
    over window positions (windows of side ``1/window_inverse`` inside ``Q``)
    of ``(|A ∩ window| / |window| - alpha_Q)^2``. The window density is
    multilinear between grid-aligned positions, so the mean is exact.
    """
    N, d = A.cells_per_side, A.dim
    m = _cells_per_cube(N, cube_inverse)
    w = _cells_per_cube(N, window_inverse)
    if w > m:
        raise IncompatibleScale("window is larger than the cube")
    k = N // m
    dens = _block_counts(A, m) / float(m**d)
    if w == m:
        return dens, np.zeros_like(dens)
    B = box_counts(A, w) / float(w**d)
    p = m - w + 1
    base = (np.arange(k) * m)[:, None] + np.arange(p)[None, :]
    index = []
    for axis in range(d):
        shape = [1] * (2 * d)
        shape[axis], shape[d + axis] = k, p
        index.append(base.reshape(shape))
    g = B[tuple(index)] - dens.reshape(dens.shape + (1,) * d)
    mg = g
    for axis in range(d, 2 * d):
        mg = _mass_apply(mg, axis)
    quad = np.sum(g * mg, axis=tuple(range(d, 2 * d)))
    return dens, quad / float((m - w) ** d)


@dataclass
class LocalizationResult:
    chosen_level: int
    scale_inverse: int
    window_inverse: int
    eps: float
    uniform_cubes: list[tuple[int, ...]]
    exceptional_cubes: list[tuple[int, ...]]
    per_cube_density: dict[tuple[int, ...], float]
    per_cube_deviation: dict[tuple[int, ...], float]
    trace: list[tuple[int, float, float]]

    @property
    def scale(self) -> float:
        return 1 / self.scale_inverse

    def origin(self, cube: tuple[int, ...]) -> tuple[float, ...]:
        return tuple(i / self.scale_inverse for i in cube)

    def to_json(self) -> dict:
        cubes = sorted(self.per_cube_density)
        return {
            "chosen_level": self.chosen_level,
            "scale": self.scale,
            "scale_inverse": self.scale_inverse,
            "window_inverse": self.window_inverse,
            "eps": self.eps,
            "uniform_cubes": [list(c) for c in self.uniform_cubes],
            "exceptional_cubes": [list(c) for c in self.exceptional_cubes],
            "cubes": [
                {"cube": list(c), "origin": list(self.origin(c)), "density": self.per_cube_density[c], "deviation": self.per_cube_deviation[c]}
                for c in cubes
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc) -> "LocalizationResult":
        dens = {tuple(e["cube"]): float(e["density"]) for e in doc["cubes"]}
        dev = {tuple(e["cube"]): float(e["deviation"]) for e in doc["cubes"]}
        return cls(
            int(doc["chosen_level"]),
            int(doc["scale_inverse"]),
            int(doc["window_inverse"]),
            float(doc["eps"]),
            [tuple(c) for c in doc["uniform_cubes"]],
            [tuple(c) for c in doc["exceptional_cubes"]],
            dens,
            dev,
            [],
        )

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "energy", "exceptional_fraction"])
        for level, en, frac in self.trace:
            w.writerow([level, repr(en), repr(frac)])
        return buf.getvalue()


def find_uniform_scale(A: GridSet, chain: ScaleChain) -> LocalizationResult:
    """Descend the chain until at most ``eps * L_j^-d`` cubes are non-uniform."""
    N, d = A.cells_per_side, A.dim
    chain.check_grid(N)
    trace = []
    for j in range(1, len(chain.inverses)):
        inv, winv = chain.inverses[j - 1], chain.inverses[j]
        dens, dev = cube_deviations(A, inv, winv)
        bad = dev > chain.eps
        n_cubes = inv**d
        trace.append((j, energy(A, Fraction(1, inv)), float(np.count_nonzero(bad)) / n_cubes))
        if np.count_nonzero(bad) <= chain.eps * n_cubes:
            cubes = [tuple(int(i) for i in c) for c in np.ndindex(*dens.shape)]
            return LocalizationResult(
                j,
                inv,
                winv,
                float(chain.eps),
                [c for c in cubes if not bad[c]],
                [c for c in cubes if bad[c]],
                {c: float(dens[c]) for c in cubes},
                {c: float(dev[c]) for c in cubes},
                trace,
            )
    raise ChainExhausted(f"no level among {len(chain.inverses) - 1} met the uniformity bound")


# ---------------------------------------------------------------------------
# aggregation


def holder_chain(densities: Sequence, scale_d, power: int) -> tuple[Fraction, Fraction, bool]:
    """Exact check of ``L^d sum a_i^p >= (L^d sum a_i)^p`` in rational arithmetic.

    ``scale_d`` is the cube volume ``L^d`` and the number of densities must
    not exceed ``1/L^d``.
    """
    w = Fraction(scale_d)
    a = [Fraction(x) for x in densities]
    if len(a) * w > 1:
        raise ValueError("more cubes than the partition holds")
    lhs = w * sum(x**power for x in a)
    rhs = (w * sum(a)) ** power
    return lhs, rhs, lhs >= rhs


@dataclass
class AggregateReport:
    total: float
    total_std_error: float
    middle: float
    right: float
    c0: CountingEstimate
    first_holds: bool
    second_holds: bool
    per_cube: dict[tuple[int, ...], CountingEstimate]
    in_window: bool

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "total_std_error": self.total_std_error,
            "middle": self.middle,
            "right": self.right,
            "c0": self.c0.to_json(),
            "first_holds": self.first_holds,
            "second_holds": self.second_holds,
            "in_window": self.in_window,
            "cubes": [{"cube": list(c), **e.to_json()} for c, e in sorted(self.per_cube.items())],
        }


def _cube_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(97, index)).generate_state(1, np.uint64)[0])


def aggregate_counts(
    A: GridSet,
    result: LocalizationResult,
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    lam: float,
    cutoffs: CutoffProfile | None = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    enforce_window: bool = True,
) -> AggregateReport:
    """Sum rescaled per-cube counts over the uniform cubes and compare with the
    two lower bounds ``(c0/4) L^d sum a_i^(n+1)`` and ``(c0/4) (L^d sum a_i)^(n+1)``.
    """
    eps, L, Lw = result.eps, result.scale, 1 / result.window_inverse
    in_window = eps**-6 * Lw < lam < eps * L
    if enforce_window and not in_window:
        raise LambdaOutsideWindow(f"lambda {lam} outside ({eps**-6 * Lw}, {eps * L})")
    ordering = ordering or degeneracy_ordering(graph)
    n1, d = len(ordering.order), A.dim
    cutoffs = cutoffs or default_cutoffs(graph, ordering, seed)
    m = A.cells_per_side // result.scale_inverse
    vol = L**d
    per = {}
    total, var = 0.0, 0.0
    for i, cube in enumerate(sorted(result.uniform_cubes)):
        sub = A.subcube(tuple(c * m for c in cube), m)
        est = estimate_T(graph, ordering, [sub] * n1, lam / L, cutoffs, samples, _cube_seed(seed, i), workers)
        per[cube] = est
        total += vol * est.value
        var += (vol * est.std_error) ** 2
    c0 = estimate_c0(graph, ordering, cutoffs, samples, seed, workers)
    dens = [result.per_cube_density[c] for c in sorted(result.uniform_cubes)]
    sum_pow = sum(Fraction(a) ** n1 for a in dens)
    sum_lin = sum(Fraction(a) for a in dens)
    middle = c0.value / 4 * float(Fraction(vol) * sum_pow) if dens else 0.0
    right = c0.value / 4 * float((Fraction(vol) * sum_lin) ** n1) if dens else 0.0
    se = math.sqrt(var)
    _, _, hold2 = holder_chain(dens, Fraction(1, result.scale_inverse**d), n1)
    return AggregateReport(total, se, middle, right, c0, total >= middle - 3 * se, hold2, per, in_window)
