"""Discretised subsets of [0,1]^d and piecewise-constant functions on them.

Cell ``(i_1, ..., i_d)`` of an ``N^d`` grid stands for the cube
``prod [i_m/N, (i_m+1)/N)``. Arrays are indexed ``[i_1, ..., i_d]`` and
flattened in C order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import InvalidDescriptor, KernelTooFine, ScaleTooFine, WindowTooFine
from .rng import STREAM_SET, substream


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim < 1 or len(set(v.shape)) != 1:
            raise ValueError("grid functions live on a cubical N^d grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def cells_per_side(self) -> int:
        return self.values.shape[0]

    def __add__(self, other):
        return GridFunction(self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.values - _vals(other))

    def __mul__(self, other):
        return GridFunction(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values)

    def integral(self) -> float:
        return float(self.values.sum() / self.values.size)

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) / self.values.size))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return evaluate(self, points)

    @classmethod
    def constant(cls, c: float, N: int, d: int) -> "GridFunction":
        return cls(np.full((N,) * d, float(c)))


def _vals(x):
    return x.values if isinstance(x, GridFunction) else x


@dataclass(frozen=True, eq=False)
class GridSet:
    membership: np.ndarray

    def __post_init__(self):
        m = np.array(self.membership, dtype=bool)
        if m.ndim < 1 or len(set(m.shape)) != 1:
            raise ValueError("grid sets live on a cubical N^d grid")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @property
    def dim(self) -> int:
        return self.membership.ndim

    @property
    def cells_per_side(self) -> int:
        return self.membership.shape[0]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.membership))

    @property
    def density(self) -> float:
        return self.count / self.membership.size

    def indicator(self) -> GridFunction:
        return GridFunction(self.membership.astype(float))

    def balanced(self) -> GridFunction:
        """``1_A - alpha`` on the unit cube (zero outside it)."""
        return GridFunction(self.membership.astype(float) - self.density)

    def __eq__(self, other):
        return isinstance(other, GridSet) and np.array_equal(self.membership, other.membership)

    def __hash__(self):
        return hash(self.membership.tobytes())

    def subcube(self, origin: tuple[int, ...], side: int) -> "GridSet":
        sl = tuple(slice(o, o + side) for o in origin)
        return GridSet(self.membership[sl])


def evaluate(f: GridFunction, points: np.ndarray) -> np.ndarray:
    """Value of the piecewise-constant function at points; zero off [0,1)^d."""
    pts = np.asarray(points, dtype=float)
    N = f.cells_per_side
    idx = np.floor(pts * N).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < N), axis=-1)
    out = np.zeros(pts.shape[:-1])
    sel = idx[inside]
    out[inside] = f.values[tuple(sel.T)]
    return out


# ---------------------------------------------------------------------------
# U^1(L)


def _overlap_matrix(base: np.ndarray, off: np.ndarray, L: float, N: int) -> np.ndarray:
    """``O[k, a]`` = length of ``[t_k - L/2, t_k + L/2]`` inside cell ``a``.

    Window centres are ``base*h + off`` with small offsets so that overlaps
    near the window edges are formed from small numbers.
    """
    h = 1.0 / N
    lo = ((base[:, None] - np.arange(N)[None, :]) * h + off[:, None]) - L / 2
    return np.maximum(0.0, np.minimum(lo + L, h) - np.maximum(lo, 0.0))


def _simpson_nodes(L: float, N: int, interior: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes and weights integrating piecewise quadratics in the window centre exactly.

    Breakpoints are ``k/N +- L/2``; written as ``base/N + off`` they share
    the offsets ``{0, r, h - r}`` in every cell, with ``L/2 = q h + r``.
    """
    h = 1.0 / N
    q = math.floor(L / 2 * N)
    r = L / 2 - q * h
    if r >= h:
        q, r = q + 1, r - h
    offs = np.unique(np.array([0.0, r, h - r if r > 0 else 0.0]))
    offs = offs[offs < h]
    if interior:
        start, stop = (q, r), (N - q - 1, h - r) if r > 0 else (N - q, 0.0)
    else:
        start, stop = (-q - 1, h - r) if r > 0 else (-q, 0.0), (N + q, r)
    base = np.repeat(np.arange(start[0], stop[0] + 1), offs.size)
    off = np.tile(offs, stop[0] - start[0] + 1)
    keep = ((base > start[0]) | (off >= start[1])) & ((base < stop[0]) | (off <= stop[1]))
    base, off = base[keep], off[keep]
    widths = np.diff(base) * h + np.diff(off)
    mid_off = off[:-1] + widths / 2
    nodes_b = np.concatenate([base, base[:-1]])
    nodes_o = np.concatenate([off, mid_off])
    weights = np.zeros(nodes_b.size)
    nb = base.size
    weights[: nb - 1] += widths / 6
    weights[1:nb] += widths / 6
    weights[nb:] = 4 * widths / 6
    return nodes_b, nodes_o, weights


def u1_norm(f: GridFunction, L: float, boundary: str = "zero") -> float:
    """``|| f * phi_L ||_2`` for the normalised box kernel of side ``L``.

    The window average is piecewise multilinear in the window centre, so the
    squared norm is integrated exactly with a tensor Simpson rule on the
    breakpoints. ``boundary='zero'`` integrates over all of R^d with ``f``
    extended by zero; ``'interior'`` keeps only windows inside [0,1]^d.
    """
    if not (L > 0 and math.isfinite(L)):
        raise KernelTooFine(f"window side must be positive, got {L}")
    N, d = f.cells_per_side, f.dim
    if boundary not in ("zero", "interior"):
        raise ValueError(f"unknown boundary convention {boundary!r}")
    if boundary == "interior" and L > 1:
        raise KernelTooFine("interior windows need L <= 1")
    base, off, weights = _simpson_nodes(L, N, boundary == "interior")
    op = _overlap_matrix(base, off, L, N)
    # contract axes 2..d, then stream over the first axis in slabs
    x = f.values
    for axis in range(d - 1, 0, -1):
        x = np.tensordot(x, op, axes=([axis], [1]))
        x = np.moveaxis(x, -1, axis)
    wt = np.ones(())
    for _ in range(d - 1):
        wt = np.multiply.outer(wt, weights)
    total = 0.0
    rest = x.reshape(N, -1)
    slab = max(1, int(4_000_000 // max(rest.shape[1], 1)))
    for s in range(0, weights.size, slab):
        w = op[s : s + slab] @ rest
        total += float(np.sum(weights[s : s + slab, None] * (w * w) * wt.reshape(1, -1)))
    return math.sqrt(max(total, 0.0)) / L**d


# ---------------------------------------------------------------------------
# windowed densities


def box_counts(A: GridSet, m: int) -> np.ndarray:
    """Member counts of every interior ``m^d`` window, indexed by lower corner."""
    N, d = A.cells_per_side, A.dim
    P = np.zeros((N + 1,) * d, dtype=np.int64)
    P[(slice(1, None),) * d] = A.membership.astype(np.int64)
    for axis in range(d):
        np.cumsum(P, axis=axis, out=P)
    out = np.zeros((N - m + 1,) * d, dtype=np.int64)
    for corner in np.ndindex(*(2,) * d):
        sl = tuple(slice(m, None) if c else slice(0, N - m + 1) for c in corner)
        sign = (-1) ** (d - sum(corner))
        out += sign * P[sl]
    return out


def windowed_density_extremes(A: GridSet, M: float) -> tuple[float, float, tuple[float, ...]]:
    """Extremes of ``|A ∩ (t + Q_M)| / |Q_M|`` over grid-aligned interior windows.

    Returns ``(min, max, argmax)`` with ``argmax`` the lower corner of a
    maximising window.
    """
    N = A.cells_per_side
    m = int(round(M * N))
    if m < 1 or M * N < 1 - 1e-9:
        raise WindowTooFine(f"window side {M} is below one cell (1/{N})")
    if m > N:
        raise WindowTooFine("window larger than the unit cube")
    counts = box_counts(A, m)
    dens = counts / float(m**A.dim)
    k = np.unravel_index(int(np.argmax(dens)), dens.shape)
    return float(dens.min()), float(dens.max()), tuple(float(i) / N for i in k)


# ---------------------------------------------------------------------------
# generators


def cell_centers(N: int, d: int) -> np.ndarray:
    c = (np.arange(N) + 0.5) / N
    grids = np.meshgrid(*([c] * d), indexing="ij")
    return np.stack(grids, axis=-1)


def generate(desc: Mapping[str, Any], N: int | None = None, d: int | None = None, seed: int = 0) -> GridSet:
    """Build a grid set from a descriptor.

    ``kind`` is one of iid, ball_lattice, annuli, halfspace, checkerboard,
    stripes, full, empty, from_file. ``N`` and ``d`` may also be given in the
    descriptor.
    """
    if not isinstance(desc, Mapping) or "kind" not in desc:
        raise InvalidDescriptor("set descriptor needs a 'kind'")
    kind = desc["kind"]
    if kind == "from_file":
        return read_gridset(desc["path"])
    N = int(desc.get("N", N or 0))
    d = int(desc.get("d", d or 0))
    if N < 1 or d < 1:
        raise InvalidDescriptor("set descriptor needs positive N and d")
    try:
        if kind == "iid":
            alpha = float(desc["alpha"])
            if not 0 <= alpha <= 1:
                raise InvalidDescriptor("alpha must lie in [0, 1]")
            rng = substream(int(desc.get("seed", seed)), STREAM_SET)
            return GridSet(rng.random((N,) * d) < alpha)
        if kind in ("full", "empty"):
            return GridSet(np.full((N,) * d, kind == "full"))
        x = cell_centers(N, d)
        if kind == "ball_lattice":
            s, rho = float(desc["spacing"]), float(desc["radius"])
            if not (s > 0 and rho > 0):
                raise InvalidDescriptor("spacing and radius must be positive")
            kmax = math.floor(1 / s + 1e-9)
            nearest = np.clip(np.round(x / s), 0, kmax) * s
            return GridSet(np.sum((x - nearest) ** 2, axis=-1) <= rho * rho)
        if kind == "annuli":
            delta, scale = float(desc["thickness"]), float(desc["scale"])
            v = np.sum(x * x, axis=-1) * scale
            return GridSet(np.abs(v - np.round(v)) < delta)
        if kind == "halfspace":
            axis = int(desc.get("axis", 0))
            return GridSet(x[..., axis] < 0.5)
        if kind == "checkerboard":
            p = float(desc["period"])
            parity = np.sum(np.floor(x / p + 1e-12).astype(np.int64), axis=-1)
            return GridSet(parity % 2 == 0)
        if kind == "stripes":
            p = float(desc["period"])
            axis = int(desc.get("axis", 0))
            return GridSet(np.floor(2 * x[..., axis] / p + 1e-12).astype(np.int64) % 2 == 0)
    except KeyError as exc:
        raise InvalidDescriptor(f"{kind} descriptor is missing {exc}") from exc
    raise InvalidDescriptor(f"unknown set kind {kind!r}")


# ---------------------------------------------------------------------------
# spectral diagnostics


def spectrum(A: GridSet | GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """Normalised DFT coefficients and their integer frequency radii.

    Coefficients are ``fftn(values) / N^d`` so that their squared moduli sum
    to the squared L^2 norm on the unit cube.
    """
    vals = A.membership.astype(float) if isinstance(A, GridSet) else A.values
    N, d = vals.shape[0], vals.ndim
    coef = np.fft.fftn(vals) / vals.size
    k = np.fft.fftfreq(N, 1.0 / N)
    grids = np.meshgrid(*([k] * d), indexing="ij")
    radius = np.sqrt(sum(g * g for g in grids))
    return coef, radius


def spectrum_annulus_mass(A: GridSet | GridFunction, r_lo: float, r_hi: float) -> float:
    """Spectral mass over frequencies with ``r_lo <= |xi| <= r_hi``."""
    if not (0 <= r_lo < r_hi):
        raise ValueError("annulus needs 0 <= r_lo < r_hi")
    coef, radius = spectrum(A)
    sel = (radius >= r_lo) & (radius <= r_hi)
    return float(np.sum(np.abs(coef[sel]) ** 2))


def kernel_hat(eta: np.ndarray, d: int) -> np.ndarray:
    """Fourier transform of the smoothing kernel; supported in ``|eta| <= 1``.

    A product of squared Fejér tents compressed by ``sqrt(d)`` so the support
    cube fits inside the unit ball.
    """
    a = math.sqrt(d)
    eta = np.asarray(eta, dtype=float)
    return np.prod(np.maximum(0.0, 1.0 - a * np.abs(eta)) ** 2, axis=-1)


@dataclass(frozen=True)
class Smoothing:
    g: GridFunction
    scale: float
    mass: float
    fourier_constant: float


def smooth_bandlimited(f: GridFunction, t: float) -> Smoothing:
    """Periodic convolution of ``f`` with the kernel dilated to scale ``t``.

    ``fourier_constant`` is the measured ``C`` in
    ``|1 - psi_hat(t xi)| <= C min(1, t|xi|)`` over the grid's frequencies.
    """
    N, d = f.cells_per_side, f.dim
    if not t >= 2.0 / N:
        raise ScaleTooFine(f"smoothing scale {t} is below two cells")
    k = np.fft.fftfreq(N, 1.0 / N)
    grids = np.meshgrid(*([k] * d), indexing="ij")
    xi = np.stack(grids, axis=-1)
    mult = kernel_hat(t * xi, d)
    g = np.real(np.fft.ifftn(np.fft.fftn(f.values) * mult))
    rad = np.sqrt(np.sum(xi * xi, axis=-1))
    nz = rad > 0
    ratio = np.abs(1.0 - mult[nz]) / np.minimum(1.0, t * rad[nz])
    const = float(ratio.max()) if ratio.size else 0.0
    return Smoothing(GridFunction(g), float(t), float(kernel_hat(np.zeros(d), d)), const)


def kernel_profile(x: np.ndarray, d: int) -> np.ndarray:
    """One-dimensional factor of the physical-space kernel, by quadrature."""
    a = math.sqrt(d)
    eta = np.linspace(0.0, 1.0 / a, 4097)
    hat = (1.0 - a * eta) ** 2
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = 2 * np.cos(2 * np.pi * np.outer(x, eta)) * hat
    return np.trapezoid(vals, eta, axis=1)


# ---------------------------------------------------------------------------
# DGS1 file format


def _runs(flat: np.ndarray) -> list[int]:
    """Alternating run lengths starting with a (possibly empty) run of zeros."""
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return runs


def dumps_gridset(A: GridSet) -> str:
    runs = _runs(A.membership.ravel())
    lines = [f"DGS1 {A.dim} {A.cells_per_side} {A.density!r}"]
    for i in range(0, len(runs), 32):
        lines.append(" ".join(str(r) for r in runs[i : i + 32]))
    return "\n".join(lines) + "\n"


def loads_gridset(text: str) -> GridSet:
    lines = text.split("\n")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "DGS1":
        raise InvalidDescriptor("not a DGS1 grid-set file")
    d, N, density = int(head[1]), int(head[2]), float(head[3])
    runs = [int(tok) for line in lines[1:] for tok in line.split()]
    if any(r < 0 for r in runs) or sum(runs) != N**d:
        raise InvalidDescriptor("run lengths do not cover the grid")
    vals = np.zeros(len(runs), dtype=bool)
    vals[1::2] = True
    flat = np.repeat(vals, runs)
    A = GridSet(flat.reshape((N,) * d))
    if A.density != density:
        raise InvalidDescriptor(f"header density {density!r} disagrees with the bitmask ({A.density!r})")
    return A


def write_gridset(A: GridSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_gridset(A))


def read_gridset(path) -> GridSet:
    with open(path) as fh:
        return loads_gridset(fh.read())
