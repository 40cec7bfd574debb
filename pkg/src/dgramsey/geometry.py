"""Configuration spheres, the Gram radius formula and graph folding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    DegenerateBase,
    DegenerateConstraints,
    EmptySphere,
    FoldInfeasible,
    InvalidGraph,
    ToleranceNonpositive,
)
from .graphs import DegeneracyOrdering, DistanceGraph, degeneracy_ordering

TANGENCY_SLACK = 1e-12
DEPENDENCE_TOL = 1e-10


def gram_schmidt(rows: np.ndarray, tol: float = DEPENDENCE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormalise ``rows`` with one re-orthogonalisation pass.

    Returns ``(Q, R)`` with ``rows[i] = sum_k R[i, k] Q[k]`` and ``R`` lower
    triangular. Raises DegenerateConstraints on (numerical) dependence.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m, d = rows.shape
    q = np.zeros((m, d))
    r = np.zeros((m, m))
    for i in range(m):
        w = rows[i].copy()
        size = np.linalg.norm(w)
        for _ in range(2):
            for k in range(i):
                c = q[k] @ w
                r[i, k] += c
                w -= c * q[k]
        nw = np.linalg.norm(w)
        if size == 0.0 or nw <= tol * size:
            raise DegenerateConstraints("constraint points are affinely dependent")
        r[i, i] = nw
        q[i] = w / nw
    return q, r


def complement_basis(q: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the rows of ``q``."""
    q = np.asarray(q, dtype=float).reshape(-1, d)
    basis = list(q)
    out = []
    eye = np.eye(d)
    for _ in range(d - len(q)):
        best, best_norm = None, -1.0
        for e in eye:
            w = e.copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            nw = np.linalg.norm(w)
            if nw > best_norm:
                best, best_norm = w, nw
        v = best / best_norm
        basis.append(v)
        out.append(v)
    return np.array(out).reshape(-1, d)


@dataclass(frozen=True)
class SphereSection:
    """Sphere ``center + radius * S(W)`` with ``W`` spanned by ``flat_basis``."""

    center: np.ndarray
    radius: float
    flat_basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def sphere_dim(self) -> int:
        return self.flat_basis.shape[0] - 1

    def point(self, direction: np.ndarray) -> np.ndarray:
        """Point for a unit coefficient vector in the flat basis."""
        return self.center + self.radius * (np.asarray(direction) @ self.flat_basis)


def solution_sphere(constraints: Sequence[tuple[Sequence[float], float]], dim: int) -> SphereSection:
    """Solve ``|x - x_i|^2 = t_i`` for all constraints simultaneously."""
    ell = len(constraints)
    if not 1 <= ell <= dim:
        raise DegenerateConstraints(f"need between 1 and {dim} constraints, got {ell}")
    pts = np.array([np.asarray(c[0], dtype=float) for c in constraints]).reshape(ell, dim)
    t = np.array([float(c[1]) for c in constraints])
    if np.any(t < 0):
        raise EmptySphere("negative squared distance")
    x1 = pts[0]
    e = pts[1:] - x1
    if ell > 1:
        q, r = gram_schmidt(e)
        h = 0.5 * (t[0] + np.sum(e * e, axis=1) - t[1:])
        a = np.zeros(ell - 1)
        for i in range(ell - 1):
            a[i] = (h[i] - r[i, :i] @ a[:i]) / r[i, i]
        offset = a @ q
    else:
        q = np.zeros((0, dim))
        offset = np.zeros(dim)
    rad2 = t[0] - offset @ offset
    if rad2 < 0:
        if rad2 < -TANGENCY_SLACK * max(1.0, t[0]):
            raise EmptySphere(f"distance constraints are infeasible (radicand {rad2:.3e})")
        rad2 = 0.0
    return SphereSection(x1 + offset, float(np.sqrt(rad2)), complement_basis(q, dim))


def satisfies(sphere_point: np.ndarray, constraints, rel_tol: float = 1e-9) -> bool:
    for x, t in constraints:
        d = np.asarray(sphere_point) - np.asarray(x, dtype=float)
        if abs(d @ d - t) > rel_tol * max(1.0, t):
            return False
    return True


def _gram_det(vectors: np.ndarray) -> float:
    # prod(diag R)^2 from a QR of the rows avoids squaring the condition number
    if len(vectors) == 0:
        return 1.0
    r = np.linalg.qr(np.asarray(vectors, dtype=float).T, mode="r")
    return float(np.prod(np.diag(r)) ** 2)


def radius_gram(apex: Sequence[float], base: Sequence[Sequence[float]]) -> float:
    """Radius of the sphere through ``apex`` with the base points fixed.

    Ratio of the Gram determinant of the apex differences to that of the base
    differences; equals the distance from ``apex`` to the affine span of base.
    """
    apex = np.asarray(apex, dtype=float)
    base = np.atleast_2d(np.asarray(base, dtype=float))
    num = _gram_det(apex - base)
    last = base[-1]
    tail = base[:-1] - last
    den = _gram_det(tail)
    scale = max(1.0, float(np.max(np.abs(tail)))) if len(tail) else 1.0
    if den <= 1e-14 * scale ** (2 * len(tail)):
        raise DegenerateBase("base points are affinely dependent")
    return float(np.sqrt(max(num, 0.0) / den))


def distance_to_affine_span(point: Sequence[float], base: Sequence[Sequence[float]]) -> float:
    """Projection distance from ``point`` to the affine hull of ``base``."""
    point = np.asarray(point, dtype=float)
    base = np.atleast_2d(np.asarray(base, dtype=float))
    origin = base[0]
    if len(base) == 1:
        return float(np.linalg.norm(point - origin))
    span = (base[1:] - origin).T
    coef, *_ = np.linalg.lstsq(span, point - origin, rcond=None)
    return float(np.linalg.norm(point - origin - span @ coef))


def sample_sphere(sphere: SphereSection, rng: np.random.Generator) -> np.ndarray:
    """Draw a point uniformly from the sphere's surface measure."""
    k = sphere.flat_basis.shape[0]
    while True:
        g = rng.standard_normal(k)
        n = np.linalg.norm(g)
        if n > 0:
            return sphere.point(g / n)


@dataclass(frozen=True)
class Embedding:
    """Points ``points[v]`` for every graph vertex ``v`` forming a copy of ``scale * graph``."""

    points: np.ndarray
    scale: float
    graph: DistanceGraph | None = None
    ordering: DegeneracyOrdering | None = None
    flags: tuple[str, ...] = field(default=())

    def to_json(self) -> dict[str, Any]:
        return {"lambda": float(self.scale), "points": [[float(x) for x in row] for row in self.points]}

    @classmethod
    def from_json(cls, doc, graph: DistanceGraph | None = None) -> "Embedding":
        return cls(np.array(doc["points"], dtype=float), float(doc["lambda"]), graph)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def fold_graph(
    graph: DistanceGraph,
    ordering: DegeneracyOrdering | None,
    lam: float,
    rng: np.random.Generator,
) -> Embedding:
    """Place the vertices one at a time on their configuration spheres.

    The first vertex of the ordering sits at the origin; each later vertex is
    drawn uniformly from the solution sphere of its placed predecessors at
    squared distances ``lam**2 * t_ij``.
    """
    if not lam > 0:
        raise ValueError("scale must be positive")
    ordering = ordering or degeneracy_ordering(graph)
    d = graph.dim
    flags = []
    if d < ordering.degeneracy + 1:
        flags.append("dimension-below-degeneracy")
    pts = np.zeros((graph.n_vertices, d))
    for j in range(1, len(ordering.order)):
        v = ordering.order[j]
        preds = ordering.predecessors[j]
        if not preds:
            raise FoldInfeasible(f"vertex {v} has no placed predecessor")
        cons = [(pts[i], lam * lam * graph.sq_length(i, v)) for i in preds]
        try:
            sphere = solution_sphere(cons, d)
        except (EmptySphere, DegenerateConstraints) as exc:
            raise FoldInfeasible(f"cannot place vertex {v}: {exc}") from exc
        pts[v] = sample_sphere(sphere, rng)
    return Embedding(pts, float(lam), graph, ordering, tuple(flags))


def verify_isometric(emb: Embedding, tol: float = 1e-9, absolute: bool = False, graph: DistanceGraph | None = None) -> bool:
    """Every edge length equals ``scale * |v_i - v_j|`` within ``tol``.

    ``tol`` is relative unless ``absolute`` is set (grid witnesses).
    """
    if not tol > 0:
        raise ToleranceNonpositive(f"tolerance must be positive, got {tol}")
    graph = graph or emb.graph
    if graph is None:
        raise InvalidGraph("embedding carries no graph")
    p = np.asarray(emb.points)
    if p.shape != graph.vertices.shape:
        return False
    for i, j in graph.edges:
        got = np.linalg.norm(p[i] - p[j])
        want = emb.scale * np.linalg.norm(graph.vertices[i] - graph.vertices[j])
        err = abs(got - want)
        if err > (tol if absolute else tol * want):
            return False
    return True
