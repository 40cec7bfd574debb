"""Distance graphs, degeneracy orderings and the example families.

A :class:`DistanceGraph` stores vertex coordinates and an undirected edge set.
Squared edge lengths are always derived from the coordinates.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    GlueMismatch,
    InvalidDescriptor,
    InvalidGraph,
    ToleranceNonpositive,
)

DEFAULT_PROPER_TOL = 1e-8


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class DistanceGraph:
    """Connected graph with vertices in R^d; edges are rigid rods."""

    vertices: np.ndarray
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidGraph("vertices must be a non-empty (n+1, d) array")
        if not np.all(np.isfinite(v)):
            raise InvalidGraph("vertex coordinates must be finite")
        v.setflags(write=False)
        seen = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise InvalidGraph(f"self-loop at vertex {i}")
            if not (0 <= i < len(v) and 0 <= j < len(v)):
                raise InvalidGraph(f"edge {e} references a missing vertex")
            key = _norm_edge(i, j)
            if key in seen:
                raise InvalidGraph(f"duplicate edge {key}")
            seen.add(key)
        edges = tuple(sorted(seen))
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "edges", edges)
        for i, j in edges:
            if np.sum((v[i] - v[j]) ** 2) <= 0.0:
                raise InvalidGraph(f"edge {(i, j)} joins coincident points")
        if not _connected(len(v), edges):
            raise DisconnectedGraph("distance graph must be connected")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def sq_lengths(self) -> dict[tuple[int, int], float]:
        v = self.vertices
        return {e: float(np.sum((v[e[0]] - v[e[1]]) ** 2)) for e in self.edges}

    def sq_length(self, i: int, j: int) -> float:
        d = self.vertices[i] - self.vertices[j]
        return float(d @ d)

    def neighbors(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def diameter(self) -> float:
        """Largest Euclidean distance between two vertices."""
        v = self.vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.sum(diff**2, axis=-1))))

    def translated(self, offset) -> "DistanceGraph":
        return DistanceGraph(self.vertices + np.asarray(offset, dtype=float), self.edges)

    def transformed(self, rotation, offset=None) -> "DistanceGraph":
        v = self.vertices @ np.asarray(rotation, dtype=float).T
        if offset is not None:
            v = v + np.asarray(offset, dtype=float)
        return DistanceGraph(v, self.edges)

    def lifted(self, dim: int) -> "DistanceGraph":
        """Zero-pad coordinates into R^dim."""
        if dim < self.dim:
            raise InvalidDescriptor(f"cannot lift a {self.dim}-dimensional graph into R^{dim}")
        v = np.zeros((self.n_vertices, dim))
        v[:, : self.dim] = self.vertices
        return DistanceGraph(v, self.edges)

    def canonical(self) -> "DistanceGraph":
        return self.translated(-self.vertices[0])

    def to_json(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "vertices": [[float(x) for x in row] for row in self.vertices],
            "edges": [[i, j] for i, j in self.edges],
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, Any], canonicalize: bool = True) -> "DistanceGraph":
        try:
            dim = int(doc["dim"])
            verts = np.array(doc["vertices"], dtype=float)
            edges = tuple((int(e[0]), int(e[1])) for e in doc["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidGraph(f"malformed graph document: {exc}") from exc
        if verts.ndim != 2 or verts.shape[1] != dim:
            raise InvalidGraph(f"vertices are not points of R^{dim}")
        g = cls(verts, edges)
        return g.canonical() if canonicalize else g


def _connected(n: int, edges: Iterable[tuple[int, int]], removed: int | None = None) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    start = 0 if removed != 0 else 1
    if n - (removed is not None) <= 1:
        return True
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w != removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n - (removed is not None)


@dataclass(frozen=True)
class DegeneracyOrdering:
    """Vertex ordering with predecessor sets.

    ``predecessors[j]`` is the set of neighbours of ``order[j]`` placed before
    it (graph vertex labels); ``predecessors[0]`` is always empty.
    """

    order: tuple[int, ...]
    degeneracy: int
    predecessors: tuple[tuple[int, ...], ...]
    position: dict[int, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.position:
            object.__setattr__(self, "position", {v: p for p, v in enumerate(self.order)})

    @property
    def n(self) -> int:
        return len(self.order) - 1

    def pred_positions(self, j: int) -> tuple[int, ...]:
        return tuple(self.position[v] for v in self.predecessors[j])

    @classmethod
    def from_order(cls, graph: DistanceGraph, order: Sequence[int]) -> "DegeneracyOrdering":
        order = tuple(int(v) for v in order)
        if sorted(order) != list(range(graph.n_vertices)):
            raise InvalidGraph("ordering is not a permutation of the vertices")
        pos = {v: p for p, v in enumerate(order)}
        adj = graph.neighbors()
        preds = tuple(tuple(sorted((w for w in adj[v] if pos[w] < pos[v]), key=pos.get)) for v in order)
        k = max((len(p) for p in preds), default=0)
        return cls(order, k, preds, pos)


def _degeneracy_removal(n: int, edges: Sequence[tuple[int, int]]) -> tuple[list[int], int]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    alive = set(range(n))
    removal: list[int] = []
    k = 0
    while alive:
        deg = {v: len(adj[v] & alive) for v in alive}
        dmin = min(deg.values())
        candidates = sorted(v for v in alive if deg[v] == dmin)
        chosen = candidates[0]
        if len(candidates) > 1:
            # prefer a vertex whose removal keeps the rest connected, so every
            # later vertex of the reversed order keeps at least one predecessor
            sub_edges = [(i, j) for i, j in edges if i in alive and j in alive]
            idx = {v: t for t, v in enumerate(sorted(alive))}
            relabeled = [(idx[i], idx[j]) for i, j in sub_edges]
            for v in candidates:
                if _connected(len(alive), relabeled, removed=idx[v]):
                    chosen = v
                    break
        k = max(k, dmin)
        removal.append(chosen)
        alive.remove(chosen)
    return removal[::-1], k


def degeneracy_ordering(graph: DistanceGraph) -> DegeneracyOrdering:
    """Order vertices by reversed minimum-degree removal.

    The reported degeneracy is the largest degree seen at removal time, which
    equals the smallest k for which the graph is k-degenerate.
    """
    if not _connected(graph.n_vertices, graph.edges):
        raise DisconnectedGraph("distance graph must be connected")
    order, k = _degeneracy_removal(graph.n_vertices, graph.edges)
    ordering = DegeneracyOrdering.from_order(graph, order)
    assert ordering.degeneracy == k
    return ordering


def combinatorial_degeneracy(n: int, edges: Sequence[tuple[int, int]]) -> int:
    """Degeneracy of an abstract graph (no coordinates needed)."""
    return _degeneracy_removal(n, list(edges))[1]


def gram_determinant(points: np.ndarray) -> float:
    """Scale-normalised Gram determinant of ``points[:-1] - points[-1]``."""
    points = np.asarray(points, dtype=float)
    if len(points) <= 1:
        return 1.0
    diffs = points[:-1] - points[-1]
    scale = np.max(np.linalg.norm(diffs, axis=1))
    if scale == 0.0:
        return 0.0
    diffs = diffs / scale
    return float(np.linalg.det(diffs @ diffs.T))


@dataclass(frozen=True)
class ProperReport:
    proper: bool
    failing: tuple[int, ...]
    determinants: tuple[float, ...]

    def __bool__(self) -> bool:
        return self.proper


def is_proper(graph: DistanceGraph, ordering: DegeneracyOrdering, tol: float = DEFAULT_PROPER_TOL) -> ProperReport:
    """Check that each vertex together with its predecessors is affinely independent."""
    if not tol > 0:
        raise ToleranceNonpositive(f"tolerance must be positive, got {tol}")
    failing = []
    dets = []
    for j in range(1, len(ordering.order)):
        idx = list(ordering.predecessors[j]) + [ordering.order[j]]
        det = gram_determinant(graph.vertices[idx])
        dets.append(det)
        if len(idx) > graph.dim + 1 or det <= tol:
            failing.append(j)
    return ProperReport(not failing, tuple(failing), tuple(dets))


# ---------------------------------------------------------------------------
# families


def path_graph(n: int, lengths: Sequence[float] | None = None, dim: int = 2) -> DistanceGraph:
    """Path with ``n`` edges laid out along the first axis."""
    if n < 1:
        raise InvalidDescriptor("a path needs at least one edge")
    lengths = [1.0] * n if lengths is None else [float(x) for x in lengths]
    if len(lengths) != n or any(not x > 0 for x in lengths):
        raise InvalidDescriptor("path needs n positive edge lengths")
    v = np.zeros((n + 1, dim))
    v[1:, 0] = np.cumsum(lengths)
    return DistanceGraph(v, tuple((i, i + 1) for i in range(n)))


def cycle_graph(n: int | None = None, coords: Sequence[Sequence[float]] | None = None, dim: int = 2) -> DistanceGraph:
    if coords is None:
        if n is None or n < 3:
            raise InvalidDescriptor("a cycle needs n >= 3 or explicit coordinates")
        ang = 2 * np.pi * np.arange(n) / n
        v = np.zeros((n, max(dim, 2)))
        v[:, 0] = np.cos(ang) - 1.0
        v[:, 1] = np.sin(ang)
    else:
        v = np.array(coords, dtype=float)
        if v.ndim != 2 or len(v) < 3:
            raise InvalidDescriptor("cycle coordinates must list at least three points")
        if n is not None and n != len(v):
            raise InvalidDescriptor("cycle length disagrees with coordinates")
    m = len(v)
    return DistanceGraph(v, tuple(_norm_edge(i, (i + 1) % m) for i in range(m)))


def grid_graph(k: int, n: int) -> DistanceGraph:
    """The k-dimensional grid {0..n}^k with unit edges."""
    if k < 1 or n < 1:
        raise InvalidDescriptor("grid needs k >= 1 and n >= 1")
    pts = list(itertools.product(range(n + 1), repeat=k))
    index = {p: i for i, p in enumerate(pts)}
    edges = []
    for p, i in index.items():
        for axis in range(k):
            q = list(p)
            q[axis] += 1
            j = index.get(tuple(q))
            if j is not None:
                edges.append((i, j))
    return DistanceGraph(np.array(pts, dtype=float), tuple(edges))


def complete_graph(points: Sequence[Sequence[float]]) -> DistanceGraph:
    v = np.array(points, dtype=float)
    if v.ndim != 2 or len(v) < 2:
        raise InvalidDescriptor("complete graph needs at least two points")
    return DistanceGraph(v, tuple(itertools.combinations(range(len(v)), 2)))


def sharpness_graph(k: int, dim: int | None = None) -> DistanceGraph:
    """Union of the simplices on {0, e1, ..., ek} and {0, -e1, e2, ..., ek}."""
    if k < 1:
        raise InvalidDescriptor("sharpness graph needs k >= 1")
    dim = k if dim is None else dim
    if dim < k:
        raise InvalidDescriptor("sharpness graph lives in at least k dimensions")
    eye = np.eye(dim)
    pts = [np.zeros(dim), eye[0], -eye[0]] + [eye[i] for i in range(1, k)]
    plus = [0, 1] + list(range(3, k + 2))
    minus = [0, 2] + list(range(3, k + 2))
    edges = set()
    for group in (plus, minus):
        for i, j in itertools.combinations(group, 2):
            edges.add(_norm_edge(i, j))
    return DistanceGraph(np.array(pts), tuple(sorted(edges)))


def _rigid_fit(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal map R and offset b minimising |R src + b - dst|."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    rot = (u @ vt).T
    return rot, cd - rot @ cs


def attach(g1: DistanceGraph, g2: DistanceGraph, glue: Mapping[int, int], align: bool = False, tol: float = 1e-9) -> DistanceGraph:
    """Glue ``g2`` onto ``g1`` identifying ``g2`` vertex ``a`` with ``g1`` vertex ``glue[a]``.

    With ``align`` the second graph is first moved rigidly onto the glued
    vertices; otherwise the glued coordinates must already coincide.
    """
    if g1.dim != g2.dim:
        raise GlueMismatch("graphs live in different dimensions")
    if not glue:
        raise InvalidDescriptor("attach needs at least one glued vertex")
    glue = {int(a): int(b) for a, b in glue.items()}
    if len(set(glue.values())) != len(glue):
        raise GlueMismatch("two vertices glued onto the same target")
    src = g2.vertices[list(glue)]
    dst = g1.vertices[list(glue.values())]
    v2 = g2.vertices
    if align:
        rot, off = _rigid_fit(src, dst)
        v2 = v2 @ rot.T + off
        src = v2[list(glue)]
    scale = max(1.0, float(np.max(np.abs(dst))))
    if np.max(np.abs(src - dst)) > tol * scale:
        raise GlueMismatch("glued vertices have inconsistent coordinates")
    mapping = dict(glue)
    extra = []
    for a in range(g2.n_vertices):
        if a not in mapping:
            mapping[a] = g1.n_vertices + len(extra)
            extra.append(v2[a])
    verts = np.vstack([g1.vertices] + ([np.array(extra)] if extra else []))
    edges = set(g1.edges)
    for i, j in g2.edges:
        edges.add(_norm_edge(mapping[i], mapping[j]))
    return DistanceGraph(verts, tuple(sorted(edges)))


def single_edge(length: float = 1.0, dim: int = 2) -> DistanceGraph:
    return path_graph(1, [length], dim=dim)


def build_family(desc: Mapping[str, Any]) -> DistanceGraph:
    """Build a graph from a JSON-style family descriptor.

    Recognised ``family`` values: path, cycle, grid, complete, sharpness,
    attach, edge and explicit (a raw graph document).
    """
    if not isinstance(desc, Mapping) or "family" not in desc:
        raise InvalidDescriptor("descriptor must be a mapping with a 'family' key")
    fam = desc["family"]
    dim = desc.get("dim")
    try:
        if fam == "path":
            g = path_graph(int(desc["n"]), desc.get("lengths"), dim=int(dim or 2))
        elif fam == "edge":
            g = single_edge(float(desc.get("length", 1.0)), dim=int(dim or 2))
        elif fam == "cycle":
            g = cycle_graph(desc.get("n"), desc.get("coords"), dim=int(dim or 2))
        elif fam == "grid":
            g = grid_graph(int(desc["k"]), int(desc["n"]))
        elif fam == "complete":
            g = complete_graph(desc["points"])
        elif fam == "sharpness":
            return sharpness_graph(int(desc["k"]), None if dim is None else int(dim))
        elif fam == "attach":
            glue = {int(a): int(b) for a, b in desc["glue"].items()}
            return attach(build_family(desc["first"]), build_family(desc["second"]), glue, bool(desc.get("align", False)))
        elif fam == "explicit":
            return DistanceGraph.from_json(desc)
        else:
            raise InvalidDescriptor(f"unknown graph family {fam!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDescriptor(f"bad {fam} descriptor: {exc}") from exc
    if dim is not None and int(dim) != g.dim:
        g = g.lifted(int(dim))
    return g


def load_graph(source: Any) -> DistanceGraph:
    """Accept a graph document, a family descriptor, or a path to either."""
    if isinstance(source, str):
        with open(source) as fh:
            source = json.load(fh)
    if "family" in source:
        return build_family(source)
    return DistanceGraph.from_json(source)


def edge_lengths_ok(graph: DistanceGraph, rel_tol: float = 1e-9) -> bool:
    """Invariant check used by property tests."""
    for (i, j), t in graph.sq_lengths.items():
        d = graph.vertices[i] - graph.vertices[j]
        if not math.isclose(t, float(d @ d), rel_tol=rel_tol) or t <= 0:
            return False
    return True
