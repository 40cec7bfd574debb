import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from dgramsey.errors import DegenerateBase, DegenerateConstraints, EmptySphere, FoldInfeasible, ToleranceNonpositive
from dgramsey.geometry import (
    Embedding,
    distance_to_affine_span,
    fold_graph,
    gram_schmidt,
    radius_gram,
    sample_sphere,
    satisfies,
    solution_sphere,
    verify_isometric,
)
from dgramsey.graphs import complete_graph, degeneracy_ordering, grid_graph, path_graph, sharpness_graph, single_edge

TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]]


class TestSolutionSphere:
    def test_two_unit_circles(self):
        s = solution_sphere([([0.0, 0.0], 1.0), ([1.0, 0.0], 1.0)], 2)
        assert s.sphere_dim == 0
        assert np.allclose(s.center, [0.5, 0.0])
        assert s.radius == pytest.approx(math.sqrt(3) / 2)

    def test_single_constraint_is_full_sphere(self):
        s = solution_sphere([([1.0, 2.0, 3.0], 4.0)], 3)
        assert s.sphere_dim == 2 and s.radius == pytest.approx(2.0)

    def test_disjoint_balls_are_empty(self):
        with pytest.raises(EmptySphere):
            solution_sphere([([0.0, 0.0], 1.0), ([3.0, 0.0], 1.0)], 2)

    def test_coincident_centres(self):
        with pytest.raises((DegenerateConstraints, EmptySphere)):
            solution_sphere([([0.0, 0.0], 1.0), ([0.0, 0.0], 1.0)], 2)

    def test_too_many_constraints(self):
        with pytest.raises(DegenerateConstraints):
            solution_sphere([([0.0], 1.0), ([1.0], 1.0)], 1)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 5))
    def test_points_satisfy_constraints(self, seed, d):
        rng = np.random.default_rng(seed)
        ell = int(rng.integers(1, d + 1))
        x = rng.standard_normal(d)
        base = rng.standard_normal((ell, d))
        cons = [(b, float(np.sum((x - b) ** 2))) for b in base]
        s = solution_sphere(cons, d)
        for _ in range(5):
            assert satisfies(sample_sphere(s, rng), cons, 1e-8)


class TestGramRadius:
    def test_unit_triangle_apex(self):
        assert radius_gram([0.5, math.sqrt(3) / 2], [[0, 0], [1, 0]]) == pytest.approx(math.sqrt(3) / 2)

    def test_degenerate_base(self):
        with pytest.raises(DegenerateBase):
            radius_gram([0.0, 1.0, 0.0], [[0, 0, 0], [1, 0, 0], [2, 0, 0]])

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_matches_projection(self, seed, d):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, d + 1))
        pts = rng.standard_normal((k + 1, d))
        r = distance_to_affine_span(pts[0], pts[1:])
        if r < 1e-3:
            return
        assert radius_gram(pts[0], pts[1:]) == pytest.approx(r, rel=1e-9)

    def test_sphere_radius_agrees(self):
        rng = np.random.default_rng(0)
        for d in (2, 3, 4):
            base = rng.standard_normal((d - 1, d))
            x = rng.standard_normal(d)
            s = solution_sphere([(b, float(np.sum((x - b) ** 2))) for b in base], d)
            assert s.radius == pytest.approx(radius_gram(x, base), rel=1e-9)


class TestSampling:
    def test_circle_uniform_chi_square(self):
        rng = np.random.default_rng(1)
        s = solution_sphere([([0.0, 0.0], 1.0)], 2)
        pts = np.array([sample_sphere(s, rng) for _ in range(16000)])
        ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        counts = np.bincount((ang / (2 * np.pi) * 16).astype(int), minlength=16)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_intersection_circle_in_3d_uniform(self):
        rng = np.random.default_rng(2)
        s = solution_sphere([([0.0, 0.0, 0.0], 1.0), ([1.0, 0.0, 0.0], 1.0)], 3)
        pts = np.array([sample_sphere(s, rng) for _ in range(8000)])
        assert np.allclose(pts[:, 0], 0.5)
        ang = np.mod(np.arctan2(pts[:, 2], pts[:, 1]), 2 * np.pi)
        counts = np.bincount((ang / (2 * np.pi) * 16).astype(int), minlength=16)
        assert stats.chisquare(counts).pvalue > 1e-3


class TestFold:
    @pytest.mark.parametrize("g", [path_graph(4), complete_graph(TRIANGLE), grid_graph(2, 2), sharpness_graph(2)])
    @pytest.mark.parametrize("lam", [0.05, 0.2, 3.0])
    def test_folds_are_isometric(self, g, lam):
        rng = np.random.default_rng(3)
        o = degeneracy_ordering(g)
        for _ in range(20):
            emb = fold_graph(g, o, lam, rng)
            assert verify_isometric(emb, 1e-9)
            assert np.allclose(emb.points[o.order[0]], 0)

    def test_perturbation_detected(self):
        g = complete_graph(TRIANGLE)
        emb = fold_graph(g, None, 0.2, np.random.default_rng(0))
        pts = emb.points.copy()
        pts[1] += 1e-6
        assert not verify_isometric(Embedding(pts, emb.scale, g), 1e-9)

    def test_tolerance_positive(self):
        emb = fold_graph(single_edge(1.0, 2), None, 0.5, np.random.default_rng(0))
        with pytest.raises(ToleranceNonpositive):
            verify_isometric(emb, 0.0)

    def test_collinear_triangle_folds_at_tangency(self):
        g = complete_graph([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        emb = fold_graph(g, None, 1.0, np.random.default_rng(0))
        assert verify_isometric(emb, 1e-9)
        assert distance_to_affine_span(emb.points[1], emb.points[[0, 2]]) < 1e-6

    def test_deterministic_for_seed(self):
        g = sharpness_graph(2)
        a = fold_graph(g, None, 0.3, np.random.default_rng(9))
        b = fold_graph(g, None, 0.3, np.random.default_rng(9))
        assert a.dumps() == b.dumps()

    def test_json_round_trip(self):
        g = grid_graph(2, 1)
        emb = fold_graph(g, None, 0.5, np.random.default_rng(1))
        back = Embedding.from_json(emb.to_json(), g)
        assert np.array_equal(back.points, emb.points) and verify_isometric(back)


def test_gram_schmidt_orthonormal():
    rng = np.random.default_rng(4)
    q, r = gram_schmidt(rng.standard_normal((3, 5)))
    assert np.allclose(q @ q.T, np.eye(3))
