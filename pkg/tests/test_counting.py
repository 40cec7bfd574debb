import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j0

from dgramsey.counting import (
    CountingEstimate,
    CutoffProfile,
    corollary_lower_bound_check,
    default_cutoffs,
    estimate_c0,
    estimate_I,
    estimate_T,
    gvn_check,
)
from dgramsey.errors import ImproperGraph, IndexOutOfRange, ScaleViolation
from dgramsey.graphs import complete_graph, degeneracy_ordering, path_graph, sharpness_graph, single_edge
from dgramsey.gridset import GridFunction, generate
from oracles import circle_box_overlap_quadrature

EDGE = single_edge(1.0, 2)
ALL2 = CutoffProfile.accept_all(2)


def test_single_edge_matches_quadrature():
    est = estimate_T(EDGE, None, [None, None], 0.2, ALL2, 300_000, seed=1)
    ref = circle_box_overlap_quadrature(0.2)
    assert abs(est.value - ref) <= 3 * est.std_error


def test_worker_invariance():
    A = generate({"kind": "iid", "alpha": 0.4, "seed": 2}, 64, 2)
    a = estimate_T(EDGE, None, [A, A], 0.1, ALL2, 100_000, seed=3, workers=1)
    b = estimate_T(EDGE, None, [A, A], 0.1, ALL2, 100_000, seed=3, workers=3)
    assert a == b


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_multilinear_in_each_slot(seed, a, b):
    rng = np.random.default_rng(seed)
    f0 = GridFunction(rng.random((16, 16)))
    g, h = GridFunction(rng.standard_normal((16, 16))), GridFunction(rng.standard_normal((16, 16)))
    kw = dict(cutoffs=ALL2, samples=20_000, seed=seed % 1000)
    lhs = estimate_T(EDGE, None, [f0, g * a + h * b], 0.15, **kw).value
    rhs = a * estimate_T(EDGE, None, [f0, g], 0.15, **kw).value + b * estimate_T(EDGE, None, [f0, h], 0.15, **kw).value
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_small_scale_tends_to_c0():
    g = sharpness_graph(2)
    cut = default_cutoffs(g, None, seed=4)
    t = estimate_T(g, None, [None] * 4, 1e-6, cut, 100_000, seed=4)
    c = estimate_c0(g, None, cut, 100_000, seed=5)
    assert abs(t.value - c.value) <= 3 * math.hypot(t.std_error, c.std_error)


def test_balanced_function_has_small_count():
    A = generate({"kind": "iid", "alpha": 0.3, "seed": 5}, 128, 2)
    est = estimate_T(EDGE, None, [None, A.balanced()], 0.1, ALL2, 100_000, seed=6)
    assert abs(est.value) < 0.05


class TestC0:
    def test_accept_all_is_one(self):
        e = estimate_c0(path_graph(3), None, CutoffProfile.accept_all(4), 10_000, seed=1)
        assert e.value == 1.0 and e.std_error == 0.0

    def test_half_spheres(self):
        n = 3
        g = path_graph(n)
        o = degeneracy_ordering(g)

        def upper(pts, radii):
            step = np.diff(pts, axis=1)
            return np.all(step[:, :, 1] > 0, axis=1)

        # path ordering is monotone along the path
        assert list(o.order) in ([0, 1, 2, 3], [3, 2, 1, 0])
        e = estimate_c0(g, o, CutoffProfile.accept_all(n + 1, upper), 200_000, seed=2)
        assert abs(e.value - 2.0**-n) <= 3 * e.std_error

    def test_sharpness_reproducible_across_seeds(self):
        g = sharpness_graph(2, dim=3)
        ests = [estimate_c0(g, None, default_cutoffs(g, None, 0), 20_000, seed=s) for s in range(10)]
        vals = np.array([e.value for e in ests])
        ses = np.array([e.std_error for e in ests])
        assert np.all(vals > 0)
        assert np.all(np.abs(vals - vals.mean()) <= 3 * np.sqrt(ses**2 + ses.mean() ** 2 / 10))

    def test_improper_rejected(self):
        g = complete_graph([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(ImproperGraph):
            estimate_c0(g, None, CutoffProfile.accept_all(3), 100, seed=0)


class TestI:
    def test_zero_frequency(self):
        e = estimate_I(EDGE, None, 1, [0.0, 0.0], ALL2, 10_000, seed=1)
        assert e.value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 4, 8])
    def test_circle_average_oracle(self, k):
        e = estimate_I(EDGE, None, 1, [k * 0.6, k * 0.8], ALL2, 200_000, seed=k)
        assert abs(e.value - j0(2 * np.pi * k) ** 2) <= 3 * e.std_error

    @pytest.mark.parametrize("k", [1, 3])
    def test_pairs_mode_on_later_vertex(self, k):
        g = path_graph(2)
        o = degeneracy_ordering(g)
        e = estimate_I(g, o, 2, [k, 0.0], CutoffProfile.accept_all(3), 60_000, seed=k, inner=4)
        assert abs(e.value - j0(2 * np.pi * k) ** 2) <= 3 * e.std_error

    def test_pairs_and_global_agree(self):
        a = estimate_I(EDGE, None, 1, [2.0, 0.0], ALL2, 100_000, seed=3, mode="global")
        b = estimate_I(EDGE, None, 1, [2.0, 0.0], ALL2, 100_000, seed=3, mode="pairs")
        assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_index_range(self):
        with pytest.raises(IndexOutOfRange):
            estimate_I(EDGE, None, 2, [1.0, 0.0], ALL2, 100, seed=0)


class TestGvN:
    def test_zero_function(self):
        rep = gvn_check(EDGE, None, [None, GridFunction(np.zeros((8, 8)))], 0.1, 1e-6, 0.2, ALL2, 1000, seed=0)
        assert (rep.lhs, rep.rhs, rep.slack) == (0.0, 0.0, 0.0)

    def test_scale_enforced(self):
        with pytest.raises(ScaleViolation):
            gvn_check(EDGE, None, [None, 1.0], 0.1, 0.01, 0.2, ALL2, 1000, seed=0)

    def test_slack_small(self):
        A = generate({"kind": "iid", "alpha": 0.5, "seed": 7}, 64, 2)
        rep = gvn_check(EDGE, None, [A, A.balanced()], 0.2, 0.2**6 * 0.2, 0.2, ALL2, 50_000, seed=7)
        assert rep.slack <= 0.05


class TestCorollary:
    def test_full_cube(self):
        A = generate({"kind": "full"}, 64, 2)
        rep = corollary_lower_bound_check(A, EDGE, None, 0.01, 0.2, None, 50_000, seed=1)
        assert rep.status == "ok" and rep.T.value >= 0.5 * rep.c0.value

    def test_ball_lattice_not_uniform(self):
        # density near 0.16, so the sub-cell window norm is about 0.37
        A = generate({"kind": "ball_lattice", "spacing": 1 / 8, "radius": 1 / 40}, 256, 2)
        rep = corollary_lower_bound_check(A, EDGE, None, 1 / 16, 0.2, None, 20_000, seed=2)
        assert rep.status == "hypothesis-not-met" and not rep.hypothesis_met


def test_estimate_json_round_trip():
    e = CountingEstimate(0.5, 0.01, 100, 0.2, 7)
    assert CountingEstimate.from_json(e.to_json()) == e
