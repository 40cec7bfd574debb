import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgramsey.errors import BudgetZero, FoldInfeasible, ToleranceNonpositive
from dgramsey.graphs import path_graph, sharpness_graph, single_edge
from dgramsey.gridset import GridSet, generate
from dgramsey.search import (
    CopyQuery,
    check_witness,
    find_copy,
    geometric_lambdas,
    scan_lambda,
    threshold_estimate,
    threshold_from_report,
)
from oracles import pair_enumeration

EDGE = single_edge(1.0, 2)
BALLS = {"kind": "ball_lattice", "spacing": 1 / 8, "radius": 1 / 320}


def test_full_set_path():
    A = generate({"kind": "full"}, 64, 2)
    emb = find_copy(A, CopyQuery(path_graph(3), 0.2))
    assert emb is not None and check_witness(A, emb, math.sqrt(2) / 64)


def test_empty_set():
    A = generate({"kind": "empty"}, 32, 2)
    for lam in (0.05, 0.2, 0.7):
        assert find_copy(A, CopyQuery(EDGE, lam)) is None


@pytest.fixture(scope="module")
def balls():
    return generate(BALLS, 1024, 2)


def test_lattice_gap_and_presence(balls):
    tol = math.sqrt(2) / 1024
    assert find_copy(balls, CopyQuery(EDGE, 1.2 / 8, tol)) is None
    assert find_copy(balls, CopyQuery(EDGE, 1.0 / 8, tol)) is not None


def test_too_large_scale_absent():
    A = generate({"kind": "full"}, 16, 2)
    assert find_copy(A, CopyQuery(EDGE, 1.5)) is None


def test_query_validation():
    A = generate({"kind": "full"}, 16, 2)
    with pytest.raises(ToleranceNonpositive):
        find_copy(A, CopyQuery(EDGE, 0.2, tolerance=0.01))
    with pytest.raises(ToleranceNonpositive):
        find_copy(A, CopyQuery(EDGE, 0.2, tolerance=-1.0))
    with pytest.raises(BudgetZero):
        find_copy(A, CopyQuery(EDGE, 0.2, rotation_budget=0))
    with pytest.raises(FoldInfeasible):
        find_copy(A, CopyQuery(single_edge(1.0, 3), 0.2))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_soundness_and_oracle(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.choice([8, 16, 32]))
    A = GridSet(rng.random((N, N)) < rng.uniform(0.002, 0.05))
    lam = float(rng.uniform(0.05, 1.0))
    tol = math.sqrt(2) / N * float(rng.uniform(1, 2))
    emb = find_copy(A, CopyQuery(EDGE, lam, tol), seed=seed)
    assert (emb is not None) == pair_enumeration(A.membership, lam, tol)
    if emb is not None:
        assert check_witness(A, emb, tol)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_tolerance_monotone(seed):
    rng = np.random.default_rng(seed)
    N = 32
    A = GridSet(rng.random((N, N)) < 0.01)
    lam = float(rng.uniform(0.05, 0.5))
    base = math.sqrt(2) / N
    verdicts = [find_copy(A, CopyQuery(EDGE, lam, base * k)) is not None for k in (1, 1.5, 2, 3)]
    assert verdicts == sorted(verdicts)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.integers(-4, 4), st.integers(-4, 4))
def test_translation_equivariance(seed, dx, dy):
    rng = np.random.default_rng(seed)
    N = 32
    core = rng.random((20, 20)) < 0.03
    M = np.zeros((N, N), bool)
    M[6:26, 6:26] = core
    S = np.zeros((N, N), bool)
    S[6 + dx : 26 + dx, 6 + dy : 26 + dy] = core
    lam = float(rng.uniform(0.05, 0.4))
    a = find_copy(GridSet(M), CopyQuery(EDGE, lam))
    b = find_copy(GridSet(S), CopyQuery(EDGE, lam))
    assert (a is None) == (b is None)


def test_three_dimensional_and_sharpness():
    A = generate({"kind": "full"}, 16, 3)
    emb = find_copy(A, CopyQuery(sharpness_graph(2, dim=3), 0.3))
    assert emb is not None and check_witness(A, emb, math.sqrt(3) / 16)


def test_worker_invariance(balls):
    q = CopyQuery(EDGE, 1.0 / 8, math.sqrt(2) / 1024)
    a = find_copy(balls, q, workers=1)
    b = find_copy(balls, q, workers=3)
    assert a.dumps() == b.dumps()


class TestScan:
    def test_iid_found_everywhere(self):
        A = generate({"kind": "iid", "alpha": 0.4, "seed": 1}, 512, 2)
        rep = scan_lambda(A, EDGE, 1 / 64, 1 / 4, 32)
        assert all(rep.found)

    def test_trailing_absent_run(self):
        A = generate({"kind": "full"}, 16, 2)
        rep = scan_lambda(A, EDGE, 0.5, 2.0, 8)
        assert rep.found[0] and not rep.found[-1]
        assert threshold_from_report(rep) == math.inf

    def test_thresholds(self):
        g = single_edge(1.0, 2)
        assert threshold_estimate(generate({"kind": "full"}, 16, 2), g, 0.1, 0.5, 5) == 0.0
        assert threshold_estimate(generate({"kind": "empty"}, 16, 2), g, 0.1, 0.5, 5) == math.inf

    def test_lattice_threshold_positive(self, balls):
        rep = scan_lambda(balls, EDGE, 0.8 / 8, 3.0 / 8, 24)
        t = threshold_from_report(rep)
        assert 0 < t < math.inf

    def test_csv_and_gaps(self):
        A = generate({"kind": "full"}, 16, 2)
        rep = scan_lambda(A, EDGE, 0.5, 2.0, 4)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "lambda,found,witness_file" and len(lines) == 5
        assert rep.gaps() and rep.longest_run[0] == pytest.approx(0.5)

    def test_geometric(self):
        lam = geometric_lambdas(1.0, 8.0, 4)
        assert np.allclose(lam, [1, 2, 4, 8])
        with pytest.raises(ValueError):
            geometric_lambdas(1.0, 0.5, 4)
