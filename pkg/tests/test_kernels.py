import math

import numpy as np
import pytest

from dgramsey import kernels
from dgramsey.counting import _pred_arrays
from dgramsey.graphs import complete_graph, degeneracy_ordering, grid_graph, path_graph, sharpness_graph
from dgramsey.gridset import generate
from dgramsey.search import CopyQuery, plan_search
from dgramsey.graphs import single_edge

needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernels not built")

GRAPHS = [path_graph(3), grid_graph(2, 1), sharpness_graph(2), sharpness_graph(2, dim=3), complete_graph(np.vstack([np.zeros(3), np.eye(3)]))]


def test_active_backend_name():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.get().BACKEND == kernels.BACKEND
    with pytest.raises(ValueError):
        kernels.get("fortran")


@pytest.mark.parametrize("g", GRAPHS)
def test_python_fold_is_isometric(g):
    o = degeneracy_ordering(g)
    pos, ptr, sq = _pred_arrays(g, o)
    gauss = np.random.default_rng(0).standard_normal((500, g.n_vertices, g.dim))
    pts, radii, status = kernels.python_backend.fold_batch(pos, ptr, sq, gauss)
    assert np.all(status == 0)
    for j in range(1, g.n_vertices):
        for k in range(ptr[j], ptr[j + 1]):
            dist2 = np.sum((pts[:, j] - pts[:, pos[k]]) ** 2, axis=1)
            assert np.allclose(dist2, sq[k], rtol=1e-10)


@needs_compiled
@pytest.mark.parametrize("g", GRAPHS)
def test_fold_backends_agree(g):
    o = degeneracy_ordering(g)
    pos, ptr, sq = _pred_arrays(g, o)
    gauss = np.random.default_rng(1).standard_normal((2000, g.n_vertices, g.dim))
    a = kernels.python_backend.fold_batch(pos, ptr, sq, gauss)
    b = kernels.compiled_backend.fold_batch(pos, ptr, sq, gauss)
    assert np.allclose(a[0], b[0], atol=1e-12)
    assert np.allclose(a[1], b[1], atol=1e-12)
    assert np.array_equal(a[2], b[2])


@needs_compiled
def test_fold_status_codes_agree():
    pos = np.array([0, 0, 1], dtype=np.int64)
    ptr = np.array([0, 0, 1, 3], dtype=np.int64)
    sq = np.array([1.0, 25.0, 1.0])  # the third vertex cannot be 5 from 0 and 1 from 1
    gauss = np.random.default_rng(2).standard_normal((10, 3, 2))
    a = kernels.python_backend.fold_batch(pos, ptr, sq, gauss)
    b = kernels.compiled_backend.fold_batch(pos, ptr, sq, gauss)
    assert np.all(a[2] == 1) and np.array_equal(a[2], b[2])


@needs_compiled
@pytest.mark.parametrize("seed", range(6))
def test_search_backends_agree(seed):
    rng = np.random.default_rng(seed)
    N = 32
    A = generate({"kind": "iid", "alpha": float(rng.uniform(0.01, 0.1)), "seed": seed}, N, 2)
    g = [single_edge(1.0, 2), path_graph(2), sharpness_graph(2)][seed % 3]
    q = CopyQuery(g, float(rng.uniform(0.05, 0.3)), 2 * math.sqrt(2) / N).resolved(N)
    plan = plan_search(q, N, seed)
    member = np.ascontiguousarray(A.membership.ravel().astype(np.uint8))
    anchors = np.flatnonzero(member).astype(np.int64)
    args = (member, N, 2, anchors, plan.pred_pos, plan.pred_ptr, plan.pred_len, plan.dirs, plan.dir_ptr, plan.halfw, q.tolerance)
    sa, ca = kernels.python_backend.search_copy(*args)
    sb, cb = kernels.compiled_backend.search_copy(*args)
    assert sa == sb
    if sa >= 0:
        assert np.array_equal(ca, cb)


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, DGRAMSEY_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import dgramsey; print(dgramsey.BACKEND)"], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
