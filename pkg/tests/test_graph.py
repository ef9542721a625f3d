import numpy as np
import pytest

from graphpde.errors import DegenerateGraphError
from graphpde.geometry import DensitySpec, sample_density
from graphpde.graph import (
    build_knn_graph,
    build_rdgg,
    build_rdgg_bruteforce,
    degrees,
)
from graphpde.kernels import DriftSpec, KernelSpec


def small_line_graph():
    # 3 points in d=1 at 0.0, 0.05, 0.5 with the indicator kernel, h=0.1
    pts = np.array([[0.0], [0.05], [0.5]])
    kernel = KernelSpec.indicator(1)
    drift = DriftSpec.zero(1)
    return build_rdgg(pts, kernel, drift, h=0.1, eps=0.0), kernel


def test_three_point_line_weights():
    g, kernel = small_line_graph()
    W = g.W.toarray()
    phi0 = kernel.eval(0.0)
    phi_half = kernel.eval(0.5)
    # hand oracle: |x0-x1| = 0.05 -> t=0.5; |x0-x2| = 0.5 -> t=5 outside
    expected = np.array([
        [phi0, phi_half, 0.0],
        [phi_half, phi0, 0.0],
        [0.0, 0.0, phi0],
    ])
    np.testing.assert_allclose(W, expected, rtol=1e-14)
    np.testing.assert_allclose(degrees(g), expected.sum(axis=1), rtol=1e-14)
    assert W[0, 1] > 0.0 and W[0, 2] == 0.0
    np.testing.assert_array_equal(W, W.T)


def test_single_node_self_loop_degree():
    kernel = KernelSpec.indicator(2)
    g = build_rdgg(np.array([[0.5, 0.5]]), kernel, DriftSpec.zero(2),
                   h=0.1, eps=0.0)
    assert degrees(g)[0] == pytest.approx(kernel.eval(0.0), rel=1e-14)


@pytest.mark.parametrize("n,d,eps_frac", [(120, 1, 0.0), (400, 2, 0.0),
                                          (500, 2, 0.5), (300, 3, 0.25)])
def test_cell_list_equals_bruteforce(n, d, eps_frac):
    rng = np.random.default_rng(n + d)
    pts = rng.random((n, d))
    kernel = KernelSpec.indicator(d) if d != 2 else KernelSpec.bump(d)
    drift = DriftSpec.constant([0.5] + [0.1] * (d - 1))
    h = 0.08
    eps = eps_frac * h**2
    fast = build_rdgg(pts, kernel, drift, h=h, eps=eps)
    slow = build_rdgg_bruteforce(pts, kernel, drift, h=h, eps=eps)
    diff = (fast.W - slow.W).tocoo()
    assert diff.nnz == 0, "cell-list adjacency must equal brute force exactly"
    np.testing.assert_array_equal(fast.degrees, slow.degrees)


def test_symmetric_adjacency_when_eps_zero():
    rng = np.random.default_rng(9)
    pts = rng.random((250, 2))
    g = build_rdgg(pts, KernelSpec.indicator(2), DriftSpec.constant([1.0, 0.0]),
                   h=0.1, eps=0.0)
    diff = (g.W - g.W.T).tocoo()
    assert diff.nnz == 0


def test_rdgg_general_B_builds():
    def B(x):
        x = np.atleast_2d(x)
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = 1.0 + 0.5 * np.sin(2 * np.pi * x[:, 0]) ** 2
        out[:, 1, 1] = 1.0
        return out

    drift = DriftSpec(lambda x: np.zeros_like(np.atleast_2d(x)), 2, 0.0,
                      name="aniso", B=B, Binv_sup=1.0)
    rng = np.random.default_rng(17)
    pts = rng.random((300, 2))
    fast = build_rdgg(pts, KernelSpec.indicator(2), drift, h=0.08, eps=0.0)
    slow = build_rdgg_bruteforce(pts, KernelSpec.indicator(2), drift, h=0.08, eps=0.0)
    assert (fast.W - slow.W).nnz == 0
    # anisotropic B makes the graph asymmetric even with eps = 0
    assert (fast.W - fast.W.T).nnz > 0


def test_in_out_degree_balance():
    # mean relative in/out imbalance stays within generous stochastic bounds
    pts = sample_density(DensitySpec.uniform(2), 4000, seed=1)
    h, eps = 0.08, 0.08**2
    g = build_rdgg(pts, KernelSpec.indicator(2), DriftSpec.constant([1.0, 0.0]),
                   h=h, eps=eps)
    rel = np.abs(g.in_degrees() - g.degrees) / g.degrees
    bound = 5.0 * (eps / h + (4000 * h**2) ** -0.5)
    assert rel.mean() < bound


@pytest.mark.slow
def test_degree_asymptotics_large():
    # d_x ~ n h^d rho(x): mean of d_x/(n h^d) within 10% at n = 1e5
    n, h = 100_000, 0.05
    pts = sample_density(DensitySpec.uniform(2), n, seed=33)
    g = build_rdgg(pts, KernelSpec.indicator(2), DriftSpec.zero(2), h=h, eps=0.0)
    ratio = g.degrees.mean() / (n * h**2)
    assert 0.9 < ratio < 1.1


def test_knn_line_example():
    # points 0, 1, 3 on a line with k=1
    g = build_knn_graph(np.array([[0.0], [1.0], [3.0]]), k=1)
    W = g.W.toarray()
    e4 = np.exp(-4.0)
    expected = np.array([
        [0.0, e4, 0.0],
        [e4, 0.0, 0.0],
        [0.0, e4, 0.0],
    ])
    np.testing.assert_allclose(W, expected, rtol=1e-14)
    # node 1 has an in-edge from 2 but no out-edge to 2
    assert W[2, 1] > 0.0 and W[1, 2] == 0.0


def test_knn_weight_at_kth_neighbor_is_e4():
    rng = np.random.default_rng(4)
    vecs = rng.normal(size=(150, 3))
    k = 5
    g = build_knn_graph(vecs, k=k)
    W = g.W.tocsr()
    for i in range(g.n):
        row = W.data[W.indptr[i]:W.indptr[i + 1]]
        assert len(row) == k
        assert row.min() == np.exp(-4.0)
        assert np.all((row > 0.0) & (row <= 1.0))


def test_knn_generally_asymmetric():
    rng = np.random.default_rng(12)
    vecs = rng.normal(size=(100, 2))
    g = build_knn_graph(vecs, k=3)
    asym = (g.W > 0).astype(int) - (g.W.T > 0).astype(int)
    assert asym.nnz > 0


def test_knn_argument_validation():
    with pytest.raises(ValueError):
        build_knn_graph(np.zeros((3, 2)), k=3)
    with pytest.raises(DegenerateGraphError):
        build_knn_graph(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]), k=1)


def test_knn_deterministic_tiebreak():
    # equidistant neighbors resolve by ascending index
    vecs = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    g = build_knn_graph(vecs, k=2)
    nbrs = g.W[0].nonzero()[1]
    np.testing.assert_array_equal(np.sort(nbrs), [1, 2])


def test_graph_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    pts = rng.random((60, 2))
    g = build_rdgg(pts, KernelSpec.indicator(2), DriftSpec.zero(2), h=0.15, eps=0.0)
    path = tmp_path / "graph.csv"
    g.save(path)
    loaded = type(g).load(path)
    assert (loaded.W - g.W).nnz == 0
    np.testing.assert_array_equal(loaded.degrees, g.degrees)
    assert loaded.degree_scale == pytest.approx(g.degree_scale)
