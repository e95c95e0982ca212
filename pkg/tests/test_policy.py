import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _gradcheck import grad_check
from envopt.policy import (
    CATEGORICAL, GAUSSIAN, CnnPolicy, GnnPolicy, Graph, TabularPolicy, cnn_forward, gnn_forward, load_policy,
    log_softmax, sample_action, save_policy,
)


def _random_graph(rng, n_nodes, n_edges, node_dim=7, edge_dim=3):
    snd = rng.integers(0, n_nodes, n_edges)
    tgt = rng.integers(0, n_nodes, n_edges)
    return Graph(rng.normal(size=(n_nodes, node_dim)), snd, tgt, rng.normal(size=(n_edges, edge_dim)),
                 np.arange(n_nodes))


def test_cnn_zero_input_zero_bias_gives_zero_logits():
    pol = CnnPolicy(seed=0)
    for k in pol.params:
        if k.endswith(".b"):
            pol.params[k][:] = 0
    np.testing.assert_array_equal(cnn_forward(np.zeros((4, 8, 8)), pol), np.zeros(5))


def test_cnn_is_deterministic_and_checks_shape():
    rng = np.random.default_rng(0)
    obs = rng.integers(0, 2, (4, 8, 8)).astype(float)
    a, b = cnn_forward(obs, CnnPolicy(seed=3)), cnn_forward(obs, CnnPolicy(seed=3))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        cnn_forward(np.zeros((4, 7, 8)), CnnPolicy())
    with pytest.raises(ValueError):
        CnnPolicy(height=4, width=8)


def test_cnn_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    pol = CnnPolicy(seed=1)
    obs = rng.normal(size=(3, 4, 8, 8))
    assert grad_check(pol, obs, rng.integers(0, 5, 3), rng) <= 1e-4


def test_gnn_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    pol = GnnPolicy(7, 3, hidden=16, msg_dim=8, out_dim=8, value_hidden=8, seed=2)
    g = _random_graph(rng, 6, 12)
    assert grad_check(pol, g, rng.normal(size=(6, 2)), rng) <= 1e-4


def test_tabular_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    pol = TabularPolicy(3)
    pol.params["logits"] = rng.normal(size=3)
    assert grad_check(pol, 5, rng.integers(0, 3, 5), rng, n_checks=20) <= 1e-4


def test_gnn_without_edges_is_update_of_zero_message():
    rng = np.random.default_rng(4)
    pol = GnnPolicy(7, 3, seed=4)
    x = rng.normal(size=(5, 7))
    out = gnn_forward(x, np.zeros((0, 2), int), pol)
    ref, _ = pol.update.forward(pol.params, np.concatenate([x, np.zeros((5, pol.msg_dim))], 1))
    np.testing.assert_array_equal(out, ref)


def _dense_oracle(pol, x, edges, ea):
    """Loop-per-node evaluation of F_u(x_i, sum_j F_m(x_i, x_j, e_ij))."""
    out = []
    for i in range(len(x)):
        agg = np.zeros(pol.msg_dim)
        for k, (r, s) in enumerate(edges):
            if r == i:
                m, _ = pol.message.forward(pol.params, np.concatenate([x[i], x[s], ea[k]])[None])
                agg += m[0]
        u, _ = pol.update.forward(pol.params, np.concatenate([x[i], agg])[None])
        out.append(u[0])
    return np.array(out)


def test_gnn_matches_per_node_oracle():
    rng = np.random.default_rng(5)
    pol = GnnPolicy(7, 3, seed=5)
    x = rng.normal(size=(6, 7))
    edges = rng.integers(0, 6, (14, 2))
    ea = rng.normal(size=(14, 3))
    np.testing.assert_allclose(gnn_forward(x, edges, pol, ea), _dense_oracle(pol, x, edges, ea), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_gnn_is_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    pol = GnnPolicy(7, 3, hidden=16, msg_dim=16, out_dim=16, seed=seed % 5)
    n = int(rng.integers(1, 8))
    x = rng.normal(size=(n, 7))
    edges = rng.integers(0, n, (int(rng.integers(0, 15)), 2))
    ea = rng.normal(size=(len(edges), 3))
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    # node k of the relabelled graph is node perm[k] of the original
    out = gnn_forward(x, edges, pol, ea)
    out_p = gnn_forward(x[perm], inv[edges], pol, ea)
    np.testing.assert_allclose(out_p, out[perm], rtol=0, atol=1e-12)
    # the edge order only changes the summation order
    eperm = rng.permutation(len(edges))
    np.testing.assert_allclose(gnn_forward(x, edges[eperm], pol, ea[eperm]), out, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_gnn_locality(seed):
    rng = np.random.default_rng(seed)
    pol = GnnPolicy(7, 3, hidden=16, msg_dim=16, out_dim=16, seed=1)
    n = 7
    x = rng.normal(size=(n, 7))
    edges = rng.integers(0, n, (10, 2))
    ea = rng.normal(size=(10, 3))
    out = gnn_forward(x, edges, pol, ea)
    i = 0
    hood = {i} | {int(s) for r, s in edges if r == i}
    far = [k for k in range(n) if k not in hood]
    if not far:
        return
    x2 = x.copy()
    x2[far] += rng.normal(size=(len(far), 7))
    assert np.array_equal(gnn_forward(x2, edges, pol, ea)[i], out[i])


def test_gnn_dimension_mismatch():
    pol = GnnPolicy(7, 3)
    with pytest.raises(ValueError):
        gnn_forward(np.zeros((2, 6)), np.zeros((0, 2), int), pol)


def test_categorical_sampling_frequencies():
    rng = np.random.default_rng(0)
    n = 100_000
    counts = np.bincount([sample_action(np.zeros(5), CATEGORICAL, rng)[0] for _ in range(n)], minlength=5)
    sigma = np.sqrt(n * 0.2 * 0.8)
    assert np.all(np.abs(counts - n * 0.2) <= 3 * sigma)


def test_categorical_log_prob_is_exact():
    rng = np.random.default_rng(1)
    for _ in range(50):
        z = rng.normal(size=5) * 3
        a, lp = sample_action(z, CATEGORICAL, rng)
        ref = z[a] - np.log(np.exp(z).sum())
        assert abs(lp - ref) <= 1e-12


def test_gaussian_degenerate_limit_and_errors():
    rng = np.random.default_rng(2)
    a, lp = sample_action(np.array([0.3, -0.2, np.log(1e-8), np.log(1e-8)]), GAUSSIAN, rng)
    np.testing.assert_allclose(a, [0.3, -0.2], atol=1e-6)
    assert np.isfinite(lp)
    with pytest.raises(ValueError):
        sample_action(np.array([np.inf, 0, 0, 0]), CATEGORICAL, rng)
    with pytest.raises(ValueError):
        sample_action(np.zeros(5), "beta", rng)
    assert sample_action(np.zeros(5), CATEGORICAL, np.random.default_rng(9)) == \
        sample_action(np.zeros(5), CATEGORICAL, np.random.default_rng(9))


def test_log_softmax_is_stable():
    z = np.array([1000.0, 0.0, -1000.0])
    out = log_softmax(z)
    assert np.all(np.isfinite(out)) and out[0] == pytest.approx(0.0)


@pytest.mark.parametrize("make", [lambda: CnnPolicy(seed=7), lambda: GnnPolicy(7, 3, seed=7), lambda: TabularPolicy(4)])
def test_checkpoint_round_trip(tmp_path, make):
    pol = make()
    path = tmp_path / "p.bin"
    save_policy(pol, path)
    again = load_policy(path)
    assert type(again) is type(pol) and again.config == pol.config
    for k in pol.params:
        assert np.array_equal(again.params[k], pol.params[k])
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_policy(tmp_path / "bad.bin")
