import warnings

import numpy as np
import pytest
from oracles import mc_covariance

from tvarma.errors import SingularCovarianceError
from tvarma.estimation import CovEstimate
from tvarma.graph import Graph, build_knn_graph, graph_spectrum
from tvarma.imputation import covariance_from_jpsd, jwss_baseline, mmse_impute, nme
from tvarma.pipeline import REFERENCE_ZETA
from tvarma.simulate import MaskedRealizations, generate_mask, simulate_spectral
from tvarma.spectral import JointBasis, Jpsd, dft_basis, jpsd_of


def _basis(N, T, seed=0):
    if N == 1:
        gs = graph_spectrum(Graph(np.zeros((1, 1))))
    else:
        pts = np.random.default_rng(seed).uniform(size=(N, 2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gs = graph_spectrum(build_knn_graph(pts, min(3, N - 1), 0.5))
    return JointBasis(gs, dft_basis(T))


def test_flat_jpsd_gives_identity():
    jb = _basis(3, 4)
    S = covariance_from_jpsd(Jpsd(np.ones(12), 3, 4), jb).matrix
    np.testing.assert_allclose(S, np.eye(12), atol=1e-12)


def test_structured_and_dense_covariance_agree():
    jb = _basis(4, 5, 2)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    a = covariance_from_jpsd(h, jb).matrix
    b = covariance_from_jpsd(h, jb.matrix).matrix
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a, a.T)
    assert np.linalg.eigvalsh(a).min() >= -1e-10


def test_covariance_rejects_negative_jpsd():
    with pytest.raises(ValueError):
        covariance_from_jpsd(Jpsd([-1.0, 1.0], 2, 1, signed=True), np.eye(2))


def test_model_covariance_matches_monte_carlo():
    jb = _basis(8, 16, 1)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    S = covariance_from_jpsd(h, jb).matrix
    L = 10_000
    err = np.linalg.norm(mc_covariance(simulate_spectral(h, jb, L, seed=3)) - S) / np.linalg.norm(S)
    # Gaussian sample covariance: E||S_hat - S||_F^2 = (tr(S)^2 + ||S||_F^2) / L
    expected = np.sqrt((h.values.sum() ** 2 + np.sum(h.values**2)) / L) / np.linalg.norm(h.values)
    assert 0.85 * expected <= err <= 1.15 * expected


def test_no_missing_returns_data():
    X = np.random.default_rng(0).standard_normal((2, 2, 3))
    res = mmse_impute(CovEstimate(np.eye(6) + 0.5), MaskedRealizations.fully_observed(X))
    np.testing.assert_array_equal(res.filled, X)
    assert res.ridges == [0.0, 0.0]


def test_two_by_two_example():
    # x = [observed 1, missing], covariance [[1, .9], [.9, 1]]: fill 0.9
    obs = MaskedRealizations(np.array([[[1.0, np.nan]]]), np.array([[[True, False]]]))
    res = mmse_impute(CovEstimate(np.array([[1.0, 0.9], [0.9, 1.0]])), obs, ridge=0.0)
    assert res.filled[0, 0, 1] == pytest.approx(0.9)
    assert res.filled[0, 0, 0] == 1.0


def test_identity_covariance_fills_zeros():
    X = np.random.default_rng(1).standard_normal((3, 2, 4))
    m = generate_mask(2, 4, 3, 0.5, seed=2)
    res = mmse_impute(CovEstimate(np.eye(8)), MaskedRealizations(X, m))
    np.testing.assert_allclose(res.filled[~m], 0.0, atol=1e-15)
    np.testing.assert_array_equal(res.filled[m], X[m])


def test_mean_offset_is_restored():
    obs = MaskedRealizations(np.array([[[5.0, np.nan]]]), np.array([[[True, False]]]))
    res = mmse_impute(CovEstimate(np.eye(2)), obs, mean=5.0)
    assert res.filled[0, 0, 1] == pytest.approx(5.0)


def test_singular_observed_covariance_raises():
    v = np.array([1.0, 1.0, 0.0])
    S = np.outer(v, v)
    obs = MaskedRealizations(np.array([[[1.0, 1.0, np.nan]]]), np.array([[[True, True, False]]]))
    with pytest.raises(SingularCovarianceError) as info:
        mmse_impute(CovEstimate(S), obs, ridge=0.0)
    assert info.value.suggested_ridge > 0
    # the ridge fixes it
    mmse_impute(CovEstimate(S), obs, ridge=1e-3)


def test_observed_entries_untouched_and_layout():
    jb = _basis(3, 5, 4)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    X = simulate_spectral(h, jb, 4, seed=5)
    m = generate_mask(3, 5, 4, 0.4, seed=6)
    res = mmse_impute(covariance_from_jpsd(h, jb), MaskedRealizations(X, m), truth=X)
    np.testing.assert_array_equal(res.filled[m], X[m])
    assert res.nme is not None and res.nme < 1.0
    vals = res.imputed_values()
    assert [v.size for v in vals] == [(~m[l]).sum() for l in range(4)]
    # column-stacked order: time-major, node-minor
    np.testing.assert_array_equal(vals[0], res.filled[0].T[~m[0].T])


def test_conditional_mean_against_explicit_formula():
    rng = np.random.default_rng(7)
    R = rng.standard_normal((6, 6))
    S = R @ R.T + np.eye(6)
    x = rng.standard_normal(6)
    m = np.array([True, False, True, True, False, True])
    # N=2, T=3, column stacked: vec index t*N+n
    X = x.reshape(3, 2).T
    M = m.reshape(3, 2).T
    res = mmse_impute(CovEstimate(S), MaskedRealizations(X, M), ridge=0.0)
    o, z = np.flatnonzero(m), np.flatnonzero(~m)
    expected = S[np.ix_(z, o)] @ np.linalg.solve(S[np.ix_(o, o)], x[o])
    np.testing.assert_allclose(res.filled[0].T.reshape(-1)[z], expected, rtol=1e-10)


def test_nme_examples():
    t = np.array([[1.0, 2.0]])
    miss = np.array([[True, False]])  # only the second entry is missing
    assert nme(t, t, miss) == 0.0
    assert nme(t, np.zeros_like(t), miss) == pytest.approx(1.0)
    t2 = np.array([[3.0, 4.0]])
    assert nme(t2, np.array([[0.0, 0.0]]), np.array([[False, False]])) == pytest.approx(1.0)
    assert nme(t2, np.array([[3.0, 0.0]]), np.array([[False, False]])) == pytest.approx(4 / 5)
    with pytest.raises(ValueError):
        nme(np.zeros((1, 2)), np.ones((1, 2)), np.array([[False, True]]))


def test_mmse_beats_random_linear_estimators():
    jb = _basis(2, 4, 3)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    S = covariance_from_jpsd(h, jb).matrix
    m = np.array([True, False, True, True, False, True, True, False])
    o, z = np.flatnonzero(m), np.flatnonzero(~m)
    W = S[np.ix_(z, o)] @ np.linalg.inv(S[np.ix_(o, o)])

    def risk(Wx):
        # E||x_z - W x_o||^2 under covariance S
        E = np.zeros((z.size, 8))
        E[:, z] = np.eye(z.size)
        E[:, o] -= Wx
        return np.trace(E @ S @ E.T)

    best = risk(W)
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert best <= risk(W + 0.1 * rng.standard_normal(W.shape)) + 1e-12
    # the imputer applies that same W
    X = simulate_spectral(h, jb, 1, seed=1)
    res = mmse_impute(CovEstimate(S), MaskedRealizations(X, m.reshape(4, 2).T[None]), ridge=0.0)
    np.testing.assert_allclose(res.filled[0].T.reshape(-1)[z], W @ X[0].T.reshape(-1)[o], rtol=1e-9)


def test_baseline_floor_clamps_negative_estimates():
    jb = _basis(3, 4, 0)
    X = np.random.default_rng(2).standard_normal((2, 3, 4))
    m = generate_mask(3, 4, 2, 0.25, seed=1)
    res = jwss_baseline(MaskedRealizations(X, m), jb, floor=0.01)
    h = res.diagnostics["jpsd"]
    assert h.values.min() >= 0.01
    assert res.diagnostics["jpsd_initial"].values.min() < 0.01


def test_baseline_uses_clamped_sample_jpsd():
    jb = _basis(1, 4)
    X = np.array([np.eye(4)[i][None] for i in range(4)]) * 2.0  # L=4, N=1, T=4: white, unit power
    res = jwss_baseline(MaskedRealizations.fully_observed(X), jb)
    np.testing.assert_allclose(res.diagnostics["jpsd"].values, 1.0, atol=1e-12)
    y = np.array([[[1.0, np.nan, 2.0, 3.0]]])
    a = mmse_impute(covariance_from_jpsd(res.diagnostics["jpsd"], jb), MaskedRealizations(y, np.isfinite(y)))
    np.testing.assert_allclose(a.filled[0, 0, 1], 0.0, atol=1e-12)


def test_baseline_is_model_imputation_with_the_sample_jpsd():
    from tvarma.estimation import estimate_jpsd

    jb = _basis(3, 4, 2)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    X = simulate_spectral(h, jb, 30, seed=4)
    obs = MaskedRealizations(X, generate_mask(3, 4, 30, 0.3, seed=5))
    base = jwss_baseline(obs, jb, floor=1e-3, truth=X)
    h_s = estimate_jpsd(obs, jb).clamped(1e-3)
    direct = mmse_impute(covariance_from_jpsd(h_s, jb), obs, truth=X)
    np.testing.assert_allclose(base.filled, direct.filled, atol=1e-12)
    assert base.nme == pytest.approx(direct.nme)


def test_mmse_is_optimal_over_monte_carlo_draws():
    jb = _basis(2, 4, 5)
    h = jpsd_of(REFERENCE_ZETA, jb.graph, jb.time)
    S = covariance_from_jpsd(h, jb).matrix
    M = np.array([[True, False, True, True], [False, True, True, False]])  # N=2, T=4
    L = 100_000
    X = simulate_spectral(h, jb, L, seed=8)
    obs = MaskedRealizations(X, np.broadcast_to(M, X.shape))
    res = mmse_impute(CovEstimate(S), obs, ridge=0.0)
    mse = np.mean((res.filled - X)[:, ~M] ** 2)
    m = M.T.reshape(-1)
    o, z = np.flatnonzero(m), np.flatnonzero(~m)
    V = np.stack([x.T.reshape(-1) for x in X])
    rng = np.random.default_rng(1)
    W0 = S[np.ix_(z, o)] @ np.linalg.inv(S[np.ix_(o, o)])
    for _ in range(50):
        W = W0 + 0.2 * rng.standard_normal(W0.shape) * rng.uniform(0.05, 1.0)
        other = np.mean((V[:, z] - V[:, o] @ W.T) ** 2)
        assert mse <= other + 3 * np.sqrt(2 * mse**2 / L)
