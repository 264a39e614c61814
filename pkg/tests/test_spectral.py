import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dft_matrix, laplacian_eig, response_direct

from tvarma.errors import PoleError
from tvarma.graph import Graph, build_knn_graph, graph_spectrum
from tvarma.spectral import (
    ArmaParams,
    JointBasis,
    Jpsd,
    ModelOrders,
    arma_freq_response,
    cycle_laplacian,
    dft_basis,
    jft,
    joint_basis,
    joint_laplacian,
    jpsd_of,
    unvec,
    uv_vectors,
    vec,
)

REF = ArmaParams(ModelOrders(1, 1, 1, 0), [-0.5, 0.5], [0.5, 0.5])


def _spectrum(N, seed=0):
    if N == 1:
        return graph_spectrum(Graph(np.zeros((1, 1))))
    pts = np.random.default_rng(seed).uniform(size=(N, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return graph_spectrum(build_knn_graph(pts, min(3, N - 1), 0.5))


def test_dft_small_cases():
    tb = dft_basis(1)
    np.testing.assert_allclose(tb.basis, [[1]])
    np.testing.assert_allclose(tb.frequencies, [0])
    tb = dft_basis(2)
    np.testing.assert_allclose(tb.basis, np.array([[1, -1], [1, 1]]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(tb.frequencies, [0, np.pi])


def test_dft_matches_definition_and_unitary():
    for T in (3, 16, 64):
        U = dft_basis(T).basis
        np.testing.assert_allclose(U, dft_matrix(T), atol=1e-13)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(T), atol=1e-10)


def test_dft_rejects_zero():
    with pytest.raises(ValueError):
        dft_basis(0)


def test_joint_basis_degenerate_factors():
    tb = dft_basis(5)
    np.testing.assert_allclose(joint_basis(_spectrum(1), tb), tb.basis)
    gs = _spectrum(4)
    np.testing.assert_allclose(joint_basis(gs, dft_basis(1)), gs.basis)


def test_joint_basis_unitary_and_isometry():
    gs, tb = _spectrum(3), dft_basis(4)
    UJ = joint_basis(gs, tb)
    np.testing.assert_allclose(UJ.conj().T @ UJ, np.eye(12), atol=1e-9)
    x = np.random.default_rng(0).standard_normal(12)
    assert abs(np.linalg.norm(UJ.conj().T @ x) - np.linalg.norm(x)) < 1e-10


def test_vec_layout():
    X = np.arange(6).reshape(2, 3)  # N=2, T=3
    np.testing.assert_array_equal(vec(X), [0, 3, 1, 4, 2, 5])
    np.testing.assert_array_equal(unvec(vec(X), 2, 3), X)


def test_jft_zero_and_constant():
    gs, tb = _spectrum(5), dft_basis(8)
    np.testing.assert_array_equal(jft(np.zeros((5, 8)), gs, tb), 0)
    c = 1.7
    Xh = jft(np.full((5, 8), c), gs, tb)
    assert abs(abs(Xh[0, 0]) - c * np.sqrt(40)) < 1e-10
    rest = Xh.copy()
    rest[0, 0] = 0
    assert np.abs(rest).max() < 1e-10


def test_jft_consistent_with_dense_basis():
    gs, tb = _spectrum(4), dft_basis(8)
    X = np.random.default_rng(1).standard_normal((4, 8))
    UJ = joint_basis(gs, tb)
    np.testing.assert_allclose(vec(jft(X, gs, tb)), UJ.conj().T @ vec(X), atol=1e-12)
    jb = JointBasis(gs, tb)
    np.testing.assert_allclose(jb.ijft(jb.jft(X)).real, X, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(N=st.integers(1, 16), T=st.integers(1, 16), seed=st.integers(0, 10**6))
def test_jft_parseval(N, T, seed):
    gs, tb = _spectrum(N, seed), dft_basis(T)
    X = np.random.default_rng(seed).standard_normal((N, T))
    assert abs(np.linalg.norm(jft(X, gs, tb)) - np.linalg.norm(X)) <= 1e-10 * max(1.0, np.linalg.norm(X))


def test_joint_laplacian_degenerate_factors():
    gs = _spectrum(4)
    np.testing.assert_allclose(joint_laplacian(gs, dft_basis(1)), (gs.basis * gs.eigenvalues) @ gs.basis.T, atol=1e-12)
    np.testing.assert_allclose(joint_laplacian(_spectrum(1), dft_basis(6)), cycle_laplacian(6), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(N=st.integers(1, 16), T=st.integers(1, 16), seed=st.integers(0, 10**6))
def test_joint_laplacian_diagonalised(N, T, seed):
    gs, tb = _spectrum(N, seed), dft_basis(T)
    UJ = joint_basis(gs, tb)
    D = UJ.conj().T @ joint_laplacian(gs, tb) @ UJ
    off = D - np.diag(np.diag(D))
    assert np.linalg.norm(off) ** 2 <= 1e-8 * max(np.linalg.norm(D) ** 2, 1e-300) + 1e-20


def test_uv_examples():
    o = ModelOrders(1, 1, 1, 0)
    u, v = uv_vectors(0.0, 0.0, o)
    np.testing.assert_allclose(v, [1, 0])
    u, v = uv_vectors(2.0, np.pi / 2, o)
    e = np.exp(-1j * np.pi / 2)
    np.testing.assert_allclose(v, [e, 2 * e], atol=1e-15)
    np.testing.assert_allclose(u, [1, e], atol=1e-15)
    u, v = uv_vectors(0.7, 1.3, o, form="extended")
    assert v.shape == (4,)
    np.testing.assert_allclose(v[:2], [1, 0.7])


def test_uv_batch_matches_scalar():
    o = ModelOrders(2, 1, 1, 2)
    lam = np.array([0.1, 0.9, 1.4])
    om = np.array([0.0, 2.0, -1.0])
    U, V = uv_vectors(lam, om, o, form="extended")
    for i in range(3):
        u, v = uv_vectors(lam[i], om[i], o, form="extended")
        np.testing.assert_allclose(U[i], u)
        np.testing.assert_allclose(V[i], v)


def test_response_reference_value():
    assert arma_freq_response(REF, 0.0, 0.0) == pytest.approx(2.0)
    gs, tb = _spectrum(1), dft_basis(1)
    assert jpsd_of(REF, gs, tb).values[0] == pytest.approx(4.0)


def test_pure_ma_response():
    z = ArmaParams(ModelOrders(1, 0, 2, 1), [0.0], [1, 0.2, -0.3, 0.1, 0.5, 0.0])
    u, _ = uv_vectors(0.8, 0.4, z.orders)
    assert arma_freq_response(z, 0.8, 0.4) == pytest.approx(u @ z.b)


def test_response_against_direct_sums_and_conjugate_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(50):
        P, K, Q, M = rng.integers(1, 3), rng.integers(0, 3), rng.integers(0, 3), rng.integers(0, 3)
        o = ModelOrders(int(P), int(K), int(Q), int(M))
        a = 0.2 * rng.standard_normal(o.n_a)
        b = rng.standard_normal(o.n_b)
        z = ArmaParams(o, a, b)
        lam, om = rng.uniform(0, 2), rng.uniform(-np.pi, np.pi)
        H = arma_freq_response(z, lam, om)
        assert H == pytest.approx(response_direct(a, b, *o.as_tuple(), lam, om), rel=1e-12)
        assert arma_freq_response(z, lam, -om) == pytest.approx(np.conj(H), rel=1e-12)


def test_pole_reported():
    z = ArmaParams(ModelOrders(1, 0, 0, 0), [-1.0], [1.0])
    with pytest.raises(PoleError) as info:
        arma_freq_response(z, 0.3, 0.0)
    assert info.value.omega == 0.0 and info.value.lam == pytest.approx(0.3)


def test_jpsd_layout_and_nonnegativity():
    gs, tb = _spectrum(5), dft_basis(6)
    h = jpsd_of(REF, gs, tb)
    H = h.as_matrix()
    for n in range(5):
        for t in range(6):
            assert H[n, t] == pytest.approx(abs(arma_freq_response(REF, gs.eigenvalues[n], tb.frequencies[t])) ** 2, rel=1e-12)
    assert np.all(h.values >= 0)
    zero = jpsd_of(ArmaParams(REF.orders, REF.a, [0, 0]), gs, tb)
    assert np.all(zero.values == 0)


def test_jpsd_against_independent_eig():
    pts = np.random.default_rng(2).uniform(size=(6, 2))
    g = build_knn_graph(pts, 3, 0.5)
    lam, _ = laplacian_eig(g.weights)
    T = 8
    h = jpsd_of(REF, graph_spectrum(g), dft_basis(T)).as_matrix()
    for t in range(T):
        w = 2 * np.pi * t / T
        ref = [abs(response_direct(REF.a, REF.b, 1, 1, 1, 0, l, w)) ** 2 for l in lam]
        np.testing.assert_allclose(h[:, t], ref, rtol=1e-10, atol=1e-12)


def test_jpsd_matches_monte_carlo_covariance_diagonal():
    from oracles import mc_covariance

    from tvarma.simulate import simulate_spectral

    gs, tb = _spectrum(5, seed=4), dft_basis(16)
    jb = JointBasis(gs, tb)
    h = jpsd_of(REF, gs, tb)
    X = simulate_spectral(REF, jb, 100_000, seed=11)
    S = mc_covariance(X)
    d = np.real(np.einsum("ij,ij->j", jb.matrix.conj(), S @ jb.matrix))
    assert np.linalg.norm(d - h.values) / np.linalg.norm(h.values) <= 0.05


def test_model_orders_and_params_validation():
    assert REF.orders.d == 4
    with pytest.raises(ValueError):
        ModelOrders(0, 0, 0, 0)
    with pytest.raises(ValueError):
        ArmaParams(REF.orders, [1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        Jpsd([-1.0, 1.0], 2, 1)
    assert Jpsd([-1.0, 1.0], 2, 1, signed=True).clamped(0.5).values.tolist() == [0.5, 1.0]
    d = REF.to_dict()
    back = ArmaParams.from_dict(d)
    assert back.orders == REF.orders
    np.testing.assert_array_equal(back.a, REF.a)
    np.testing.assert_array_equal(back.b, REF.b)
