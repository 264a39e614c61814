"""Time and joint time-vertex Fourier machinery, ARMA frequency responses and JPSDs.

Time-vertex signals are ``N x T`` arrays. Vectorisation is column stacking
(node index fastest), so entry ``(n, t)`` sits at ``t * N + n`` and the joint
basis is ``kron(U_T, U_G)``. JPSD vectors use the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import PoleError
from .graph import GraphSpectrum

POLE_TOL = 1e-12


@dataclass(frozen=True)
class TimeBasis:
    """Normalised DFT basis ``U_T[t, tau] = exp(1j * omega_tau * t) / sqrt(T)``.

    Time indices in the formula run 1..T, so storage row ``s`` uses ``t = s + 1``.
    """

    basis: np.ndarray
    frequencies: np.ndarray

    @property
    def length(self) -> int:
        return self.frequencies.shape[0]


def dft_basis(T: int) -> TimeBasis:
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    T = int(T)
    omega = 2.0 * np.pi * np.arange(T) / T
    t = np.arange(1, T + 1)
    U = np.exp(1j * np.outer(t, omega)) / np.sqrt(T)
    U.setflags(write=False)
    omega.setflags(write=False)
    return TimeBasis(basis=U, frequencies=omega)


def cycle_laplacian(T: int) -> np.ndarray:
    """Laplacian ``2I - S - S^T`` of the symmetrised directed ring on T nodes."""
    S = np.roll(np.eye(T), 1, axis=1)
    return 2.0 * np.eye(T) - S - S.T


@dataclass(frozen=True)
class JointBasis:
    """Kronecker-structured joint Fourier basis ``U_J = U_T (x) U_G``.

    Transforms use the factors; ``matrix`` builds the dense ``NT x NT`` form on demand.
    """

    graph: GraphSpectrum
    time: TimeBasis

    @property
    def N(self) -> int:
        return self.graph.n_nodes

    @property
    def T(self) -> int:
        return self.time.length

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.kron(self.time.basis, self.graph.basis)

    @cached_property
    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(lambda_i, omega_i) for every joint index i = tau * N + n."""
        lam = np.tile(self.graph.eigenvalues, self.T)
        omega = np.repeat(self.time.frequencies, self.N)
        return lam, omega

    def jft(self, X: np.ndarray) -> np.ndarray:
        return jft(X, self.graph, self.time)

    def ijft(self, Xhat: np.ndarray) -> np.ndarray:
        return self.graph.basis @ Xhat @ self.time.basis.T


def joint_basis(gs: GraphSpectrum, tb: TimeBasis) -> np.ndarray:
    return np.kron(tb.basis, gs.basis)


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation of an N x T (or L x N x T) array."""
    X = np.asarray(X)
    if X.ndim == 2:
        return X.T.reshape(-1)
    return np.swapaxes(X, -1, -2).reshape(X.shape[0], -1)


def unvec(x: np.ndarray, N: int, T: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        return x.reshape(T, N).T
    return np.swapaxes(x.reshape(x.shape[0], T, N), -1, -2)


def jft(X: np.ndarray, gs: GraphSpectrum, tb: TimeBasis) -> np.ndarray:
    """Joint Fourier transform ``U_G^T X conj(U_T)``; leading batch axes allowed."""
    X = np.asarray(X)
    if X.shape[-2:] != (gs.n_nodes, tb.length):
        raise ValueError(f"signal shape {X.shape[-2:]} does not match (N, T) = ({gs.n_nodes}, {tb.length})")
    return gs.basis.T @ X @ np.conj(tb.basis)


def joint_laplacian(gs: GraphSpectrum, tb: TimeBasis) -> np.ndarray:
    N, T = gs.n_nodes, tb.length
    LG = gs.basis @ np.diag(gs.eigenvalues) @ gs.basis.T
    LG = 0.5 * (LG + LG.T)
    return np.kron(cycle_laplacian(T), np.eye(N)) + np.kron(np.eye(T), LG)


@dataclass(frozen=True)
class ModelOrders:
    """Orders of the graph ARMA recursion: P AR taps, K-th order polynomials in the
    Laplacian for AR taps, Q MA taps beyond lag 0, M-th order polynomials for MA taps."""

    P: int
    K: int
    Q: int
    M: int

    def __post_init__(self):
        for name in ("P", "K", "Q", "M"):
            v = getattr(self, name)
            if int(v) != v:
                raise ValueError(f"{name} must be an integer")
        if self.P < 1 or self.K < 0 or self.Q < 0 or self.M < 0:
            raise ValueError(f"invalid orders {self}: need P >= 1 and K, Q, M >= 0")

    @property
    def n_a(self) -> int:
        return self.P * (self.K + 1)

    @property
    def n_a_ext(self) -> int:
        return (self.P + 1) * (self.K + 1)

    @property
    def n_b(self) -> int:
        return (self.Q + 1) * (self.M + 1)

    @property
    def d(self) -> int:
        return self.n_a + self.n_b

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.P, self.K, self.Q, self.M)


@dataclass(frozen=True)
class ArmaParams:
    """Coefficients ``a_pk`` (p = 1..P, k = 0..K) and ``b_qm`` (q = 0..Q, m = 0..M),
    both flattened with the time-lag index major."""

    orders: ModelOrders
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.size != self.orders.n_a:
            raise ValueError(f"a has length {a.size}, orders {self.orders.as_tuple()} need {self.orders.n_a}")
        if b.size != self.orders.n_b:
            raise ValueError(f"b has length {b.size}, orders {self.orders.as_tuple()} need {self.orders.n_b}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("ARMA coefficients must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_vector(cls, orders: ModelOrders, zeta: np.ndarray) -> "ArmaParams":
        zeta = np.asarray(zeta, dtype=float)
        return cls(orders, zeta[: orders.n_a], zeta[orders.n_a :])

    @property
    def zeta(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def ar_taps(self) -> np.ndarray:
        """``a`` as a P x (K+1) array, row p-1 holding the polynomial of lag p."""
        return self.a.reshape(self.orders.P, self.orders.K + 1)

    def ma_taps(self) -> np.ndarray:
        return self.b.reshape(self.orders.Q + 1, self.orders.M + 1)

    def to_dict(self) -> dict:
        return {
            "orders": dict(zip("PKQM", self.orders.as_tuple())),
            "a": [float(x) for x in self.a],
            "b": [float(x) for x in self.b],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaParams":
        o = d["orders"]
        return cls(ModelOrders(o["P"], o["K"], o["Q"], o["M"]), d["a"], d["b"])


@dataclass(frozen=True)
class Jpsd:
    """JPSD samples ``h[tau * N + n] = h(lambda_n, omega_tau)``.

    ``signed`` marks sample estimates, which may carry small negative values.
    """

    values: np.ndarray
    N: int
    T: int
    signed: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = np.array(self.values, dtype=float).reshape(-1)
        if h.size != self.N * self.T:
            raise ValueError(f"JPSD length {h.size} != N*T = {self.N * self.T}")
        if not self.signed and np.any(h < 0):
            raise ValueError("unsigned JPSD has negative entries")
        h.setflags(write=False)
        object.__setattr__(self, "values", h)

    def as_matrix(self) -> np.ndarray:
        """N x T view, entry (n, tau)."""
        return self.values.reshape(self.T, self.N).T

    def clamped(self, floor: float) -> "Jpsd":
        return Jpsd(np.maximum(self.values, floor), self.N, self.T, signed=False)


def _lag_poly_vectors(lam, omega, lags, degree):
    """Rows ``lam**k * exp(-1j * omega * p)`` for p in ``lags`` (major), k = 0..degree."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    pw = lam[:, None] ** np.arange(degree + 1)[None, :]
    ph = np.exp(-1j * omega[:, None] * np.asarray(lags)[None, :])
    return (ph[:, :, None] * pw[:, None, :]).reshape(lam.shape[0], -1)


def uv_vectors(lam, omega, orders: ModelOrders, form: str = "original"):
    """Constant vectors (u, v) such that ``H = b^H u / (1 + a^H v)``.

    Entries are the conjugates of ``lam**k * exp(1j * omega * p)``. The
    ``extended`` form prepends the p = 0 block to v. Scalar inputs give 1-D
    vectors, array inputs give one row per grid point.
    """
    if form not in ("original", "extended"):
        raise ValueError(f"unknown form {form!r}")
    scalar = np.ndim(lam) == 0 and np.ndim(omega) == 0
    lam_b, omega_b = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(omega, dtype=float))
    lam_f, omega_f = lam_b.reshape(-1), omega_b.reshape(-1)
    p0 = 0 if form == "extended" else 1
    v = _lag_poly_vectors(lam_f, omega_f, np.arange(p0, orders.P + 1), orders.K)
    u = _lag_poly_vectors(lam_f, omega_f, np.arange(0, orders.Q + 1), orders.M)
    if scalar:
        return u[0], v[0]
    return u, v


def _response_parts(zeta: ArmaParams, lam, omega):
    u, v = uv_vectors(lam, omega, zeta.orders)
    num = np.atleast_2d(u) @ zeta.b
    den = 1.0 + np.atleast_2d(v) @ zeta.a
    return num, den


def _check_poles(den, lam, omega):
    mag = np.abs(den)
    bad = np.flatnonzero(mag < POLE_TOL)
    if bad.size:
        i = bad[0]
        raise PoleError(float(np.ravel(lam)[i]), float(np.ravel(omega)[i]), float(mag[i]))


def arma_freq_response(zeta: ArmaParams, lam, omega):
    """``H(lambda, omega)``; scalar in, scalar out, arrays broadcast."""
    lam_b, omega_b = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(omega, dtype=float))
    num, den = _response_parts(zeta, lam_b.reshape(-1), omega_b.reshape(-1))
    _check_poles(den, lam_b, omega_b)
    H = num / den
    if lam_b.ndim == 0:
        return complex(H[0])
    return H.reshape(lam_b.shape)


def jpsd_of(zeta: ArmaParams, gs: GraphSpectrum, tb: TimeBasis) -> Jpsd:
    N, T = gs.n_nodes, tb.length
    lam = np.tile(gs.eigenvalues, T)
    omega = np.repeat(tb.frequencies, N)
    H = arma_freq_response(zeta, lam, omega)
    return Jpsd(np.abs(H) ** 2, N, T)
