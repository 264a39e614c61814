"""Realisations of graph ARMA processes, observation masks and measurement noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DivergenceError
from .graph import GraphSpectrum
from .spectral import ArmaParams, JointBasis, Jpsd, TimeBasis, jpsd_of

STABILITY_MARGIN = 1e-6


@dataclass(frozen=True)
class MaskedRealizations:
    """L partially observed N x T realisations.

    ``masks`` is True where a value was observed. Unobserved entries of
    ``data`` hold NaN and are never read by the estimators.
    """

    data: np.ndarray
    masks: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        masks = np.array(self.masks, dtype=bool)
        if data.ndim == 2:
            data, masks = data[None], masks[None] if masks.ndim == 2 else masks
        if data.ndim != 3 or masks.shape != data.shape:
            raise ValueError(f"data {data.shape} and masks {masks.shape} must both be L x N x T")
        if not np.all(np.isfinite(data[masks])):
            raise ValueError("observed entries must be finite")
        empty = np.flatnonzero(~masks.reshape(masks.shape[0], -1).any(axis=1))
        if empty.size:
            raise ValueError(f"realization(s) {empty.tolist()} have no observed entries")
        data[~masks] = np.nan
        data.setflags(write=False)
        masks.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "masks", masks)

    @classmethod
    def fully_observed(cls, X: np.ndarray) -> "MaskedRealizations":
        X = np.asarray(X, dtype=float)
        return cls(X, np.ones(X.shape, dtype=bool))

    @classmethod
    def from_complete(cls, X: np.ndarray, masks: np.ndarray) -> "MaskedRealizations":
        return cls(np.asarray(X, dtype=float), masks)

    @property
    def L(self) -> int:
        return self.data.shape[0]

    @property
    def N(self) -> int:
        return self.data.shape[1]

    @property
    def T(self) -> int:
        return self.data.shape[2]

    @property
    def missing_count(self) -> int:
        return int((~self.masks).sum())

    def zero_filled(self) -> np.ndarray:
        return np.where(self.masks, self.data, 0.0)


def _ar_ma_polys(zeta: ArmaParams, lam: np.ndarray):
    """Per-eigenvalue lag polynomials: den[n] = [1, a_1(l_n), .., a_P(l_n)], num[n] = [b_0(l_n), .., b_Q(l_n)]."""
    lam = np.asarray(lam, dtype=float)
    pa = lam[:, None] ** np.arange(zeta.orders.K + 1)[None, :]
    pb = lam[:, None] ** np.arange(zeta.orders.M + 1)[None, :]
    den = np.hstack([np.ones((lam.size, 1)), pa @ zeta.ar_taps().T])
    num = pb @ zeta.ma_taps().T
    return num, den


def check_stability(zeta: ArmaParams, gs: GraphSpectrum, T: int, oversample: int = 8) -> float:
    """Raise DivergenceError unless the recursion is stable at every graph frequency.

    Two checks: the AR polynomial must stay away from zero on an oversampled
    frequency grid, and its roots in z must lie strictly inside the unit disc.
    Returns the largest root modulus.
    """
    _, den = _ar_ma_polys(zeta, gs.eigenvalues)
    omega = 2.0 * np.pi * np.arange(oversample * max(T, 1)) / (oversample * max(T, 1))
    phases = np.exp(-1j * np.outer(np.arange(den.shape[1]), omega))
    mags = np.abs(den @ phases)
    if mags.min() < STABILITY_MARGIN:
        n, w = np.unravel_index(np.argmin(mags), mags.shape)
        raise DivergenceError(
            f"ARMA parameters {zeta.to_dict()} put a pole on the unit circle near "
            f"lambda={gs.eigenvalues[n]:.4g}, omega={omega[w]:.4g}"
        )
    radius = 0.0
    for row in den:
        if row.size > 1 and np.any(row[1:] != 0):
            radius = max(radius, np.abs(np.roots(row)).max())
    if radius >= 1.0:
        raise DivergenceError(f"ARMA parameters {zeta.to_dict()} are unstable: spectral radius {radius:.4g} >= 1")
    return radius


def _rng(seed):
    return np.random.default_rng(seed)


def simulate_arma(
    zeta: ArmaParams,
    gs: GraphSpectrum,
    T: int,
    burn_in: int | None = None,
    seed=None,
    n_realizations: int | None = None,
) -> np.ndarray:
    """Run the graph ARMA recursion from a zero state driven by white Gaussian noise.

    The recursion is polynomial in the Laplacian, so it decouples in the graph
    Fourier domain into one scalar ARMA filter per eigenvalue. Noise is drawn
    in the vertex domain, which makes the output identical to the
    vertex-domain recursion for the same seed.

    Returns an N x T array, or L x N x T when ``n_realizations`` is given.
    The first ``burn_in`` samples (default 10 T) are discarded.
    """
    if burn_in is None:
        burn_in = 10 * T
    if burn_in < 0 or T < 1:
        raise ValueError("need T >= 1 and burn_in >= 0")
    check_stability(zeta, gs, T)
    L = 1 if n_realizations is None else int(n_realizations)
    N = gs.n_nodes
    total = T + burn_in
    w = _rng(seed).standard_normal((L, N, total))
    what = np.einsum("in,lit->nlt", gs.basis, w)
    num, den = _ar_ma_polys(zeta, gs.eigenvalues)
    xhat = np.empty_like(what)
    for n in range(N):
        xhat[n] = lfilter(num[n], den[n], what[n], axis=-1)
    x = np.einsum("in,nlt->lit", gs.basis, xhat)[:, :, burn_in:]
    limit = 1e8 * max(np.linalg.norm(zeta.b), 1e-300)
    if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > limit:
        raise DivergenceError(f"simulation diverged for ARMA parameters {zeta.to_dict()}")
    return x[0] if n_realizations is None else x


def simulate_arma_direct(zeta: ArmaParams, gs: GraphSpectrum, T: int, burn_in: int, seed=None) -> np.ndarray:
    """Vertex-domain reference recursion, one realisation. Slow; meant for cross-checks."""
    N = gs.n_nodes
    Lap = gs.basis @ np.diag(gs.eigenvalues) @ gs.basis.T
    powers = [np.eye(N)]
    for _ in range(max(zeta.orders.K, zeta.orders.M)):
        powers.append(powers[-1] @ Lap)
    Ap = [sum(c * powers[k] for k, c in enumerate(row)) for row in zeta.ar_taps()]
    Bq = [sum(c * powers[m] for m, c in enumerate(row)) for row in zeta.ma_taps()]
    total = T + burn_in
    w = _rng(seed).standard_normal((1, N, total))[0]
    x = np.zeros((N, total))
    for t in range(total):
        acc = np.zeros(N)
        for p, A in enumerate(Ap, start=1):
            if t - p >= 0:
                acc -= A @ x[:, t - p]
        for q, B in enumerate(Bq):
            if t - q >= 0:
                acc += B @ w[:, t - q]
        x[:, t] = acc
    return x[:, burn_in:]


def simulate_spectral(jpsd: Jpsd | ArmaParams, basis: JointBasis, n_realizations: int, seed=None) -> np.ndarray:
    """Exact JWSS realisations ``x = U_J diag(sqrt(h)) U_J^H w`` with white ``w``.

    Accepts either a JPSD or ARMA parameters (whose JPSD is used). Returns L x N x T.
    """
    if isinstance(jpsd, ArmaParams):
        jpsd = jpsd_of(jpsd, basis.graph, basis.time)
    if jpsd.signed and np.any(jpsd.values < 0):
        raise ValueError("spectral synthesis needs a nonnegative JPSD")
    N, T = basis.N, basis.T
    w = _rng(seed).standard_normal((n_realizations, N, T))
    what = basis.jft(w) * np.sqrt(jpsd.as_matrix())[None]
    x = basis.graph.basis @ what @ basis.time.basis.T
    return np.ascontiguousarray(x.real)


def generate_mask(N: int, T: int, L: int, missing_ratio: float, seed=None) -> np.ndarray:
    """L boolean masks, each with exactly ``round(missing_ratio * N * T)`` unobserved entries."""
    if not 0.0 <= missing_ratio < 1.0:
        raise ValueError(f"missing_ratio must lie in [0, 1), got {missing_ratio}")
    n_missing = int(round(missing_ratio * N * T))
    if n_missing >= N * T:
        raise ValueError(f"missing_ratio {missing_ratio} leaves no observed entry for N*T = {N * T}")
    rng = _rng(seed)
    masks = np.ones((L, N * T), dtype=bool)
    for l in range(L):
        masks[l, rng.permutation(N * T)[:n_missing]] = False
    return masks.reshape(L, N, T)


def add_noise(X: np.ndarray, snr_db: float, seed=None) -> np.ndarray:
    """Additive white Gaussian noise at the given SNR (dB) relative to the mean square of X.

    NaN entries (unobserved) are ignored when measuring power and stay NaN.
    ``snr_db = inf`` returns a copy of X.
    """
    X = np.asarray(X, dtype=float)
    if np.isposinf(snr_db):
        return X.copy()
    power = np.nanmean(X**2)
    if not power > 0:
        raise ValueError("signal power is zero; SNR is undefined")
    sigma2 = power / 10.0 ** (snr_db / 10.0)
    return X + np.sqrt(sigma2) * _rng(seed).standard_normal(X.shape)
