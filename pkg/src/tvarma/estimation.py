"""Nonparametric JPSD estimate from partially observed realisations.

Lag covariances are accumulated over all observed pairs at each time lag,
assembled into a block-Toeplitz covariance, and the JPSD is read off the
diagonal of that covariance in the joint Fourier basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .simulate import MaskedRealizations
from .spectral import JointBasis, Jpsd


@dataclass(frozen=True)
class LagCovariances:
    """``sigmas[D]`` estimates E[x_t x_{t+D}^T]; ``counts[D]`` holds the number of pairs per entry."""

    sigmas: np.ndarray
    counts: np.ndarray
    mean: float = 0.0

    @property
    def T(self) -> int:
        return self.sigmas.shape[0]

    @property
    def N(self) -> int:
        return self.sigmas.shape[1]

    @property
    def zero_count(self) -> np.ndarray:
        return self.counts == 0

    def diagnostics(self) -> dict:
        return {
            "zero_count_fraction": [float(z.mean()) for z in self.zero_count],
            "mean_subtracted": float(self.mean),
        }


@dataclass(frozen=True)
class CovEstimate:
    matrix: np.ndarray
    source: str = "sample"
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.source not in ("sample", "model"):
            raise ValueError(f"unknown covariance source {self.source!r}")
        S = np.asarray(self.matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("covariance must be square")
        object.__setattr__(self, "matrix", S)


class _Accumulator:
    """Running (sum, count) per lag; merging is associative so chunks can be combined in any order."""

    def __init__(self, N, T):
        self.sums = np.zeros((T, N, N))
        self.counts = np.zeros((T, N, N))

    def add(self, values, masks):
        X = np.where(masks, values, 0.0)
        Mk = masks.astype(float)
        T = X.shape[-1]
        for D in range(T):
            P = np.einsum("lit,ljt->ij", X[:, :, : T - D], X[:, :, D:])
            C = np.einsum("lit,ljt->ij", Mk[:, :, : T - D], Mk[:, :, D:])
            if D == 0:
                self.sums[D] += P
                self.counts[D] += C
            else:
                self.sums[D] += P + P.T
                self.counts[D] += C + C.T
        return self

    def merge(self, other):
        self.sums += other.sums
        self.counts += other.counts
        return self


def lag_covariances(obs: MaskedRealizations, subtract_mean: bool = False, chunk: int = 256) -> LagCovariances:
    """Pairwise-complete lag covariances.

    ``[Sigma_D]_ij`` averages ``X_it * X_ju`` over every realisation and every
    pair (t, u) with ``|t - u| = D`` where both values are observed; each entry
    is divided by its own pair count. Entries without pairs are set to 0.
    """
    mean = float(np.mean(obs.data[obs.masks])) if subtract_mean else 0.0
    values = obs.data - mean
    acc = _Accumulator(obs.N, obs.T)
    for start in range(0, obs.L, chunk):
        part = _Accumulator(obs.N, obs.T).add(values[start : start + chunk], obs.masks[start : start + chunk])
        acc.merge(part)
    with np.errstate(invalid="ignore", divide="ignore"):
        sig = np.where(acc.counts > 0, acc.sums / acc.counts, 0.0)
    sig = 0.5 * (sig + np.swapaxes(sig, 1, 2))
    empty = [D for D in range(obs.T) if not acc.counts[D].any()]
    if empty:
        warnings.warn(f"no observed pairs at lag(s) {empty}; those lag covariances are zero", stacklevel=2)
    return LagCovariances(sigmas=sig, counts=acc.counts.astype(np.int64), mean=mean)


def assemble_block_toeplitz(lc: LagCovariances) -> CovEstimate:
    """NT x NT covariance whose (t, u) block is ``Sigma_|t-u|``."""
    N, T = lc.N, lc.T
    lag = np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    blocks = lc.sigmas[lag]  # (T, T, N, N)
    S = blocks.transpose(0, 2, 1, 3).reshape(N * T, N * T)
    S = 0.5 * (S + S.T)
    return CovEstimate(S, "sample", diagnostics=lc.diagnostics())


def joint_diagonal(S: np.ndarray, basis: JointBasis) -> np.ndarray:
    """``diag(U_J^H S U_J)`` using the Kronecker factors of U_J."""
    N, T = basis.N, basis.T
    UG, UT = basis.graph.basis, basis.time.basis
    S4 = S.reshape(T, N, T, N)
    G = np.einsum("in,tiuj,jn->tun", UG, S4, UG, optimize=True)
    return np.einsum("tk,tun,uk->kn", np.conj(UT), G, UT, optimize=True).reshape(-1)


def initial_jpsd(cov: CovEstimate, basis: JointBasis | np.ndarray, shape: tuple[int, int] | None = None) -> Jpsd:
    """Real part of the diagonal of ``U_J^H Sigma U_J``; the imaginary residual is kept in diagnostics.

    ``basis`` may be a JointBasis (structured computation) or a dense U_J, in
    which case ``shape=(N, T)`` sets the layout (default ``(NT, 1)``).
    """
    S = cov.matrix
    if isinstance(basis, JointBasis):
        N, T = basis.N, basis.T
        if S.shape[0] != N * T:
            raise ValueError(f"covariance size {S.shape[0]} != N*T = {N * T}")
        d = joint_diagonal(S, basis)
    else:
        U = np.asarray(basis)
        if U.shape != S.shape:
            raise ValueError(f"basis shape {U.shape} does not match covariance {S.shape}")
        d = np.einsum("ij,ij->j", np.conj(U), S @ U)
        N, T = shape if shape is not None else (d.size, 1)
    scale = max(np.abs(d.real).max(initial=0.0), np.finfo(float).tiny)
    diag = dict(cov.diagnostics)
    diag["imag_residual"] = float(np.linalg.norm(d.imag))
    diag["imag_residual_rel"] = float(np.linalg.norm(d.imag) / (np.linalg.norm(d.real) or scale))
    diag["negative_fraction"] = float(np.mean(d.real < 0))
    return Jpsd(d.real, N, T, signed=True, diagnostics=diag)


def estimate_jpsd(obs: MaskedRealizations, basis: JointBasis, subtract_mean: bool = False) -> Jpsd:
    lc = lag_covariances(obs, subtract_mean=subtract_mean)
    return initial_jpsd(assemble_block_toeplitz(lc), basis)
