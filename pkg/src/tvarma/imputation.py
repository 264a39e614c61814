"""Model covariances from JPSDs, conditional-mean imputation and the NME metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import SingularCovarianceError
from .estimation import CovEstimate, estimate_jpsd
from .simulate import MaskedRealizations
from .spectral import JointBasis, Jpsd


@dataclass
class ImputationResult:
    filled: np.ndarray
    masks: np.ndarray
    ridges: list = field(default_factory=list)
    per_realization_sq_err: np.ndarray | None = None
    nme: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def imputed_values(self) -> list[np.ndarray]:
        """Imputed entries of each realisation in column-stacked order."""
        return [self.filled[l].T[~self.masks[l].T] for l in range(self.filled.shape[0])]


def covariance_from_jpsd(h: Jpsd, basis: JointBasis | np.ndarray) -> CovEstimate:
    """``Re(U_J diag(h) U_J^H)``, symmetrised."""
    if np.any(h.values < 0):
        raise ValueError("covariance_from_jpsd needs a nonnegative JPSD; clamp sample estimates first")
    if isinstance(basis, JointBasis):
        N, T = basis.N, basis.T
        if h.values.size != N * T:
            raise ValueError(f"JPSD length {h.values.size} != N*T = {N * T}")
        UG, UT = basis.graph.basis, basis.time.basis
        hk = h.values.reshape(T, N)
        C = np.einsum("tk,kn,uk->tun", UT, hk, np.conj(UT), optimize=True).real
        S = np.einsum("in,tun,jn->tiuj", UG, C, UG, optimize=True).reshape(N * T, N * T)
    else:
        U = np.asarray(basis)
        S = ((U * h.values) @ np.conj(U).T).real
    return CovEstimate(0.5 * (S + S.T), "model")


def default_ridge(Syy: np.ndarray) -> float:
    return 1e-8 * float(np.trace(Syy)) / Syy.shape[0]


def _vec_mask(mask):
    return mask.T.reshape(-1)


def mmse_impute(
    cov: CovEstimate,
    obs: MaskedRealizations,
    ridge: float | None = None,
    mean: float = 0.0,
    truth: np.ndarray | None = None,
) -> ImputationResult:
    """Conditional-mean fill-in ``z = S_zy (S_yy + ridge I)^{-1} (y - mean) + mean`` per realisation.

    ``ridge=None`` uses ``1e-8 * trace(S_yy) / |y|``. Observed entries are copied through unchanged.
    """
    S = cov.matrix
    N, T = obs.N, obs.T
    if S.shape != (N * T, N * T):
        raise ValueError(f"covariance is {S.shape}, realisations need {(N * T, N * T)}")
    filled = np.array(obs.data, dtype=float)
    ridges = []
    for l in range(obs.L):
        m = _vec_mask(obs.masks[l])
        if m.all():
            ridges.append(0.0)
            continue
        o_idx = np.flatnonzero(m)
        z_idx = np.flatnonzero(~m)
        Syy = S[np.ix_(o_idx, o_idx)]
        r = default_ridge(Syy) if ridge is None else float(ridge)
        if r < 0:
            raise ValueError("ridge must be nonnegative")
        ridges.append(r)
        K = Syy + r * np.eye(o_idx.size)
        try:
            factor = cho_factor(K, lower=True)
        except LinAlgError:
            cond = np.linalg.cond(K)
            raise SingularCovarianceError(
                f"observed covariance of realization {l} is not positive definite", cond, 1e-6 * np.trace(Syy) / o_idx.size
            ) from None
        dg = np.abs(np.diag(factor[0]))
        cond_est = (dg.max() / dg.min()) ** 2 if dg.min() > 0 else np.inf
        if cond_est > 1e15:
            raise SingularCovarianceError(
                f"observed covariance of realization {l} is numerically singular", cond_est, 1e-6 * np.trace(Syy) / o_idx.size
            )
        y = filled[l].T.reshape(-1)[o_idx] - mean
        z = S[np.ix_(z_idx, o_idx)] @ cho_solve(factor, y) + mean
        flat = filled[l].T.reshape(-1).copy()
        flat[z_idx] = z
        filled[l] = flat.reshape(T, N).T
    result = ImputationResult(filled=filled, masks=np.array(obs.masks), ridges=ridges)
    if truth is not None:
        score(result, truth)
    return result


def nme(truth: np.ndarray, estimate: np.ndarray, masks: np.ndarray) -> float:
    """Normalised mean error over the unobserved entries (``masks`` False) of all realisations."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    miss = ~np.asarray(masks, dtype=bool)
    den = float(np.sum(truth[miss] ** 2))
    if den == 0.0:
        raise ValueError("NME is undefined: the true missing values are all zero")
    return float(np.sqrt(np.sum((truth[miss] - estimate[miss]) ** 2) / den))


def score(result: ImputationResult, truth: np.ndarray) -> ImputationResult:
    truth = np.asarray(truth, dtype=float)
    miss = ~result.masks
    err = np.where(miss, truth - result.filled, 0.0)
    result.per_realization_sq_err = np.sum(err**2, axis=(1, 2))
    if miss.any():
        result.nme = nme(truth, result.filled, result.masks)
    return result


def jwss_baseline(
    obs: MaskedRealizations,
    basis: JointBasis,
    floor: float | None = None,
    subtract_mean: bool = False,
    ridge: float | None = None,
    truth: np.ndarray | None = None,
) -> ImputationResult:
    """Nonparametric baseline: sample JPSD clamped at ``floor`` (default ``1e-8 * max h``), no model fit."""
    h_tilde = estimate_jpsd(obs, basis, subtract_mean=subtract_mean)
    if floor is None:
        floor = 1e-8 * max(float(h_tilde.values.max()), np.finfo(float).tiny)
    h = h_tilde.clamped(floor)
    mean = h_tilde.diagnostics.get("mean_subtracted", 0.0)
    result = mmse_impute(covariance_from_jpsd(h, basis), obs, ridge=ridge, mean=mean, truth=truth)
    result.diagnostics.update(jpsd=h, jpsd_initial=h_tilde, floor=floor)
    return result
