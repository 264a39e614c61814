"""Empirical checks on the geometry of the JPSD manifold and on sample-complexity rates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PoleError
from .graph import GraphSpectrum
from .spectral import POLE_TOL, ArmaParams, JointBasis, TimeBasis, jpsd_of, uv_vectors


def _grid(gs: GraphSpectrum, tb: TimeBasis):
    return np.tile(gs.eigenvalues, tb.length), np.repeat(tb.frequencies, gs.n_nodes)


def jpsd_gradient(zeta: ArmaParams, lam, omega) -> np.ndarray:
    """Gradient of ``h_zeta(lambda, omega)`` with respect to ``zeta = [a; b]``.

    Scalar (lambda, omega) gives a length-d vector; arrays give a d x n matrix
    with one column per frequency pair.
    """
    scalar = np.ndim(lam) == 0 and np.ndim(omega) == 0
    lam_f = np.atleast_1d(np.asarray(lam, dtype=float)).ravel()
    om_f = np.atleast_1d(np.asarray(omega, dtype=float)).ravel()
    lam_f, om_f = np.broadcast_arrays(lam_f, om_f)
    u, v = uv_vectors(lam_f, om_f, zeta.orders)
    den = 1.0 + v @ zeta.a
    num = u @ zeta.b
    mag = np.abs(den)
    if np.any(mag < POLE_TOL):
        i = int(np.argmin(mag))
        raise PoleError(float(lam_f[i]), float(om_f[i]), float(mag[i]))
    alpha = mag**2
    beta = np.abs(num) ** 2
    Rvv = np.einsum("ia,ib->iab", v, np.conj(v)).real
    Ruu = np.einsum("ia,ib->iab", u, np.conj(u)).real
    ga = -(beta / alpha**2)[:, None] * (v.real + Rvv @ zeta.a)
    gb = (1.0 / alpha)[:, None] * (Ruu @ zeta.b)
    R = 2.0 * np.hstack([ga, gb]).T
    return R[:, 0] if scalar else R


def gradient_matrix(zeta: ArmaParams, gs: GraphSpectrum, tb: TimeBasis) -> np.ndarray:
    """d x NT matrix whose columns are the JPSD gradients on the (lambda_n, omega_tau) grid."""
    lam, om = _grid(gs, tb)
    return jpsd_gradient(zeta, lam, om)


def tangent_lower_bound(zetas, gs: GraphSpectrum, tb: TimeBasis) -> float:
    """Minimum over the sampled parameters of the smallest singular value of ``R^T``."""
    zetas = list(zetas)
    if not zetas:
        raise ValueError("need at least one parameter sample")
    NT = gs.n_nodes * tb.length
    d = zetas[0].orders.d
    if NT <= d:
        warnings.warn(f"N*T = {NT} <= d = {d}: tangent directions can vanish", stacklevel=2)
    best = np.inf
    for z in zetas:
        R = gradient_matrix(z, gs, tb)
        if NT < d:
            return 0.0
        sv = np.linalg.svd(R.T, compute_uv=False)
        best = min(best, float(sv[-1]))
    return best


@dataclass
class CurvatureReport:
    value: float
    evaluated: int
    skipped: int
    per_sample: list = field(default_factory=list)


def _second_difference(zeta: ArmaParams, direction: np.ndarray, gs, tb, step: float) -> np.ndarray:
    z = zeta.zeta
    hp = jpsd_of(ArmaParams.from_vector(zeta.orders, z + step * direction), gs, tb).values
    h0 = jpsd_of(zeta, gs, tb).values
    hm = jpsd_of(ArmaParams.from_vector(zeta.orders, z - step * direction), gs, tb).values
    return (hp - 2.0 * h0 + hm) / step**2


def curvature_upper_bound(
    zetas, directions, gs: GraphSpectrum, tb: TimeBasis, step: float = 1e-3, report: bool = False
):
    """Max over (zeta, unit direction) samples of ``sqrt(sum_i h''_i^2)``, second derivatives by central differences.

    Samples that hit a pole are skipped and counted.
    """
    vals, skipped = [], 0
    for zeta in zetas:
        for u in directions:
            u = np.asarray(u, dtype=float)
            nrm = np.linalg.norm(u)
            if nrm == 0:
                raise ValueError("directions must be nonzero")
            try:
                hpp = _second_difference(zeta, u / nrm, gs, tb, step)
            except PoleError:
                skipped += 1
                continue
            vals.append(float(np.linalg.norm(hpp)))
    if skipped:
        warnings.warn(f"{skipped} curvature sample(s) skipped at poles", stacklevel=2)
    value = max(vals) if vals else float("nan")
    if report:
        return CurvatureReport(value=value, evaluated=len(vals), skipped=skipped, per_sample=vals)
    return value


@dataclass
class ManifoldProbe:
    zeta: ArmaParams
    R: np.ndarray
    tangent_lower_estimate: float
    curvature_upper_estimate: float


def probe_manifold(zeta: ArmaParams, gs: GraphSpectrum, tb: TimeBasis, n_directions: int = 16, step: float = 1e-3, seed=0) -> ManifoldProbe:
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, zeta.orders.d))
    R = gradient_matrix(zeta, gs, tb)
    return ManifoldProbe(
        zeta=zeta,
        R=R,
        tangent_lower_estimate=tangent_lower_bound([zeta], gs, tb),
        curvature_upper_estimate=curvature_upper_bound([zeta], dirs, gs, tb, step=step),
    )


# -- convergence-rate studies ------------------------------------------------


@dataclass
class RateStudy:
    """Per-L mean and upper quantile of one error measure, with the fitted log-log slope."""

    error: str
    L_grid: list
    mean: list
    std: list
    quantile: list
    delta: float
    slope: float | None
    intercept: float | None
    n_trials: list
    excluded: list

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.L_grid, self.L_grid[1:])):
            raise ValueError("L_grid must be strictly increasing")

    def to_rows(self) -> list[dict]:
        return [
            {"L": L, "mean_err": m, "quantile_err": q}
            for L, m, q in zip(self.L_grid, self.mean, self.quantile)
        ]

    def summary(self) -> dict:
        return {
            "error": self.error,
            "slope": self.slope,
            "intercept": self.intercept,
            "delta": self.delta,
            "L_grid": list(self.L_grid),
            "mean": list(self.mean),
            "std": list(self.std),
            "quantile": list(self.quantile),
            "n_trials": list(self.n_trials),
            "excluded": list(self.excluded),
        }


def loglog_slope(L_grid, values) -> tuple[float | None, float | None]:
    """Least-squares slope and intercept of log(values) against log(L); None for fewer than two points."""
    L = np.asarray(L_grid, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return None, None
    slope, intercept = np.polyfit(np.log(L[ok]), np.log(y[ok]), 1)
    return float(slope), float(intercept)


def summarise_rates(name: str, L_grid, per_L_errors, delta: float, excluded=None) -> RateStudy:
    means, stds, quants, counts = [], [], [], []
    for errs in per_L_errors:
        e = np.asarray(errs, dtype=float)
        if e.size == 0:
            means.append(float("nan"))
            stds.append(float("nan"))
            quants.append(float("nan"))
        else:
            means.append(float(e.mean()))
            stds.append(float(e.std()))
            quants.append(float(np.quantile(e, 1.0 - delta)))
        counts.append(int(e.size))
    slope, icpt = loglog_slope(L_grid, means)
    return RateStudy(
        error=name,
        L_grid=list(L_grid),
        mean=means,
        std=stds,
        quantile=quants,
        delta=delta,
        slope=slope,
        intercept=icpt,
        n_trials=counts,
        excluded=list(excluded or [0] * len(L_grid)),
    )


ERROR_KINDS = ("jpsd_initial", "jpsd", "jpsd_rel", "params", "a_rel", "b_rel", "imputation")


def rate_study(
    errors,
    process,
    L_grid,
    trials: int = 10,
    delta: float = 0.1,
    seed: int = 0,
) -> dict[str, RateStudy]:
    """Monte-Carlo error-versus-L study for a synthetic process.

    ``process`` is a :class:`tvarma.pipeline.SyntheticProcess`. For every L in
    ``L_grid`` and every trial, fresh realisations are drawn, the JPSD is
    estimated and fitted, and each requested error measure is recorded.
    Trials whose fit does not converge are excluded and counted.
    """
    from .pipeline import trial_errors

    errors = [errors] if isinstance(errors, str) else list(errors)
    for e in errors:
        if e not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {e!r}; choose from {ERROR_KINDS}")
    L_grid = [int(L) for L in L_grid]
    per = {e: [] for e in errors}
    excluded = []
    for L in L_grid:
        bucket = {e: [] for e in errors}
        bad = 0
        for r in range(trials):
            try:
                out = trial_errors(process, L, seed=(seed, L, r))
            except NumericalError:
                bad += 1
                continue
            if out["status"] != "converged":
                bad += 1
                continue
            for e in errors:
                bucket[e].append(out[e])
        for e in errors:
            per[e].append(bucket[e])
        excluded.append(bad)
    return {e: summarise_rates(e, L_grid, per[e], delta, excluded) for e in errors}
