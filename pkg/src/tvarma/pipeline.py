"""End-to-end learning and imputation, hyperparameter tuning and experiment sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NumericalError, StageError
from .estimation import estimate_jpsd
from .fit import FitConfig, FitResult, WeightSpec, fit_arma
from .graph import Graph, build_knn_graph, default_sigma, graph_spectrum
from .imputation import ImputationResult, covariance_from_jpsd, jwss_baseline, mmse_impute, nme, score
from .simulate import MaskedRealizations, add_noise, generate_mask, simulate_arma, simulate_spectral
from .spectral import ArmaParams, JointBasis, Jpsd, ModelOrders, dft_basis, jpsd_of

REFERENCE_ORDERS = ModelOrders(1, 1, 1, 0)
REFERENCE_ZETA = ArmaParams(REFERENCE_ORDERS, [-0.5, 0.5], [0.5, 0.5])


def station_graph(N: int = 33, k: int = 5, seed: int = 0, lambda_max: float = 2.5) -> tuple[Graph, np.ndarray, float]:
    """Synthetic stand-in for a sensor network: N random sites in the unit square, k-NN Gaussian graph.

    The kernel width is the scale-free default, which keeps the graph well connected; the weights are
    then multiplied by one constant so the largest Laplacian eigenvalue equals ``lambda_max``. The
    eigenvectors are unchanged by that rescaling. Returns ``(graph, coordinates, sigma)``.
    """
    pts = np.random.default_rng(seed).uniform(0.0, 1.0, size=(N, 2))
    sigma = default_sigma(cdist(pts, pts), k)
    g = build_knn_graph(pts, k, sigma)
    top = graph_spectrum(g).eigenvalues[-1]
    if not top > 0:
        raise ValueError("k-NN graph has no edges")
    return Graph(g.weights * (lambda_max / top)), pts, sigma


@dataclass
class SyntheticProcess:
    """Ground truth and acquisition settings for Monte-Carlo experiments."""

    zeta: ArmaParams
    basis: JointBasis
    generator: str = "spectral"
    burn_in: int | None = None
    snr_db: float = float("inf")
    missing_ratio: float = 0.0
    fit: FitConfig = field(default_factory=FitConfig)
    orders: ModelOrders | None = None
    test_missing_ratio: float = 0.3
    test_seed: int = 12345

    def __post_init__(self):
        if self.generator not in ("spectral", "recursion"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.orders is None:
            self.orders = self.zeta.orders

    @property
    def true_jpsd(self) -> Jpsd:
        return jpsd_of(self.zeta, self.basis.graph, self.basis.time)

    def realizations(self, L: int, seed) -> np.ndarray:
        if self.generator == "spectral":
            return simulate_spectral(self.zeta, self.basis, L, seed=seed)
        return simulate_arma(self.zeta, self.basis.graph, self.basis.T, burn_in=self.burn_in, seed=seed, n_realizations=L)

    def observe(self, X: np.ndarray, seed) -> MaskedRealizations:
        ss = np.random.SeedSequence(_entropy(seed))
        s_noise, s_mask = ss.spawn(2)
        Y = add_noise(X, self.snr_db, seed=s_noise)
        masks = generate_mask(self.basis.N, self.basis.T, X.shape[0], self.missing_ratio, seed=s_mask)
        return MaskedRealizations.from_complete(Y, masks)


def _entropy(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy if not seed.spawn_key else seed.generate_state(4).tolist()
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return None if seed is None else int(seed)


def _rng(seed):
    return np.random.default_rng(_entropy(seed))


def align_sign(b: np.ndarray, b_ref: np.ndarray) -> np.ndarray:
    """b or -b, whichever is closer to ``b_ref`` (both give the same JPSD)."""
    return b if np.linalg.norm(b - b_ref) <= np.linalg.norm(b + b_ref) else -b


@dataclass
class PipelineConfig:
    fit: FitConfig = field(default_factory=FitConfig)
    subtract_mean: bool = False
    ridge: float | None = None


@dataclass
class PipelineResult:
    h_initial: Jpsd
    fit: FitResult
    zeta: ArmaParams
    h_model: Jpsd
    covariance: np.ndarray
    imputation: ImputationResult


def run_pipeline(
    obs: MaskedRealizations,
    basis: JointBasis,
    orders: ModelOrders,
    cfg: PipelineConfig | None = None,
    truth: np.ndarray | None = None,
) -> PipelineResult:
    """Initial JPSD, convex fit, rank-1 recovery, model JPSD, model covariance, MMSE fill-in."""
    cfg = cfg or PipelineConfig()

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
            raise StageError(name, exc) from exc

    h_init = stage("initial_jpsd", estimate_jpsd, obs, basis, subtract_mean=cfg.subtract_mean)
    fit = stage("fit", fit_arma, h_init, basis.graph, basis.time, orders, cfg.fit)
    zeta = fit.zeta
    h_model = stage("model_jpsd", jpsd_of, zeta, basis.graph, basis.time)
    cov = stage("covariance", covariance_from_jpsd, h_model, basis)
    mean = h_init.diagnostics.get("mean_subtracted", 0.0)
    imp = stage("mmse", mmse_impute, cov, obs, ridge=cfg.ridge, mean=mean, truth=truth)
    return PipelineResult(h_init, fit, zeta, h_model, cov.matrix, imp)


def trial_errors(process: SyntheticProcess, L: int, seed) -> dict:
    """One Monte-Carlo trial: L fresh realisations, fit, and every error measure against the truth."""
    ss = np.random.SeedSequence(_entropy(seed))
    s_real, s_obs = ss.spawn(2)
    X = process.realizations(L, s_real)
    obs = process.observe(X, s_obs)
    basis = process.basis
    h0 = process.true_jpsd.values
    h_init = estimate_jpsd(obs, basis)
    fit = fit_arma(h_init, basis.graph, basis.time, process.orders, process.fit)
    h_star = jpsd_of(fit.zeta, basis.graph, basis.time).values
    out = {
        "status": fit.status,
        "jpsd_initial": float(np.linalg.norm(h_init.values - h0)),
        "jpsd": float(np.linalg.norm(h_star - h0)),
        "jpsd_rel": float(np.linalg.norm(h_star - h0) / np.linalg.norm(h0)),
    }
    if process.orders == process.zeta.orders:
        a0, b0 = process.zeta.a, process.zeta.b
        b = align_sign(fit.zeta.b, b0)
        da, db = fit.zeta.a - a0, b - b0
        out["params"] = float(np.sqrt(da @ da + db @ db))
        out["a_rel"] = float(np.linalg.norm(da) / np.linalg.norm(a0))
        out["b_rel"] = float(np.linalg.norm(db) / np.linalg.norm(b0))
    x_test, test_mask = heldout_realization(process)
    test_obs = MaskedRealizations.from_complete(x_test[None], test_mask[None])
    # default ridge on both sides: true JPSDs may vanish on whole frequency rows
    z_oracle = mmse_impute(covariance_from_jpsd(process.true_jpsd, basis), test_obs).imputed_values()[0]
    z_star = mmse_impute(covariance_from_jpsd(Jpsd(h_star, basis.N, basis.T), basis), test_obs).imputed_values()[0]
    out["imputation"] = float(np.linalg.norm(z_star - z_oracle))
    return out


def heldout_realization(process: SyntheticProcess) -> tuple[np.ndarray, np.ndarray]:
    """Fixed held-out realisation and mask used for imputation-deviation errors."""
    ss = np.random.SeedSequence(process.test_seed)
    s_x, s_m = ss.spawn(2)
    x = simulate_spectral(process.zeta, process.basis, 1, seed=s_x)[0]
    m = generate_mask(process.basis.N, process.basis.T, 1, process.test_missing_ratio, seed=s_m)[0]
    return x, m


# -- validation-based tuning -------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    orders: ModelOrders
    mu_A: float | None = None
    mu_B: float | None = None
    weights: WeightSpec = field(default_factory=WeightSpec)

    def fit_config(self, base: FitConfig) -> FitConfig:
        return replace(base, mu_A=self.mu_A, mu_B=self.mu_B, weights=self.weights)

    def to_dict(self) -> dict:
        return {
            "orders": dict(zip("PKQM", self.orders.as_tuple())),
            "mu_A": self.mu_A,
            "mu_B": self.mu_B,
            "weights": {
                "kind": self.weights.kind,
                "sigma_lambda": self.weights.sigma_lambda,
                "sigma_omega": self.weights.sigma_omega,
            },
        }


def validation_split(masks: np.ndarray, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Split each realisation's observed entries into (training, validation) masks, uniformly at random.

    At least one observed entry stays in training for every realisation.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("split fraction must lie in (0, 1)")
    rng = _rng(seed)
    train = np.array(masks, dtype=bool)
    val = np.zeros_like(train)
    for l in range(train.shape[0]):
        idx = np.flatnonzero(train[l].ravel())
        n_val = min(int(round(fraction * idx.size)), idx.size - 1)
        if n_val <= 0:
            continue
        pick = rng.choice(idx, size=n_val, replace=False)
        train[l].ravel()[pick] = False
        val[l].ravel()[pick] = True
    return train, val


@dataclass
class TuningResult:
    chosen: Candidate
    scores: list
    final: PipelineResult | None
    train_mask: np.ndarray
    validation_mask: np.ndarray


def tune_hyperparams(
    obs: MaskedRealizations,
    basis: JointBasis,
    grid,
    split_fraction: float = 0.5,
    seed=0,
    base: PipelineConfig | None = None,
    refit: bool = True,
) -> TuningResult:
    """Hold out ``split_fraction`` of the observed entries, pick the candidate with the
    lowest validation NME, then refit it on every observed entry."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    base = base or PipelineConfig()
    train, val = validation_split(obs.masks, split_fraction, seed)
    assert not np.any(train & val)
    truth = np.where(obs.masks, obs.data, 0.0)
    train_obs = MaskedRealizations.from_complete(truth, train)
    scores = []
    for cand in grid:
        cfg = replace(base, fit=cand.fit_config(base.fit))
        try:
            res = run_pipeline(train_obs, basis, cand.orders, cfg)
            err = nme(truth, res.imputation.filled, ~val)
        except NumericalError:
            err = float("nan")
        scores.append(err)
    finite = [i for i, s in enumerate(scores) if np.isfinite(s)]
    if not finite:
        raise NumericalError("every hyperparameter candidate failed")
    best = min(finite, key=lambda i: (scores[i], i))
    chosen = grid[best]
    final = None
    if refit:
        final = run_pipeline(obs, basis, chosen.orders, replace(base, fit=chosen.fit_config(base.fit)))
    return TuningResult(chosen, scores, final, train, val)


# -- sweeps ------------------------------------------------------------------


@dataclass
class WeightSweep:
    mu_A: list
    mu_B: list
    nme: np.ndarray
    failures: dict

    def to_rows(self) -> list[dict]:
        return [
            {"mu_A": a, "mu_B": b, "nme": float(self.nme[i, j])}
            for i, a in enumerate(self.mu_A)
            for j, b in enumerate(self.mu_B)
        ]

    def best(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(np.nanargmin(self.nme), self.nme.shape)
        return self.mu_A[i], self.mu_B[j], float(self.nme[i, j])


def sweep_weights(
    process: SyntheticProcess,
    L: int,
    mu_A_grid,
    mu_B_grid,
    missing_ratios=(0.3,),
    repetitions: int = 5,
    seed: int = 0,
    orders: ModelOrders | None = None,
) -> WeightSweep:
    """NME of model-based imputation over a (mu_A, mu_B) grid, averaged over repetitions and missing ratios.

    Each repetition draws one set of realisations and masks shared by every grid cell.
    Failed cells are NaN with the reason recorded in ``failures``.
    """
    mu_A_grid, mu_B_grid = list(mu_A_grid), list(mu_B_grid)
    if not mu_A_grid or not mu_B_grid or not list(missing_ratios):
        raise ValueError("sweep grids must be non-empty")
    orders = orders or process.orders
    totals = np.zeros((len(mu_A_grid), len(mu_B_grid)))
    counts = np.zeros_like(totals)
    failures: dict = {}
    for rep in range(repetitions):
        for ir, ratio in enumerate(missing_ratios):
            ss = np.random.SeedSequence([seed, rep, ir])
            s_real, s_obs = ss.spawn(2)
            X = process.realizations(L, s_real)
            obs = replace(process, missing_ratio=ratio).observe(X, s_obs)
            for i, mA in enumerate(mu_A_grid):
                for j, mB in enumerate(mu_B_grid):
                    cfg = PipelineConfig(fit=replace(process.fit, mu_A=mA, mu_B=mB))
                    try:
                        res = run_pipeline(obs, process.basis, orders, cfg)
                        val = nme(X, res.imputation.filled, obs.masks)
                    except NumericalError as exc:
                        failures.setdefault((i, j), str(exc))
                        totals[i, j] = np.nan
                        continue
                    totals[i, j] += val
                    counts[i, j] += 1
    with np.errstate(invalid="ignore"):
        table = totals / counts
    for key in failures:
        table[key] = np.nan
    return WeightSweep(mu_A_grid, mu_B_grid, table, failures)


@dataclass
class OrderSweepRow:
    orders: ModelOrders
    d: int
    L_grid: list
    mean_jpsd_rel: list
    L_required: int | None


def sweep_orders(processes, L_grid, trials: int = 5, threshold: float = 0.1, seed: int = 0) -> list[OrderSweepRow]:
    """For each ground-truth process, mean normalised JPSD error versus L and the
    smallest L in the grid whose mean error is at most ``threshold``.

    Every process uses the same trial seeds (common random numbers), so differences
    between rows reflect the processes rather than sampling noise.
    """
    from .theory import rate_study

    rows = []
    for proc in processes:
        study = rate_study("jpsd_rel", proc, L_grid, trials=trials, seed=seed)["jpsd_rel"]
        req = next((L for L, m in zip(study.L_grid, study.mean) if np.isfinite(m) and m <= threshold), None)
        rows.append(OrderSweepRow(proc.orders, proc.orders.d, list(study.L_grid), list(study.mean), req))
    return rows


def compare_methods(
    process: SyntheticProcess,
    L: int,
    missing_ratio: float,
    seeds,
    cfg: PipelineConfig | None = None,
) -> dict:
    """Paired NME of model-based imputation and the nonparametric baseline over several seeds."""
    cfg = cfg or PipelineConfig(fit=process.fit)
    arma, base = [], []
    for s in seeds:
        ss = np.random.SeedSequence([int(s), L, int(round(missing_ratio * 1000))])
        s_real, s_obs = ss.spawn(2)
        X = process.realizations(L, s_real)
        obs = replace(process, missing_ratio=missing_ratio).observe(X, s_obs)
        res = run_pipeline(obs, process.basis, process.orders, cfg)
        arma.append(nme(X, res.imputation.filled, obs.masks))
        bl = jwss_baseline(obs, process.basis, subtract_mean=cfg.subtract_mean, ridge=cfg.ridge)
        base.append(nme(X, bl.filled, obs.masks))
    arma, base = np.array(arma), np.array(base)
    return {
        "missing_ratio": missing_ratio,
        "js_arma": arma.tolist(),
        "jwss": base.tolist(),
        "mean_js_arma": float(arma.mean()),
        "mean_jwss": float(base.mean()),
        "paired_margin": float(np.mean(base - arma)),
    }


def make_basis(graph: Graph, T: int) -> JointBasis:
    return JointBasis(graph_spectrum(graph), dft_basis(T))


__all__ = [
    "REFERENCE_ORDERS",
    "REFERENCE_ZETA",
    "Candidate",
    "PipelineConfig",
    "PipelineResult",
    "SyntheticProcess",
    "compare_methods",
    "make_basis",
    "run_pipeline",
    "station_graph",
    "sweep_orders",
    "sweep_weights",
    "trial_errors",
    "tune_hyperparams",
    "score",
]
