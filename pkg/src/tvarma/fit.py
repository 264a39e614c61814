"""Fitting graph ARMA parameters to a JPSD estimate.

The spectral matching problem is relaxed to a convex quadratic program in two
PSD matrices ``A ~ a a^T`` (extended AR coefficients, ``a_00 = 1``) and
``B ~ b b^T``:

    minimise  sum_i mu_i (u_i^H B u_i - h_i v_i^H A v_i)^2 + mu_A tr(A) + mu_B tr(B)

and solved with an over-relaxed ADMM splitting between the quadratic (with the
``a_00`` constraint) and the PSD cones. Coefficients are read off the leading
eigenvectors of the solution.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DegenerateModelError
from .graph import GraphSpectrum
from .spectral import ArmaParams, JointBasis, Jpsd, ModelOrders, TimeBasis, uv_vectors

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_DEGENERATE = "degenerate"


@dataclass(frozen=True)
class WeightSpec:
    """Spectral weighting of the data term: ``uniform`` or ``gaussian`` in (lambda, wrapped omega)."""

    kind: str = "uniform"
    sigma_lambda: float = 1.0
    sigma_omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma_lambda > 0 and self.sigma_omega > 0):
            raise ValueError("gaussian weight widths must be positive")


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 20000
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    rho: float | None = None
    alpha: float = 1.6
    adaptive_rho: bool = True
    adapt_every: int = 50

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if not 0 < self.alpha < 2:
            raise ValueError("over-relaxation alpha must lie in (0, 2)")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.adapt_every < 1:
            raise ValueError("adapt_every must be >= 1")


@dataclass(frozen=True)
class FitConfig:
    """Trace weights and solver settings.

    ``mu_A``/``mu_B`` left as None are set relative to the data: with
    ``S = sum_i mu_i h_i^2`` and ``h_max = max |h_i|``, ``mu_A = rel * S`` and
    ``mu_B = rel * S / h_max``. Scaling h by c then scales B by c and leaves A unchanged.

    ``polish`` refines the extracted rank-1 point on the same objective restricted
    to ``A = a a^T, B = b b^T`` (see :func:`polish_rank1`).
    """

    mu_A: float | None = None
    mu_B: float | None = None
    relative_weight: float = 1e-3
    weights: WeightSpec = field(default_factory=WeightSpec)
    solver: SolverSettings = field(default_factory=SolverSettings)
    polish: bool = True

    def __post_init__(self):
        for name in ("mu_A", "mu_B"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.relative_weight >= 0:
            raise ValueError("relative_weight must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = WeightSpec(**d["weights"])
        if "solver" in d:
            d["solver"] = SolverSettings(**d["solver"])
        return cls(**d)


@dataclass
class FitResult:
    A: np.ndarray
    B: np.ndarray
    a_ext: np.ndarray
    zeta: ArmaParams
    status: str
    diagnostics: dict

    def to_dict(self, include_timing: bool = False) -> dict:
        diag = {k: v for k, v in self.diagnostics.items() if include_timing or k != "wall_time"}
        out = self.zeta.to_dict()
        out.update(status=self.status, **diag)
        return out


def wrap_frequency(omega):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(omega, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def spectral_weights(gs: GraphSpectrum, tb: TimeBasis, weightfn: WeightSpec | None = None) -> np.ndarray:
    weightfn = weightfn or WeightSpec()
    N, T = gs.n_nodes, tb.length
    if weightfn.kind == "uniform":
        return np.ones(N * T)
    lam = np.tile(gs.eigenvalues, T)
    om = wrap_frequency(np.repeat(tb.frequencies, N))
    return np.exp(-(lam**2) / weightfn.sigma_lambda**2 - om**2 / weightfn.sigma_omega**2)


# -- symmetric-matrix vectorisation (isometric: off-diagonals scaled by sqrt 2) --


def _svec_index(n):
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, scale


def svec(S: np.ndarray) -> np.ndarray:
    iu, scale = _svec_index(S.shape[-1])
    return S[..., iu[0], iu[1]] * scale


def smat(x: np.ndarray, n: int) -> np.ndarray:
    iu, scale = _svec_index(n)
    S = np.zeros((n, n))
    S[iu] = x / scale
    return S + np.triu(S, 1).T


def _project_psd(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    return (V * np.maximum(w, 0.0)) @ V.T


def free_a_indices(orders: ModelOrders) -> np.ndarray:
    """Positions in the extended a vector that are not pinned to zero: a_00 and every a_pk with p >= 1."""
    K1 = orders.K + 1
    return np.concatenate([[0], np.arange(K1, orders.n_a_ext)])


@dataclass
class RelaxedProblem:
    """Data of the convex relaxation in svec coordinates ``x = [svec(A_free), svec(B)]``.

    ``A_free`` is the extended-A restricted to :func:`free_a_indices`; its (0, 0)
    entry is the pinned ``a_00^2 = 1``.
    """

    orders: ModelOrders
    G: np.ndarray
    mu: np.ndarray
    c: np.ndarray
    nA: int
    nB: int
    mu_A: float
    mu_B: float

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def nxA(self) -> int:
        return self.nA * (self.nA + 1) // 2

    def objective(self, x: np.ndarray) -> float:
        r = self.G @ x
        return float(np.sum(self.mu * r * r) + self.c @ x)

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full extended A (with zero a_0k rows/cols) and B from svec coordinates."""
        A_free = smat(x[: self.nxA], self.nA)
        B = smat(x[self.nxA :], self.nB)
        idx = free_a_indices(self.orders)
        A = np.zeros((self.orders.n_a_ext, self.orders.n_a_ext))
        A[np.ix_(idx, idx)] = A_free
        return A, B

    def pack(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        idx = free_a_indices(self.orders)
        return np.concatenate([svec(A[np.ix_(idx, idx)]), svec(B)])


def build_problem(
    h: np.ndarray, lam: np.ndarray, omega: np.ndarray, orders: ModelOrders, mu: np.ndarray, mu_A: float, mu_B: float
) -> RelaxedProblem:
    u, v = uv_vectors(lam, omega, orders, form="extended")
    v = v[:, free_a_indices(orders)]
    Cv = np.einsum("ia,ib->iab", v, np.conj(v)).real
    Cu = np.einsum("ia,ib->iab", u, np.conj(u)).real
    G = np.hstack([-h[:, None] * svec(Cv), svec(Cu)])
    nA, nB = v.shape[1], u.shape[1]
    c = np.concatenate([mu_A * svec(np.eye(nA)), mu_B * svec(np.eye(nB))])
    return RelaxedProblem(orders, G, np.asarray(mu, dtype=float), c, nA, nB, mu_A, mu_B)


def default_trace_weights(h: np.ndarray, mu: np.ndarray, relative: float) -> tuple[float, float]:
    scale = float(np.sum(mu * h * h))
    hmax = float(np.abs(h).max(initial=0.0))
    if scale == 0.0 or hmax == 0.0:
        return relative, relative
    return relative * scale, relative * scale / hmax


def solve_relaxed(prob: RelaxedProblem, settings: SolverSettings | None = None, x0: np.ndarray | None = None):
    """ADMM on ``min f(x) + I_psd(z)  s.t. x = z`` with the a_00 pin inside f.

    Returns ``(z, info)``; z is exactly PSD blockwise. ``info["fixed_point_residual"]``
    traces ``||s_{k+1} - s_k||`` for ``s = z - y``, which is non-increasing for
    this (averaged) iteration with a fixed penalty (``adaptive_rho=False``).

    With ``adaptive_rho`` the penalty is rebalanced every ``adapt_every``
    iterations by the square root of the ratio of relative primal to relative
    dual residual, when that ratio leaves [0.2, 5].
    """
    settings = settings or SolverSettings()
    n = prob.dim
    H2 = 2.0 * (prob.G.T * prob.mu) @ prob.G
    fixed = 0
    free = np.arange(1, n)
    rho = settings.rho
    if rho is None:
        rho = max(float(np.trace(H2)) / n, 1e-12)
    factor = cho_factor(H2[np.ix_(free, free)] + rho * np.eye(free.size))
    lin_fixed = H2[free, fixed] * 1.0 + prob.c[free]
    nxA = prob.nxA

    def project(w):
        out = np.empty_like(w)
        out[:nxA] = svec(_project_psd(smat(w[:nxA], prob.nA)))
        out[nxA:] = svec(_project_psd(smat(w[nxA:], prob.nB)))
        return out

    if x0 is None:
        z = prob.pack(np.eye(prob.orders.n_a_ext), np.zeros((prob.nB, prob.nB)))
    else:
        z = np.asarray(x0, dtype=float).copy()
    y = np.zeros(n)
    x = z.copy()
    s_prev = z - y
    alpha = settings.alpha
    objective, fpr, r_hist, s_hist = [], [], [], []
    status = STATUS_MAX_ITERS
    it = 0
    for it in range(1, settings.max_iters + 1):
        rhs = rho * (z - y)[free] - lin_fixed
        x = np.empty(n)
        x[fixed] = 1.0
        x[free] = cho_solve(factor, rhs)
        xr = alpha * x + (1.0 - alpha) * z
        z_old = z
        z = project(xr + y)
        y = y + xr - z
        s = z - y
        fpr.append(float(np.linalg.norm(s - s_prev)))
        s_prev = s
        r = float(np.linalg.norm(x - z))
        sd = float(rho * np.linalg.norm(z - z_old))
        r_hist.append(r)
        s_hist.append(sd)
        objective.append(prob.objective(z))
        eps_pri = np.sqrt(n) * settings.abs_tol + settings.rel_tol * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = np.sqrt(n) * settings.abs_tol + settings.rel_tol * rho * np.linalg.norm(y)
        if r <= eps_pri and sd <= eps_dual:
            status = STATUS_CONVERGED
            break
        if settings.adaptive_rho and it % settings.adapt_every == 0:
            rel_pri = r / max(np.linalg.norm(x), np.linalg.norm(z), 1e-300)
            rel_dual = sd / max(rho * np.linalg.norm(y), 1e-300)
            ratio = np.sqrt(rel_pri / max(rel_dual, 1e-300))
            if ratio > 5.0 or ratio < 0.2:
                new_rho = rho * float(np.clip(ratio, 1e-3, 1e3))
                y *= rho / new_rho  # y is the scaled dual
                rho = new_rho
                factor = cho_factor(H2[np.ix_(free, free)] + rho * np.eye(free.size))
                s_prev = z - y
    info = {
        "iterations": it,
        "status": status,
        "rho": rho,
        "objective": objective,
        "fixed_point_residual": fpr,
        "primal_residual": r_hist,
        "dual_residual": s_hist,
    }
    return z, info


def rank1_extract(Mmat: np.ndarray, kind: str, orders: ModelOrders | None = None) -> tuple[np.ndarray, float]:
    """Leading rank-1 factor of a PSD matrix, normalised for the given coefficient kind.

    kind ``"B"``: ``sqrt(s1) q1`` signed so its largest-magnitude entry is positive.
    kind ``"A"``: the factor rescaled so the a_00 slot is exactly 1; with
    ``orders`` given, the p = 0 block is stripped to give original-form a.
    Returns ``(vector, s1 / sum(s))``.
    """
    if kind not in ("A", "B"):
        raise ValueError(f"kind must be 'A' or 'B', got {kind!r}")
    S = np.asarray(Mmat, dtype=float)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    s1, q1 = w[-1], V[:, -1]
    if not s1 > 0:
        raise DegenerateModelError(f"matrix {kind} has no positive eigenvalue (largest {s1:.3g})")
    pos = np.clip(w, 0.0, None)
    dominance = float(s1 / pos.sum())
    vec = np.sqrt(s1) * q1
    if kind == "B":
        i = np.argmax(np.abs(vec))
        if vec[i] < 0:
            vec = -vec
        return vec, dominance
    if abs(vec[0]) < 1e-12 * np.linalg.norm(vec):
        raise DegenerateModelError("leading eigenvector of A has no a_00 component")
    vec = vec / vec[0]
    if orders is not None:
        vec = vec[orders.K + 1 :]
    return vec, dominance


def _rank1_starts(M: np.ndarray) -> list[np.ndarray]:
    """Top factor, plus top +- second factor when the second eigenvalue is not negligible.

    When several factors give the same quadratic forms, the solver can return their
    average, which is not rank 1; its top two eigenpairs recombine into the factors.
    """
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.clip(w, 0.0, None)
    v1 = np.sqrt(w[-1]) * V[:, -1]
    starts = [v1]
    if w.size > 1 and w[-2] > 1e-8 * w[-1]:
        v2 = np.sqrt(w[-2]) * V[:, -2]
        starts += [v1 + v2, v1 - v2]
    return starts


def min_phase_ma(b: np.ndarray, orders: ModelOrders) -> np.ndarray:
    """Minimum-phase representative of a purely temporal MA polynomial (M = 0).

    Zeros outside the unit circle are reflected inside with the gain adjusted, which
    leaves ``|b(e^{jw})|^2`` unchanged. Other orders are returned as they are.
    """
    b = np.asarray(b, dtype=float)
    if orders.M != 0 or orders.Q == 0 or not np.any(b):
        return b
    lead = int(np.flatnonzero(b)[0])
    r = np.roots(b[lead:])
    out_ = np.abs(r) > 1.0
    if not out_.any():
        return b
    gain = b[lead] * np.prod(np.abs(r[out_]))
    r = np.where(out_, 1.0 / np.conj(r), r)
    new = np.zeros_like(b)
    new[lead:] = np.real(np.poly(r)) * gain
    return new


def polish_rank1(prob: RelaxedProblem, h: np.ndarray, u: np.ndarray, v: np.ndarray, A: np.ndarray, B: np.ndarray,
                 stable=None) -> dict:
    """Local refinement of rank-1 points of the relaxed objective.

    Minimises ``sum mu (|u^H b|^2 - h |v^H a|^2)^2 + mu_A |a|^2 + mu_B |b|^2`` over the
    free extended-a entries (``a_00 = 1``) and b with Levenberg-Marquardt, from every
    combination of :func:`_rank1_starts` of A and B. ``stable(a_ext_free)`` ranks stable
    candidates first. Returns the best ``a_free``, ``b`` and the objectives.
    """
    from scipy.optimize import least_squares

    idx = free_a_indices(prob.orders)
    vf = v[:, idx]
    sw = np.sqrt(prob.mu)
    sA, sB = np.sqrt(prob.mu_A), np.sqrt(prob.mu_B)
    na = idx.size - 1

    def split(x):
        return np.concatenate([[1.0], x[:na]]), x[na:]

    def resid(x):
        a, b = split(x)
        fa, fb = vf @ a, u @ b
        r = sw * (np.abs(fb) ** 2 - h * np.abs(fa) ** 2)
        return np.concatenate([r, sA * a, sB * b])

    def jac(x):
        a, b = split(x)
        fa, fb = vf @ a, u @ b
        Ja = -2.0 * (sw * h)[:, None] * np.real(np.conj(fa)[:, None] * vf[:, 1:])
        Jb = 2.0 * sw[:, None] * np.real(np.conj(fb)[:, None] * u)
        top = np.hstack([Ja, Jb])
        reg = np.zeros((na + 1 + b.size, x.size))
        reg[1 : na + 1, :na] = sA * np.eye(na)
        reg[na + 1 :, na:] = sB * np.eye(b.size)
        return np.vstack([top, reg])

    def objective(x):
        return float(np.sum(resid(x) ** 2))

    A_free = A[np.ix_(idx, idx)]
    a_starts = []
    for s in _rank1_starts(A_free):
        if abs(s[0]) > 1e-12 * max(np.linalg.norm(s), 1e-300):
            a_starts.append(s / s[0])
    b_starts = _rank1_starts(B)
    best = None
    x_first = np.concatenate([a_starts[0][1:], b_starts[0]]) if a_starts else None
    for a0 in a_starts:
        for b0 in b_starts:
            x0 = np.concatenate([a0[1:], b0])
            sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=200 * (x0.size + 1))
            f = objective(sol.x)
            ok = stable is None or stable(split(sol.x)[0])
            key = (not ok, f)
            if best is None or key < best[0]:
                best = (key, sol.x)
    if best is None:
        return {"applied": False}
    a, b = split(best[1])
    return {
        "applied": True,
        "a_free": a,
        "b": b,
        "objective_start": objective(x_first),
        "objective": best[0][1],
        "stable": not best[0][0],
    }


def fit_arma(h_init: Jpsd, gs: GraphSpectrum, tb: TimeBasis, orders: ModelOrders, cfg: FitConfig | None = None) -> FitResult:
    """Fit ARMA coefficients of the given orders to a (possibly signed) JPSD estimate."""
    cfg = cfg or FitConfig()
    N, T = gs.n_nodes, tb.length
    if h_init.values.size != N * T:
        raise ValueError(f"JPSD length {h_init.values.size} != N*T = {N * T}")
    if N * T <= orders.d:
        warnings.warn(f"N*T = {N * T} <= model order d = {orders.d}; the fit is underdetermined", stacklevel=2)
    t0 = time.perf_counter()
    h = h_init.values
    mu = spectral_weights(gs, tb, cfg.weights)
    dA, dB = default_trace_weights(h, mu, cfg.relative_weight)
    mu_A = dA if cfg.mu_A is None else cfg.mu_A
    mu_B = dB if cfg.mu_B is None else cfg.mu_B
    lam = np.tile(gs.eigenvalues, T)
    omega = np.repeat(tb.frequencies, N)
    prob = build_problem(h, lam, omega, orders, mu, mu_A, mu_B)
    z, info = solve_relaxed(prob, cfg.solver)
    A, B = prob.unpack(z)

    u, v = uv_vectors(lam, omega, orders, form="extended")
    qB = np.einsum("ia,ab,ib->i", np.conj(u), B, u)
    qA = np.einsum("ia,ab,ib->i", np.conj(v), A, v)
    imag = float(max(np.abs(qB.imag).max(), np.abs(qA.imag).max()))
    assert imag <= 1e-8 * (1.0 + np.abs(qB).max() + np.abs(qA).max()), "quadratic forms must be real"

    evA = np.linalg.eigvalsh(A)
    evB = np.linalg.eigvalsh(B)
    diagnostics = {
        "mu_A": float(mu_A),
        "mu_B": float(mu_B),
        "iterations": info["iterations"],
        "solver_status": info["status"],
        "objective": info["objective"][-1],
        "objective_history": info["objective"],
        "primal_residual": info["primal_residual"][-1],
        "dual_residual": info["dual_residual"][-1],
        "fixed_point_residual": info["fixed_point_residual"],
        "a00_residual": float(abs(A[0, 0] - 1.0)),
        "eigenvalues_A": evA.tolist(),
        "eigenvalues_B": evB.tolist(),
        "negative_h_fraction": float(np.mean(h < 0)),
        "quadratic_form_imag": imag,
    }

    status = info["status"]
    a_ext, domA = rank1_extract(A, "A")
    a = a_ext[orders.K + 1 :]
    try:
        b, domB = rank1_extract(B, "B")
    except DegenerateModelError:
        b, domB = np.zeros(orders.n_b), 0.0
    if not np.any(b) or np.trace(B) <= 1e-12 * max(1.0, np.trace(A)):
        status = STATUS_DEGENERATE
    diagnostics["rank1_a"] = a.tolist()
    diagnostics["rank1_b"] = b.tolist()
    if cfg.polish and status != STATUS_DEGENERATE:
        idx = free_a_indices(orders)

        def stable(a_free):
            ext = np.zeros(orders.n_a_ext)
            ext[idx] = a_free
            return _ar_stable(ArmaParams(orders, ext[orders.K + 1 :], np.ones(orders.n_b)), gs)

        pol = polish_rank1(prob, h, u, v, A, B, stable=stable)
        if pol["applied"] and pol["objective"] <= pol["objective_start"]:
            a_ext = np.zeros(orders.n_a_ext)
            a_ext[idx] = pol["a_free"]
            a = a_ext[orders.K + 1 :]
            b = min_phase_ma(pol["b"], orders)
            i = np.argmax(np.abs(b))
            b = -b if b[i] < 0 else b
        diagnostics["polish"] = {k: val for k, val in pol.items() if k not in ("a_free", "b")}
    diagnostics["dominance_A"] = domA
    diagnostics["dominance_B"] = domB
    diagnostics["wall_time"] = time.perf_counter() - t0
    return FitResult(A=A, B=B, a_ext=a_ext, zeta=ArmaParams(orders, a, b), status=status, diagnostics=diagnostics)


def _ar_stable(zeta: ArmaParams, gs: GraphSpectrum) -> bool:
    """All AR roots strictly inside the unit disc at every graph frequency."""
    taps = zeta.ar_taps()
    powers = gs.eigenvalues[:, None] ** np.arange(zeta.orders.K + 1)[None, :]
    den = np.hstack([np.ones((gs.n_nodes, 1)), powers @ taps.T])
    for row in den:
        if np.any(row[1:] != 0) and np.abs(np.roots(row)).max() >= 1.0:
            return False
    return True


def fit_arma_basis(h_init: Jpsd, basis: JointBasis, orders: ModelOrders, cfg: FitConfig | None = None) -> FitResult:
    return fit_arma(h_init, basis.graph, basis.time, orders, cfg)
