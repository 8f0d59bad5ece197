"""Continuation over growing sample prefixes with proportionally shrinking
regularization, so each stage's minimizer starts the next stage inside the
quadratic-convergence region of Newton's method.

Two scheduling modes:
  - v1: the (mu_t, m_t) sequence is generated up front, either from a fixed
    increment factor alpha or from the a-priori bounds;
  - v2: each stage picks the smallest feasible alpha on a grid using a
    first-order estimate of the next decrement from the retained Hessian
    factorization and incrementally accumulated new-sample gradients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import linalg, newton
from .accounting import WorkMeter
from .dataset import Dataset
from .linalg import SpdFactorization
from .newton import NewtonConfig
from .objective import LossKind, RegularizedObjective

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.25)


class HandoverViolationError(RuntimeError):
    """A stage started outside the quadratic-convergence region it was
    guaranteed to be in; continuing would risk divergence."""

    def __init__(self, stage: int, lam: float, threshold: float):
        super().__init__(
            f"stage {stage}: hand-over decrement {lam:.4g} exceeds {threshold:.4g}")
        self.stage = stage
        self.lam = lam
        self.threshold = threshold


@dataclass
class GeneralizationBound:
    """Statistical-error model V(m) = c * d / m (positive, nonincreasing in m)."""

    c: float
    d: int

    def __call__(self, m: int) -> float:
        if m <= 0:
            raise ValueError("m must be positive")
        return self.c * self.d / m


@dataclass
class ContinuationConfig:
    eta: float = 0.2                 # quadratic-region threshold, in (0, 1/4)
    beta: float = 1.0                # free parameter of the growth bound
    bound_c: float = 1.0             # constant in V(m) = c * d / m
    m0: int | None = None            # default max(4 d, 128), clamped to N
    mu0: float | None = None         # default 1 / m0
    mode: str = "v2"                 # "v1" (a priori) or "v2" (data adaptive)
    fixed_alpha: float | None = None  # v1 only: constant increment factor
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    eps: float = 1e-12               # final tolerance on lambda^2 / 2
    stage0_eps: float = 1e-10        # tolerance of the initial-stage solve
    handover_factor: float = 2.0     # violation threshold = factor * eta

    def __post_init__(self):
        if not 0.0 < self.eta < 0.25:
            raise ValueError("eta must be in (0, 0.25)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        grid = tuple(self.alpha_grid)
        if not grid or any(not 0.0 < a < 1.0 for a in grid):
            raise ValueError("alpha_grid entries must lie in (0, 1)")
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be strictly descending")
        if self.fixed_alpha is not None and not 0.0 < self.fixed_alpha < 1.0:
            raise ValueError("fixed_alpha must be in (0, 1)")
        if self.mode not in ("v1", "v2"):
            raise ValueError("mode must be 'v1' or 'v2'")


@dataclass
class StageRecord:
    t: int
    m: int
    mu: float
    alpha: float
    lambda_handover: float | None
    lambda_estimate: float | None
    epochs_used: float

    def to_dict(self) -> dict:
        return {
            "t": self.t, "m": self.m, "mu": self.mu, "alpha": self.alpha,
            "lambda_handover": self.lambda_handover,
            "lambda_estimate": self.lambda_estimate,
            "epochs_used": self.epochs_used,
        }


def nu_lower_bound(mu: float, x_norm: float, eta: float) -> float:
    """Smallest strength nu <= mu whose decrement at the mu-minimizer stays <= eta.

    Uses B = eta^2 / (mu * ||x*||^2); the bound is the lower root of
    nu^2 - (2 + B) mu nu + mu^2 = 0. Returns 0 when ||x*|| = 0 (any nu works).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if x_norm < 0:
        raise ValueError("x_norm must be >= 0")
    if x_norm == 0.0:
        return 0.0
    B = eta * eta / (mu * x_norm * x_norm)
    # 0.5*(sqrt(B^2+4B) - B) rewritten to avoid cancellation for large B
    half = 2.0 * B / (math.sqrt(B * B + 4.0 * B) + B)
    return mu * (1.0 - half)


def nu_lower_bound_apriori(mu: float, phi: float, eta: float) -> float:
    """Same reduction bound with the data-independent B = eta^2 / (2 Phi),
    where Phi bounds the loss at the origin. More conservative than
    :func:`nu_lower_bound`, and the resulting nu/mu ratio is mu-independent."""
    if mu <= 0 or phi <= 0:
        raise ValueError("mu and phi must be positive")
    B = eta * eta / (2.0 * phi)
    half = 2.0 * B / (math.sqrt(B * B + 4.0 * B) + B)
    return mu * (1.0 - half)


def growth_inequality_lhs(mu: float, x_norm: float, L: float, V_m: float, u: float) -> float:
    """Left side of the sample-growth condition at u = 1 - alpha."""
    return mu * mu * x_norm * x_norm * u * u + 2.0 * L * V_m * u ** 3


def alpha_star(mu: float, m: int, x_norm: float, L: float,
               bound: GeneralizationBound, eta: float) -> float:
    """Smallest increment factor alpha in [0, 1) satisfying the growth condition

        mu^2 ||x*||^2 (1-alpha)^2 + 2 L V(m) (1-alpha)^3  <=  mu eta^2 / 2.

    The left side is monotone increasing in u = 1 - alpha, so the largest
    feasible u is found by bisection to absolute 1e-12; alpha = 1 at u = 0 is
    always feasible.
    """
    if min(mu, x_norm, L) <= 0 or m <= 0 or eta <= 0:
        raise ValueError("all inputs must be positive")
    rhs = mu * eta * eta / 2.0
    V_m = bound(m)
    if growth_inequality_lhs(mu, x_norm, L, V_m, 1.0) <= rhs:
        return 0.0
    lo, hi = 0.0, 1.0  # lo feasible, hi infeasible
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if growth_inequality_lhs(mu, x_norm, L, V_m, mid) <= rhs:
            lo = mid
        else:
            hi = mid
    return 1.0 - lo


class GradientCache:
    """Incremental sums of per-sample loss gradients over rows appended past a
    base window, evaluated at a fixed point.

    Queries must be nondecreasing in n (the alpha scan only ever appends
    rows); a snapshot of the sum is kept per queried n so earlier candidates
    stay retrievable after the scan overshoots.
    """

    def __init__(self, obj: RegularizedObjective, x: np.ndarray):
        self.obj = obj
        self.x = np.asarray(x, dtype=np.float64)
        self.base = obj.n
        self.filled = obj.n
        self._sum = np.zeros(obj.dim)
        self._snapshots = {obj.n: self._sum.copy()}

    def sum_to(self, n: int) -> np.ndarray:
        """Sum of grad phi_i(x) over rows [base, n)."""
        if n in self._snapshots:
            return self._snapshots[n]
        if n < self.filled:
            raise ValueError("cache queries must be nondecreasing in n")
        self._sum = self._sum + self.obj.range_gradient_sum(self.x, self.filled, n)
        self.filled = n
        snap = self._sum.copy()
        self._snapshots[n] = snap
        return snap

    @property
    def rows_touched(self) -> int:
        return self.filled - self.base


def extended_gradient(prev: RegularizedObjective, x: np.ndarray, nu: float,
                      n: int, cache: GradientCache) -> np.ndarray:
    """Gradient of the (nu, n) objective at the previous stage's minimizer,
    assembled from new-sample gradients only:

        (1/n) sum_{k=m+1..n} grad phi_k(x)  +  nu (1 - mu m / (nu n)) x.

    Exact when x minimizes the previous (mu, m) objective; under the coupled
    schedule mu m = nu n the second term vanishes.
    """
    m, mu = prev.n, prev.nu
    N = prev.view.dataset.n_rows
    if n > N:
        raise ValueError(f"requested n={n} exceeds dataset size {N}")
    if n < m:
        raise ValueError("n must be >= the previous window length")
    if nu > mu * (1.0 + 1e-12):
        raise ValueError("nu must not exceed the previous strength mu")
    s = cache.sum_to(n)
    coef = nu * (1.0 - (mu * m) / (nu * n))
    return s / n + coef * x


def taylor_decrement_estimate(F: SpdFactorization, g: np.ndarray,
                              mu: float, nu: float) -> float:
    """Squared-decrement estimate for the grown objective from the retained
    factorization of the previous stage's Hessian:

        lambda^2  ~=  g^T H^-1 g + (mu - nu) ||H^-1 g||^2.

    No new factorization is performed.
    """
    if nu > mu * (1.0 + 1e-12):
        raise ValueError("nu must not exceed mu")
    quad = linalg.quad_form_inv(F, g)
    w = linalg.solve(F, g)
    return quad + (mu - nu) * float(w @ w)


@dataclass
class GrowthDecision:
    nu: float
    n: int
    alpha: float
    lambda_estimate: float
    feasible: bool
    rows_scanned: int


def find_growth(obj: RegularizedObjective, F: SpdFactorization | None,
                x: np.ndarray, cfg: ContinuationConfig, coupling: float,
                estimator="taylor") -> GrowthDecision | None:
    """Scan the alpha grid (descending) for the smallest feasible increment.

    Feasibility of a candidate (nu = coupling/n, n = round(m/alpha), clamped
    to N) means the estimated decrement stays <= eta. The scan stops at the
    first infeasible candidate (the estimate grows as alpha shrinks) or once
    n reaches the full sample, which forces (coupling/N, N). If even the
    largest grid alpha is infeasible, the sample grows by the minimal grid
    step with a warning. Returns None when the window already covers the
    dataset.

    estimator: "taylor" uses the retained factorization F; "gradnorm" uses the
    conservative bound lambda <= ||g|| / sqrt(nu) and needs no factorization;
    a callable (g, nu) -> lambda_squared plugs in any other decrement model.
    """
    m, mu = obj.n, obj.nu
    N = obj.view.dataset.n_rows
    if m >= N:
        return None
    if estimator == "taylor" and F is None:
        raise ValueError("taylor estimator requires a retained factorization")
    cache = GradientCache(obj, x)
    eta_sq = cfg.eta * cfg.eta

    def estimate_sq(nu: float, n: int, cache_: GradientCache) -> float:
        g = extended_gradient(obj, x, nu, n, cache_)
        if callable(estimator):
            return estimator(g, nu)
        if estimator == "taylor":
            return taylor_decrement_estimate(F, g, mu, nu)
        if estimator == "gradnorm":
            return float(g @ g) / nu
        raise ValueError(f"unknown estimator {estimator!r}")

    best = None
    for alpha in cfg.alpha_grid:
        n = min(int(round(m / alpha)), N)
        n = max(n, m + 1)
        nu = coupling / n
        est_sq = estimate_sq(nu, n, cache)
        if est_sq <= eta_sq:
            best = GrowthDecision(nu, n, m / n, math.sqrt(est_sq), True, 0)
            if n >= N:
                break
        else:
            break
    if best is None:
        grid = cfg.alpha_grid
        min_gap = min(a - b for a, b in zip(grid, grid[1:])) if len(grid) > 1 else 1 - grid[0]
        alpha_fb = 1.0 - min_gap
        n = min(max(int(round(m / alpha_fb)), m + 1), N)
        nu = coupling / n
        # fresh cache: the scan overshot past this n, prefix sums are not kept
        est_sq = estimate_sq(nu, n, GradientCache(obj, x))
        logger.warning(
            "no feasible grid increment at m=%d; growing minimally to n=%d "
            "(estimate there %.3g, eta=%.3g)", m, n, math.sqrt(est_sq), cfg.eta)
        best = GrowthDecision(nu, n, m / n, math.sqrt(est_sq), False, 0)
    best.rows_scanned = cache.rows_touched
    return best


def apriori_schedule(N: int, dim: int, m0: int, mu0: float, cfg: ContinuationConfig,
                     phi: float, L: float) -> list[tuple[float, int]]:
    """Pre-generate the (mu_t, m_t) sequence for v1 runs.

    With cfg.fixed_alpha the increment factor is constant; otherwise each
    stage uses the root of the growth condition with the origin-loss bound
    ||x*||^2 <= 2 Phi / mu standing in for the unknown minimizer norm.
    """
    bound = GeneralizationBound(cfg.bound_c, dim)
    coupling = mu0 * m0
    out = []
    m, mu = m0, mu0
    while m < N:
        if cfg.fixed_alpha is not None:
            alpha = cfg.fixed_alpha
        else:
            alpha = alpha_star(mu, m, math.sqrt(2.0 * phi / mu), L, bound, cfg.eta)
            alpha = max(alpha, 1e-3)  # guard the fully-unconstrained case
        n = min(max(int(round(m / alpha)), m + 1), N)
        nu = coupling / n
        out.append((nu, n))
        m, mu = n, nu
    return out


@dataclass
class DynaResult:
    x: np.ndarray
    stages: list[StageRecord]
    converged: bool
    epochs: float


def dyna_newton(dataset: Dataset, cfg: ContinuationConfig,
                newton_cfg: NewtonConfig | None = None, *,
                loss: LossKind = LossKind.LOGISTIC,
                x0: np.ndarray | None = None,
                observer=None) -> DynaResult:
    """Continuation Newton driver (a-priori v1 or data-adaptive v2).

    Stage 0 minimizes the (mu0, m0) objective to tolerance; each later stage
    grows the window, takes fixed_iters Newton steps (default 1) on the new
    objective, and records the measured hand-over decrement, which is exactly
    the first step's decrement and must stay below handover_factor * eta.
    After the window reaches the full sample the iteration polishes to
    cfg.eps on the final objective.
    """
    N = dataset.n_rows
    newton_cfg = newton_cfg if newton_cfg is not None else NewtonConfig()
    meter = observer if observer is not None else WorkMeter(N)
    m0 = cfg.m0 if cfg.m0 is not None else max(4 * dataset.dim, 128)
    m0 = min(m0, N)
    if m0 < 1:
        raise ValueError("m0 must be at least 1")
    mu0 = cfg.mu0 if cfg.mu0 is not None else 1.0 / m0
    coupling = mu0 * m0
    inner_iters = newton_cfg.fixed_iters if newton_cfg.fixed_iters is not None else 1

    x = np.zeros(dataset.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    obj = RegularizedObjective(loss, dataset.prefix(m0), mu0)
    meter.stage = 0
    stage0_cfg = replace(newton_cfg, fixed_iters=None, eps=cfg.stage0_eps)
    res0 = newton.minimize(obj, x, stage0_cfg, meter, context="stage 0")
    if not res0.converged:
        logger.warning("stage 0 stopped at max_iters before reaching tolerance")
    x = res0.x
    F = res0.final_factorization
    stages = [StageRecord(0, m0, mu0, 1.0, res0.final_lambda, None, meter.epochs)]

    schedule = None
    if cfg.mode == "v1":
        probe = RegularizedObjective(loss, dataset.prefix(N), mu0)
        schedule = apriori_schedule(N, dataset.dim, m0, mu0, cfg,
                                    probe.phi_bound(), probe.lipschitz_estimate())

    t = 0
    m = m0
    while m < N:
        t += 1
        if cfg.mode == "v2":
            decision = find_growth(obj, F, x, cfg, coupling)
            meter.add_rows(decision.n - m)
            nu_t, n_t = decision.nu, decision.n
            alpha_t, lam_est = decision.alpha, decision.lambda_estimate
        else:
            # precomputed schedule: no growth-decision gradient work happens
            nu_t, n_t = schedule[t - 1]
            alpha_t, lam_est = m / n_t, None
        meter.stage = t
        obj = obj.with_window(n_t, nu_t)
        inner_cfg = replace(newton_cfg, fixed_iters=inner_iters)
        res = newton.minimize(obj, x, inner_cfg, meter, context=f"stage {t}")
        lam_hand = res.reports[0].lam
        if lam_hand > cfg.handover_factor * cfg.eta:
            raise HandoverViolationError(t, lam_hand, cfg.handover_factor * cfg.eta)
        x = res.x
        F = res.reports[-1].factorization
        stages.append(StageRecord(t, n_t, nu_t, alpha_t, lam_hand, lam_est, meter.epochs))
        m = n_t

    polish_cfg = replace(newton_cfg, fixed_iters=None, eps=cfg.eps)
    res = newton.minimize(obj, x, polish_cfg, meter, context="polish")
    stages[-1].epochs_used = meter.epochs
    return DynaResult(res.x, stages, res.converged, meter.epochs)
