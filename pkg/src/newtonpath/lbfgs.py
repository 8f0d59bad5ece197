"""Limited-memory BFGS and its continuation variant.

The continuation variant reuses the growth driver; with no exact Hessian
factorization available, the decrement model behind the growth decision is
the quasi-Newton inverse applied through the two-loop recursion.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .accounting import WorkMeter
from .continuation import (ContinuationConfig, DynaResult, StageRecord,
                           HandoverViolationError, find_growth)
from .dataset import Dataset
from .newton import LineSearchStallError, MAX_LS_HALVINGS
from .objective import LossKind, RegularizedObjective

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-12


@dataclass
class LbfgsConfig:
    memory: int = 10
    ls_alpha: float = 0.1
    ls_beta: float = 0.5
    tol: float = 1e-10             # stop when ||g|| <= tol
    max_iters: int = 2000


class LbfgsMemory:
    """Ring buffer of (s, y) pairs with curvature screening.

    Pairs with s.y <= 1e-12 ||s|| ||y|| are skipped (counted, not stored) so
    the implicit inverse-Hessian model stays positive definite.
    """

    def __init__(self, capacity: int = 10):
        self.pairs: deque = deque(maxlen=capacity)
        self.skipped = 0
        self.updates = 0

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        self.updates += 1
        sy = float(s @ y)
        if sy <= CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(y):
            self.skipped += 1
            return False
        self.pairs.append((s.copy(), y.copy(), sy))
        return True

    @property
    def gamma(self) -> float:
        """Initial inverse-Hessian scale from the newest stored pair."""
        if not self.pairs:
            return 1.0
        s, y, sy = self.pairs[-1]
        return sy / float(y @ y)


def two_loop_direction(mem: LbfgsMemory, g: np.ndarray) -> np.ndarray:
    """Apply the implicit inverse-Hessian model: returns -H_approx^-1 g.

    With empty memory this is steepest descent -g.
    """
    q = g.astype(np.float64).copy()
    pairs = list(mem.pairs)
    alphas = []
    for s, y, sy in reversed(pairs):
        a = (s @ q) / sy
        q -= a * y
        alphas.append(a)
    q *= mem.gamma
    for (s, y, sy), a in zip(pairs, reversed(alphas)):
        b = (y @ q) / sy
        q += (a - b) * s
    return -q


@dataclass
class LbfgsResult:
    x: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    memory: LbfgsMemory
    values: list = field(default_factory=list)


def _backtrack_value(obj, x, value, grad, direction, cfg, observer=None):
    slope = float(grad @ direction)
    if slope >= 0:
        raise LineSearchStallError("non-descent direction")
    t = 1.0
    for trial in range(1, MAX_LS_HALVINGS + 2):
        x_next = x + t * direction
        if observer is not None:
            observer.add_rows(obj.n)
        v = obj.value(x_next)
        if v <= value + cfg.ls_alpha * t * slope:
            return x_next, v, t
        if trial > MAX_LS_HALVINGS:
            break
        t *= cfg.ls_beta
    raise LineSearchStallError(f"slope={slope:.3e}")


def lbfgs_minimize(obj: RegularizedObjective, x0: np.ndarray, cfg: LbfgsConfig,
                   observer=None, memory: LbfgsMemory | None = None,
                   tol: float | None = None, initial_eval=None) -> LbfgsResult:
    """Backtracking L-BFGS until ||g|| <= tol (default cfg.tol) or max_iters.

    ``initial_eval`` lets a caller that already evaluated the objective at x0
    hand over (value, gradient) without a second pass.
    """
    tol = cfg.tol if tol is None else tol
    mem = memory if memory is not None else LbfgsMemory(cfg.memory)
    x = np.asarray(x0, dtype=np.float64).copy()
    if initial_eval is None:
        if observer is not None:
            observer.add_rows(obj.n)
        rep = obj.evaluate(x)
    else:
        rep = initial_eval
    value, grad = rep.value, rep.gradient
    gnorm = float(np.linalg.norm(grad))
    values = [value]
    it = 0
    while gnorm > tol and it < cfg.max_iters:
        direction = two_loop_direction(mem, grad)
        x_next, _, _ = _backtrack_value(obj, x, value, grad, direction, cfg, observer)
        if observer is not None:
            observer.add_rows(obj.n)
        rep = obj.evaluate(x_next)
        mem.push(x_next - x, rep.gradient - grad)
        x, value, grad = x_next, rep.value, rep.gradient
        gnorm = float(np.linalg.norm(grad))
        values.append(value)
        it += 1
        if observer is not None:
            observer.record(x, lam=None)
    return LbfgsResult(x, it, gnorm <= tol, gnorm, mem, values)


def dyna_lbfgs(dataset: Dataset, cfg: ContinuationConfig,
               lbfgs_cfg: LbfgsConfig | None = None, *,
               loss: LossKind = LossKind.LOGISTIC,
               x0: np.ndarray | None = None,
               observer=None,
               inner_factor: float = 0.5) -> DynaResult:
    """Continuation L-BFGS: same growth driver with the decrement model taken
    from the carried quasi-Newton memory.

    The growth scan evaluates the first-order decrement estimate

        lambda^2 ~= g^T Happrox^-1 g + (mu - nu) ||Happrox^-1 g||^2

    with the inverse applied by the two-loop recursion, so no Hessian is ever
    formed; the same model decrement at each stage start is recorded as the
    hand-over value. Each stage then iterates L-BFGS to the gradient-norm
    tolerance inner_factor * eta * sqrt(nu). Memory is carried across stage
    boundaries; curvature screening drops the occasional stale pair.
    """
    N = dataset.n_rows
    lcfg = lbfgs_cfg if lbfgs_cfg is not None else LbfgsConfig()
    meter = observer if observer is not None else WorkMeter(N)
    m0 = cfg.m0 if cfg.m0 is not None else max(4 * dataset.dim, 128)
    m0 = min(m0, N)
    mu0 = cfg.mu0 if cfg.mu0 is not None else 1.0 / m0
    coupling = mu0 * m0

    x = np.zeros(dataset.dim) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    mem = LbfgsMemory(lcfg.memory)
    obj = RegularizedObjective(loss, dataset.prefix(m0), mu0)
    meter.stage = 0
    res = lbfgs_minimize(obj, x, lcfg, meter, mem,
                         tol=inner_factor * cfg.eta * math.sqrt(mu0))
    x = res.x
    proxy0 = res.grad_norm / math.sqrt(mu0)
    stages = [StageRecord(0, m0, mu0, 1.0, proxy0, None, meter.epochs)]

    t = 0
    m, mu = m0, mu0
    while m < N:
        t += 1

        def model_estimate(g, nu_c, _mu=mu):
            w = -two_loop_direction(mem, g)   # Happrox^-1 g
            return float(g @ w) + (_mu - nu_c) * float(w @ w)

        decision = find_growth(obj, None, x, cfg, coupling, estimator=model_estimate)
        meter.add_rows(decision.n - m)
        nu_t, n_t = decision.nu, decision.n
        meter.stage = t
        obj = obj.with_window(n_t, nu_t)
        meter.add_rows(obj.n)
        rep = obj.evaluate(x)
        w = -two_loop_direction(mem, rep.gradient)
        handover = math.sqrt(max(float(rep.gradient @ w), 0.0))
        # the hand-over value is a model decrement; a minimal-growth fallback
        # stage never established the guarantee, so only enforce the violation
        # threshold where the growth rule actually held
        if decision.feasible and handover > cfg.handover_factor * cfg.eta:
            raise HandoverViolationError(t, handover, cfg.handover_factor * cfg.eta)
        inner_tol = inner_factor * cfg.eta * math.sqrt(nu_t)
        res = lbfgs_minimize(obj, x, lcfg, meter, mem, tol=inner_tol, initial_eval=rep)
        x = res.x
        stages.append(StageRecord(t, n_t, nu_t, decision.alpha, handover,
                                  decision.lambda_estimate, meter.epochs))
        m, mu = n_t, nu_t

    # final polish to the configured gradient tolerance on the full objective
    res = lbfgs_minimize(obj, x, lcfg, meter, mem)
    stages[-1].epochs_used = meter.epochs
    return DynaResult(res.x, stages, res.converged, meter.epochs)
