"""Damped Newton solver: backtracking line search, Newton decrement, and a
fixed-iteration mode used as the continuation driver's inner solve."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import SpdFactorization
from .objective import RegularizedObjective

MAX_LS_HALVINGS = 60


class LineSearchStallError(RuntimeError):
    """Backtracking exhausted its halving budget without sufficient decrease."""

    def __init__(self, context: str = ""):
        msg = f"line search stalled after {MAX_LS_HALVINGS} halvings"
        super().__init__(f"{msg} ({context})" if context else msg)
        self.context = context


@dataclass
class NewtonConfig:
    ls_alpha: float = 0.1          # sufficient-decrease constant, in (0, 0.5)
    ls_beta: float = 0.5           # backtracking shrink factor, in (0, 1)
    eps: float = 1e-12             # stop when lambda^2 / 2 <= eps
    max_iters: int = 200
    fixed_iters: int | None = None  # run exactly this many steps, ignoring eps

    def __post_init__(self):
        if not 0.0 < self.ls_alpha < 0.5:
            raise ValueError("ls_alpha must be in (0, 0.5)")
        if not 0.0 < self.ls_beta < 1.0:
            raise ValueError("ls_beta must be in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass
class NewtonStepReport:
    lam: float                     # Newton decrement at the pre-step point
    step_size: float
    ls_trials: int
    factorization: SpdFactorization
    value: float                   # objective value at the pre-step point


@dataclass
class MinimizeResult:
    x: np.ndarray
    reports: list[NewtonStepReport] = field(default_factory=list)
    converged: bool = False
    final_lambda: float | None = None
    final_factorization: SpdFactorization | None = None

    @property
    def iterations(self) -> int:
        return len(self.reports)


def _prepare(obj: RegularizedObjective, x: np.ndarray, context: str = ""):
    rep = obj.evaluate(x, want_hessian=True)
    F = linalg.factor_spd(rep.hessian, context=context)
    lam = float(np.sqrt(linalg.quad_form_inv(F, rep.gradient)))
    return rep, F, lam


def _backtrack(obj, x, value, grad, direction, cfg, observer=None):
    """Armijo backtracking from t = 1; returns (x_next, t, trials)."""
    slope = float(grad @ direction)
    t = 1.0
    for trial in range(1, MAX_LS_HALVINGS + 2):
        x_next = x + t * direction
        if observer is not None:
            observer.add_rows(obj.n)
        if obj.value(x_next) <= value + cfg.ls_alpha * t * slope:
            return x_next, t, trial
        if trial > MAX_LS_HALVINGS:
            break
        t *= cfg.ls_beta
    raise LineSearchStallError(f"slope={slope:.3e}")


def newton_step(obj: RegularizedObjective, x: np.ndarray, cfg: NewtonConfig,
                observer=None, context: str = ""):
    """One damped Newton step; returns (x_next, report).

    The report carries the decrement at the pre-step point and the retained
    factorization of the Hessian there.
    """
    if observer is not None:
        observer.add_rows(obj.n)
    rep, F, lam = _prepare(obj, x, context)
    if lam == 0.0:
        return x.copy(), NewtonStepReport(0.0, 1.0, 1, F, rep.value)
    direction = -linalg.solve(F, rep.gradient)
    x_next, t, trials = _backtrack(obj, x, rep.value, rep.gradient, direction, cfg, observer)
    return x_next, NewtonStepReport(lam, t, trials, F, rep.value)


def decrement(obj: RegularizedObjective, x: np.ndarray) -> float:
    """Exact Newton decrement sqrt(g^T H^-1 g) at x."""
    rep = obj.evaluate(x, want_hessian=True)
    return decrement_from(rep.gradient, rep.hessian)


def decrement_from(gradient: np.ndarray, hessian: np.ndarray) -> float:
    F = linalg.factor_spd(hessian)
    return float(np.sqrt(linalg.quad_form_inv(F, gradient)))


def minimize(obj: RegularizedObjective, x0: np.ndarray, cfg: NewtonConfig,
             observer=None, context: str = "") -> MinimizeResult:
    """Iterate Newton steps until lambda^2/2 <= eps or max_iters.

    With cfg.fixed_iters set, runs exactly that many steps regardless of the
    decrement and skips the terminal convergence check. In tolerance mode the
    terminal check leaves a fresh factorization at the final point in
    ``final_factorization``.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    result = MinimizeResult(x)
    n_steps = cfg.fixed_iters if cfg.fixed_iters is not None else cfg.max_iters
    for _ in range(n_steps):
        if cfg.fixed_iters is None:
            if observer is not None:
                observer.add_rows(obj.n)
            rep, F, lam = _prepare(obj, x, context)
            if lam * lam / 2.0 <= cfg.eps:
                result.converged = True
                result.final_lambda = lam
                result.final_factorization = F
                break
            direction = -linalg.solve(F, rep.gradient)
            x, t, trials = _backtrack(obj, x, rep.value, rep.gradient, direction, cfg, observer)
            result.reports.append(NewtonStepReport(lam, t, trials, F, rep.value))
        else:
            x, report = newton_step(obj, x, cfg, observer, context)
            result.reports.append(report)
        if observer is not None:
            observer.record(x, lam=result.reports[-1].lam)
    else:
        if cfg.fixed_iters is not None:
            result.converged = True  # ran the requested step count
        else:
            # max_iters exhausted: measure where we ended up, flag non-convergence
            if observer is not None:
                observer.add_rows(obj.n)
            rep, F, lam = _prepare(obj, x, context)
            result.final_lambda = lam
            result.final_factorization = F
            result.converged = lam * lam / 2.0 <= cfg.eps
    result.x = x
    return result
