"""Built-in quick verification suites for the `check` CLI command.

These are smoke-level versions of the full test suite: derivative oracles,
factorization oracles, the regularization-reduction boundary identity, and
split determinism. Each suite prints one PASS/FAIL line.
"""

from __future__ import annotations

import numpy as np

from . import linalg, newton
from .continuation import nu_lower_bound
from .dataset import synthesize_logistic, train_test_split
from .newton import NewtonConfig
from .objective import LossKind, RegularizedObjective


def _check_derivatives(rng) -> bool:
    ok = True
    for kind in (LossKind.LOGISTIC, LossKind.QUADRATIC):
        ds = synthesize_logistic(60, 5, int(rng.integers(1 << 30)))
        obj = RegularizedObjective(kind, ds.prefix(60), 0.05)
        x = rng.standard_normal(5)
        u = rng.standard_normal(5)
        u /= np.linalg.norm(u)
        h = 1e-5
        fd = (obj.value(x + h * u) - obj.value(x - h * u)) / (2 * h)
        rep = obj.evaluate(x, want_hessian=True)
        ok &= abs(fd - rep.gradient @ u) <= 1e-5 * max(1.0, abs(fd))
        gd = (obj.evaluate(x + h * u).gradient - obj.evaluate(x - h * u).gradient) / (2 * h)
        hv = rep.hessian @ u
        ok &= np.linalg.norm(gd - hv) <= 1e-4 * max(1.0, np.linalg.norm(gd))
    return bool(ok)


def _check_factorization(rng) -> bool:
    ok = True
    for _ in range(5):
        A = rng.standard_normal((8, 8))
        H = A.T @ A + 0.1 * np.eye(8)
        F = linalg.factor_spd(H)
        b = rng.standard_normal(8)
        ok &= np.linalg.norm(linalg.solve(F, b) - np.linalg.inv(H) @ b) <= 1e-9
        ok &= abs(linalg.quad_form_inv(F, b) - b @ np.linalg.inv(H) @ b) <= 1e-9 * (b @ b)
    return bool(ok)


def _check_reduction_boundary(rng) -> bool:
    ok = True
    eta = 0.2
    for seed in (1, 2, 3):
        ds = synthesize_logistic(120, 4, seed)
        mu = 0.5
        obj = RegularizedObjective(LossKind.LOGISTIC, ds.prefix(120), mu)
        res = newton.minimize(obj, np.zeros(4), NewtonConfig(eps=1e-16))
        x_norm = float(np.linalg.norm(res.x))
        nu_min = nu_lower_bound(mu, x_norm, eta)
        if nu_min > 0:
            lhs = (mu - nu_min) * x_norm
            rhs = eta * np.sqrt(nu_min)
            ok &= abs(lhs - rhs) <= 1e-8 * rhs
            lam = newton.decrement(obj.with_window(120, nu_min), res.x)
            ok &= lam <= eta * (1 + 1e-9)
    return bool(ok)


def _check_split_determinism(rng) -> bool:
    ds = synthesize_logistic(50, 3, 11)
    a1, b1 = train_test_split(ds, 0.2, seed=5)
    a2, b2 = train_test_split(ds, 0.2, seed=5)
    return a1.to_svmlight() == a2.to_svmlight() and b1.to_svmlight() == b2.to_svmlight()


SUITES = (
    ("derivative oracles", _check_derivatives),
    ("spd factorization oracles", _check_factorization),
    ("reduction boundary identity", _check_reduction_boundary),
    ("split determinism", _check_split_determinism),
)


def run_checks() -> bool:
    rng = np.random.default_rng(0)
    all_ok = True
    for name, fn in SUITES:
        ok = fn(rng)
        all_ok &= ok
        print(f"[check] {name}: {'PASS' if ok else 'FAIL'}")
    return bool(all_ok)
