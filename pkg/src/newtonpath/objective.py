"""Regularized empirical risk: value, gradient, Hessian and per-sample pieces
for logistic and quadratic losses over a prefix window.

The objective is  f(x) = (1/n) sum_i loss(z_i, y_i; x) + nu * ||x||^2 / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .dataset import PrefixView


class LossKind(Enum):
    LOGISTIC = "logistic"
    QUADRATIC = "quadratic"


@dataclass
class EvalReport:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray | None = None


class RegularizedObjective:
    """Loss family + prefix window + l2 strength nu.

    All evaluations are single passes over the window's rows; the logistic
    branch is numerically stable for margins up to the float64 exp range.
    """

    def __init__(self, loss: LossKind, view: PrefixView, nu: float):
        if nu < 0:
            raise ValueError("nu must be >= 0")
        self.loss = loss
        self.view = view
        self.nu = float(nu)

    @property
    def n(self) -> int:
        return self.view.n

    @property
    def dim(self) -> int:
        return self.view.dim

    def margins(self, x: np.ndarray) -> np.ndarray:
        return self.view.matrix @ x

    def _loss_values(self, t: np.ndarray) -> np.ndarray:
        y = self.view.labels
        if self.loss is LossKind.LOGISTIC:
            return np.logaddexp(0.0, -y * t)
        return 0.5 * (t - y) ** 2

    def _loss_coeffs(self, t: np.ndarray) -> np.ndarray:
        """Per-sample scalar c_i with grad phi_i(x) = c_i * z_i."""
        y = self.view.labels
        if self.loss is LossKind.LOGISTIC:
            return -y * expit(-y * t)
        return t - y

    def _curvature_weights(self, t: np.ndarray) -> np.ndarray:
        if self.loss is LossKind.LOGISTIC:
            s = expit(self.view.labels * t)
            return s * (1.0 - s)
        return np.ones_like(t)

    def value(self, x: np.ndarray) -> float:
        t = self.margins(x)
        return float(self._loss_values(t).mean() + 0.5 * self.nu * (x @ x))

    def evaluate(self, x: np.ndarray, want_hessian: bool = False) -> EvalReport:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.dim},)")
        Z = self.view.matrix
        t = Z @ x
        value = float(self._loss_values(t).mean() + 0.5 * self.nu * (x @ x))
        coeffs = self._loss_coeffs(t)
        grad = np.asarray(Z.T @ coeffs).ravel() / self.n + self.nu * x
        hess = None
        if want_hessian:
            w = self._curvature_weights(t)
            Zw = Z.multiply(np.sqrt(w)[:, None]).tocsr()
            hess = np.asarray((Zw.T @ Zw).todense()) / self.n
            hess[np.diag_indices_from(hess)] += self.nu
        if not np.isfinite(value):
            raise FloatingPointError("objective value is not finite")
        return EvalReport(value, grad, hess)

    def range_gradient_sum(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        """Sum of grad phi_i(x) over rows [start, stop) of the backing dataset.

        Rows beyond the current window are allowed as long as they exist; this
        is the incremental piece used when appending new samples.
        """
        ds = self.view.dataset
        if not 0 <= start <= stop <= ds.n_rows:
            raise ValueError("row range out of bounds")
        a, b = ds.indptr[start], ds.indptr[stop]
        Zr = sp.csr_matrix((ds.data[a:b], ds.indices[a:b], ds.indptr[start:stop + 1] - a),
                           shape=(stop - start, ds.dim), copy=False)
        t = Zr @ x
        y = ds.labels[start:stop]
        if self.loss is LossKind.LOGISTIC:
            coeffs = -y * expit(-y * t)
        else:
            coeffs = t - y
        return np.asarray(Zr.T @ coeffs).ravel()

    def per_sample_coeff(self, i: int, x: np.ndarray) -> float:
        """GLM scalar multiplier: grad phi_i(x) = coeff * z_i (no regularizer term)."""
        if not 0 <= i < self.n:
            raise IndexError(f"row {i} outside window of {self.n}")
        idx, val = self.view.dataset.row(i)
        t = float(val @ x[idx])
        y = self.view.labels[i]
        if self.loss is LossKind.LOGISTIC:
            return float(-y * expit(-y * t))
        return t - y

    def per_sample_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        """Dense grad phi_i(x), regularizer excluded."""
        c = self.per_sample_coeff(i, x)
        idx, val = self.view.dataset.row(i)
        g = np.zeros(self.dim)
        g[idx] = c * val
        return g

    def phi_bound(self) -> float:
        """Upper bound on the per-sample loss at x = 0."""
        if self.loss is LossKind.LOGISTIC:
            return float(np.log(2.0))
        return float(0.5 * np.max(self.view.labels ** 2))

    def lipschitz_estimate(self) -> float:
        """Row-norm upper bound on the gradient Lipschitz constant (includes nu)."""
        r2 = self.view.max_row_sq_norm()
        if self.loss is LossKind.LOGISTIC:
            return 0.25 * r2 + self.nu
        return r2 + self.nu

    def with_window(self, n: int, nu: float) -> "RegularizedObjective":
        """Same loss and backing dataset, different prefix length and strength."""
        return RegularizedObjective(self.loss, self.view.dataset.prefix(n), nu)
