"""Dense SPD factorization with jitter escalation, plus solves and inverse
quadratic forms for Newton steps and decrement computation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

JITTER_BASE = 1e-12
MAX_ESCALATIONS = 30


class SingularHessianError(RuntimeError):
    """Cholesky failed even after the maximum jitter escalation."""

    def __init__(self, context: str = ""):
        msg = "matrix not positive definite after jitter escalation"
        super().__init__(f"{msg} ({context})" if context else msg)
        self.context = context


@dataclass
class SpdFactorization:
    """Lower Cholesky factor of H + jitter*I; jitter is 0 or the minimal
    JITTER_BASE * 2^k that made the factorization succeed."""

    chol: np.ndarray
    jitter: float
    dim: int


def factor_spd(H: np.ndarray, context: str = "") -> SpdFactorization:
    """Cholesky of (H + H.T)/2, escalating jitter x2 from 1e-12 until success."""
    H = np.asarray(H, dtype=np.float64)
    Hs = 0.5 * (H + H.T)
    d = Hs.shape[0]
    jitter = 0.0
    for k in range(MAX_ESCALATIONS + 2):
        try:
            M = Hs if jitter == 0.0 else Hs + jitter * np.eye(d)
            L = np.linalg.cholesky(M)
            return SpdFactorization(L, jitter, d)
        except np.linalg.LinAlgError:
            if k > MAX_ESCALATIONS:
                break
            jitter = JITTER_BASE * (2.0 ** k)
    raise SingularHessianError(context)


def solve(F: SpdFactorization, b: np.ndarray) -> np.ndarray:
    """Return (H + jitter*I)^-1 b via two triangular solves."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (F.dim,):
        raise ValueError(f"b has shape {b.shape}, expected ({F.dim},)")
    w = solve_triangular(F.chol, b, lower=True)
    return solve_triangular(F.chol.T, w, lower=False)


def quad_form_inv(F: SpdFactorization, g: np.ndarray) -> float:
    """g^T (H + jitter*I)^-1 g, computed as the squared norm of a forward
    substitution so the result is non-negative by construction."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (F.dim,):
        raise ValueError(f"g has shape {g.shape}, expected ({F.dim},)")
    w = solve_triangular(F.chol, g, lower=True)
    return float(w @ w)
