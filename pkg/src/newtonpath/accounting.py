"""Effective-epoch accounting: data-touching work normalized by full passes.

Cost rules (applied uniformly by every solver):
  - a Newton gradient+Hessian evaluation on n rows costs n/N (one fused pass);
  - every line-search trial costs n/N;
  - a SAGA step costs 1/N;
  - an L-BFGS gradient evaluation costs n/N;
  - a growth decision costs (n_next - m)/N for its gradient work on new rows.
"""

from __future__ import annotations


def effective_epoch_cost(kind: str, *, n: int, n_total: int,
                         ls_trials: int = 0, new_rows: int = 0) -> float:
    """Cost in effective epochs of one solver event of the given kind."""
    if kind == "newton_step":
        return (1 + ls_trials) * n / n_total
    if kind == "lbfgs_step":
        return (1 + ls_trials) * n / n_total
    if kind == "saga_step":
        return 1.0 / n_total
    if kind == "growth_decision":
        return new_rows / n_total
    raise ValueError(f"unknown event kind {kind!r}")


class WorkMeter:
    """Accumulates effective epochs; solvers report raw row counts.

    ``record`` is a hook for trace emission; the base meter ignores it so the
    solvers can run without a harness attached.
    """

    def __init__(self, rows_per_epoch: int):
        if rows_per_epoch <= 0:
            raise ValueError("rows_per_epoch must be positive")
        self.rows_per_epoch = rows_per_epoch
        self.epochs = 0.0
        self.stage: int | None = None

    def add_rows(self, rows: int) -> None:
        self.epochs += rows / self.rows_per_epoch

    def record(self, x, lam=None) -> None:
        pass
