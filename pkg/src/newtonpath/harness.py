"""Experiment front end: load data, run a configured solver with effective-epoch
accounting, compute reference optima, and emit CSV/JSON traces and SVG charts."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import baselines, continuation, lbfgs as lbfgs_mod, newton
from .accounting import WorkMeter
from .continuation import ContinuationConfig, HandoverViolationError
from .dataset import (Dataset, benchmark_dataset, load_svmlight,
                      synthesize_logistic, synthesize_onehot_classification,
                      synthesize_sparse_classification, train_test_split)
from .lbfgs import LbfgsConfig
from .newton import LineSearchStallError, NewtonConfig
from .objective import LossKind, RegularizedObjective

logger = logging.getLogger(__name__)

SOLVERS = ("newton", "dyna_newton_v1", "dyna_newton_v2", "saga", "lbfgs", "dyna_lbfgs")
TRACE_HEADER = ("epoch", "time_s", "train_value", "subopt", "test_risk", "lambda", "stage")
CACHE_ENV_VAR = "NEWTONPATH_CACHE"


class SolverFailure(RuntimeError):
    """A solver aborted (hand-over violation, stall, or non-convergence)."""


@dataclass
class TraceRecord:
    epoch: float
    time_s: float
    train_value: float
    subopt: float
    test_risk: float
    lam: float | None = None
    stage: int | None = None


class Trace:
    """Per-record convergence history with CSV round-trip."""

    def __init__(self, records: list[TraceRecord] | None = None):
        self.records = records if records is not None else []

    def append(self, rec: TraceRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def epochs_to_reach(self, level: float) -> float | None:
        """First recorded epoch at which suboptimality is <= level."""
        for rec in self.records:
            if rec.subopt <= level:
                return rec.epoch
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.records:
            w.writerow([
                f"{r.epoch:.9g}", f"{r.time_s:.6f}", f"{r.train_value:.17g}",
                f"{r.subopt:.17g}", f"{r.test_risk:.17g}",
                "" if r.lam is None else f"{r.lam:.9g}",
                "" if r.stage is None else str(r.stage),
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_HEADER:
            raise ValueError("not a trace file (bad header)")
        records = []
        for row in rows[1:]:
            if not row:
                continue
            records.append(TraceRecord(
                float(row[0]), float(row[1]), float(row[2]), float(row[3]),
                float(row[4]),
                float(row[5]) if row[5] else None,
                int(row[6]) if row[6] else None))
        return cls(records)


class TraceRecorder(WorkMeter):
    """WorkMeter that also evaluates run diagnostics at every record point.

    Diagnostics (full-problem value, test risk) are measurement overhead and
    do not count toward effective epochs.
    """

    def __init__(self, full_obj: RegularizedObjective, f_ref: float,
                 test_obj: RegularizedObjective | None, record_wall_time: bool = True):
        super().__init__(full_obj.view.dataset.n_rows)
        self.full_obj = full_obj
        self.f_ref = f_ref
        self.test_obj = test_obj
        self.record_wall_time = record_wall_time
        self.trace = Trace()
        self._t0 = time.perf_counter()

    def _test_risk(self, x) -> float:
        if self.test_obj is None:
            return float("nan")
        t = self.test_obj.margins(x)
        return float(self.test_obj._loss_values(t).mean())

    def record(self, x, lam=None):
        value = self.full_obj.value(x)
        elapsed = time.perf_counter() - self._t0 if self.record_wall_time else 0.0
        self.trace.append(TraceRecord(
            self.epochs, elapsed, value, value - self.f_ref,
            self._test_risk(x), lam, self.stage))


@dataclass
class ExperimentConfig:
    solver: str
    dataset: str | None = None            # svmlight path (.gz ok)
    synthetic: dict | None = None         # generator spec, see _load_dataset
    out_dir: str = "runs/out"
    nu_final: float | None = None         # default 1/N_train
    x0: float = 0.0                       # constant initial vector value
    seed: int = 0                         # split + stochastic-solver seed
    test_fraction: float = 0.1
    loss: str = "logistic"
    dim_override: int | None = None
    epochs: int = 20                      # saga epoch budget
    record_wall_time: bool = True
    newton: dict = field(default_factory=dict)
    continuation: dict = field(default_factory=dict)
    lbfgs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; pick one of {SOLVERS}")
        if (self.dataset is None) == (self.synthetic is None):
            raise ValueError("exactly one of dataset / synthetic must be given")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def resolved_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    x: np.ndarray
    trace: Trace
    stages: list
    converged: bool
    epochs: float
    f_ref: float
    out_dir: Path


def _load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset is not None:
        path = Path(cfg.dataset)
        if not path.exists():
            raise FileNotFoundError(f"dataset file not found: {path}")
        return load_svmlight(path, dim=cfg.dim_override)
    spec = dict(cfg.synthetic)
    kind = spec.pop("kind", "logistic")
    if kind == "logistic":
        return synthesize_logistic(**spec)
    if kind == "sparse":
        return synthesize_sparse_classification(**spec)
    if kind == "onehot":
        spec["group_sizes"] = tuple(spec["group_sizes"])
        return synthesize_onehot_classification(**spec)
    if kind == "benchmark":
        return benchmark_dataset(spec["name"])
    raise ValueError(f"unknown synthetic kind {kind!r}")


def _cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV_VAR)
    if root:
        return Path(root)
    return Path.home() / ".cache" / "newtonpath"


def reference_optimum(dataset: Dataset, nu: float, loss: LossKind = LossKind.LOGISTIC,
                      use_cache: bool = True) -> tuple[float, bool]:
    """Minimum value of the full-dataset objective at strength nu, to
    lambda^2/2 <= 1e-14, cached on disk keyed by (dataset hash, nu).

    Returns (value, cache_hit).
    """
    key = f"{dataset.content_hash()}:{loss.value}:{nu:.17g}"
    cache_file = _cache_dir() / "reference.json"
    cache = {}
    if use_cache and cache_file.exists():
        try:
            cache = json.loads(cache_file.read_text())
        except json.JSONDecodeError:
            cache = {}
        if key in cache:
            return float(cache[key]), True
    obj = RegularizedObjective(loss, dataset.prefix(dataset.n_rows), nu)
    cfg = NewtonConfig(eps=1e-14, max_iters=500)
    res = newton.minimize(obj, np.zeros(dataset.dim), cfg, context="reference")
    if not res.converged:
        raise SolverFailure("reference optimum did not converge to 1e-14")
    value = obj.value(res.x)
    if use_cache:
        cache[key] = value
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.with_suffix(".tmp")
        tmp.write_text(json.dumps(cache, indent=1, sort_keys=True))
        tmp.replace(cache_file)
    return value, False


def _dispatch(cfg: ExperimentConfig, train: Dataset, loss: LossKind,
              nu_final: float, recorder: TraceRecorder):
    """Run the configured solver; returns (x, stages, converged)."""
    x0 = np.full(train.dim, float(cfg.x0))
    n = train.n_rows
    full_obj = RegularizedObjective(loss, train.prefix(n), nu_final)
    newton_cfg, ccfg, lcfg = _resolve_solver_configs(cfg, train.dim, n, nu_final)
    if cfg.solver == "newton":
        res = newton.minimize(full_obj, x0, newton_cfg, recorder, context="newton")
        return res.x, [], res.converged
    if cfg.solver in ("dyna_newton_v1", "dyna_newton_v2"):
        res = continuation.dyna_newton(train, ccfg, newton_cfg, loss=loss,
                                       x0=x0, observer=recorder)
        return res.x, res.stages, res.converged
    if cfg.solver == "saga":
        res = baselines.saga_run(full_obj, x0, cfg.epochs, cfg.seed, recorder)
        return res.x, [], True
    if cfg.solver == "lbfgs":
        res = lbfgs_mod.lbfgs_minimize(full_obj, x0, lcfg, recorder)
        return res.x, [], res.converged
    res = lbfgs_mod.dyna_lbfgs(train, ccfg, lcfg, loss=loss, x0=x0, observer=recorder)
    return res.x, res.stages, res.converged


def _resolve_solver_configs(cfg: ExperimentConfig, dim: int, n: int, nu_final: float):
    newton_cfg = NewtonConfig(**cfg.newton)
    cont_kwargs = dict(cfg.continuation)
    cont_kwargs.setdefault("mode", "v1" if cfg.solver.endswith("v1") else "v2")
    ccfg = ContinuationConfig(**cont_kwargs)
    if ccfg.m0 is None:
        ccfg.m0 = min(max(4 * dim, 128), n)
    if ccfg.mu0 is None:
        ccfg.mu0 = nu_final * n / ccfg.m0   # coupled path lands on nu_final at N
    lcfg = LbfgsConfig(**cfg.lbfgs)
    return newton_cfg, ccfg, lcfg


def run(cfg: ExperimentConfig) -> RunResult:
    """Execute one experiment and write trace.csv, stages.json, config.json.

    On solver failure a diagnostics.json is written and SolverFailure raised.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss = LossKind(cfg.loss)
    ds = _load_dataset(cfg)
    train, test = train_test_split(ds, cfg.test_fraction, cfg.seed)
    n = train.n_rows
    nu_final = cfg.nu_final if cfg.nu_final is not None else 1.0 / n

    f_ref, _ = reference_optimum(train, nu_final, loss)
    full_obj = RegularizedObjective(loss, train.prefix(n), nu_final)
    test_obj = RegularizedObjective(loss, test.prefix(test.n_rows), 0.0)
    recorder = TraceRecorder(full_obj, f_ref, test_obj, cfg.record_wall_time)

    resolved = cfg.resolved_dict()
    resolved["nu_final"] = nu_final
    newton_cfg, ccfg, lcfg = _resolve_solver_configs(cfg, train.dim, n, nu_final)
    resolved["newton"] = asdict(newton_cfg)
    resolved["continuation"] = asdict(ccfg)
    resolved["lbfgs"] = asdict(lcfg)
    (out_dir / "config.json").write_text(json.dumps(resolved, indent=1, sort_keys=True))

    x0 = np.full(train.dim, float(cfg.x0))
    recorder.record(x0, lam=None)  # epoch-0 baseline point
    logger.info("%s on %d rows (d=%d, nu=%.3g)", cfg.solver, n, train.dim, nu_final)
    try:
        x, stages, converged = _dispatch(cfg, train, loss, nu_final, recorder)
    except (HandoverViolationError, LineSearchStallError, SolverFailure) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc),
                "epochs": recorder.epochs,
                "stage": getattr(exc, "stage", None)}
        (out_dir / "diagnostics.json").write_text(json.dumps(diag, indent=1))
        raise

    (out_dir / "trace.csv").write_text(recorder.trace.to_csv())
    (out_dir / "stages.json").write_text(json.dumps(
        [s.to_dict() for s in stages], indent=1))
    logger.info("done: %.2f effective epochs, converged=%s", recorder.epochs, converged)
    return RunResult(x, recorder.trace, stages, converged, recorder.epochs,
                     f_ref, out_dir)


def statistical_accuracy_level(trace: Trace, improvement_tol: float = 1e-4) -> float | None:
    """Suboptimality at the first record where the test risk stops improving
    (successive improvement below improvement_tol)."""
    recs = trace.records
    for prev, cur in zip(recs, recs[1:]):
        if np.isfinite(prev.test_risk) and prev.test_risk - cur.test_risk < improvement_tol:
            return cur.subopt
    return None


def plot(trace_paths: list, out_path: str | Path, *, x_axis: str = "epoch",
         labels: list | None = None, stat_line: bool = False,
         title: str | None = None) -> Path:
    """Multi-series convergence chart (log10 suboptimality) written as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if x_axis not in ("epoch", "time_s"):
        raise ValueError("x_axis must be 'epoch' or 'time_s'")
    traces = []
    for p in trace_paths:
        tr = Trace.from_csv(Path(p).read_text())
        if len(tr) == 0:
            raise ValueError(f"empty trace: {p}")
        traces.append(tr)
    if labels is None:
        labels = [Path(p).parent.name or Path(p).stem for p in trace_paths]

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for tr, label in zip(traces, labels):
        xs = [getattr(r, "epoch" if x_axis == "epoch" else "time_s") for r in tr.records]
        ys = [max(r.subopt, 1e-16) for r in tr.records]  # guard the log axis
        ax.semilogy(xs, ys, marker="", linewidth=1.6, label=label)
    if stat_line:
        level = statistical_accuracy_level(traces[0])
        if level is not None:
            ax.axhline(max(level, 1e-16), linestyle=":", color="0.4",
                       linewidth=1.2, label="statistical accuracy")
    ax.set_xlabel("effective epochs" if x_axis == "epoch" else "time (s)")
    ax.set_ylabel("suboptimality")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path
