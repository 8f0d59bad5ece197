import logging
import time

import numpy as np
import pytest

from newtonpath.baselines import saga_run
from newtonpath.continuation import ContinuationConfig, dyna_newton
from newtonpath.dataset import benchmark_dataset, train_test_split
from newtonpath.harness import TraceRecorder, reference_optimum
from newtonpath.lbfgs import LbfgsConfig, dyna_lbfgs, lbfgs_minimize
from newtonpath.newton import NewtonConfig, minimize
from newtonpath.objective import LossKind, RegularizedObjective

logging.getLogger("newtonpath").setLevel(logging.ERROR)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("NEWTONPATH_CACHE", str(tmp_path / "refcache"))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)


class Bench:
    """A benchmark dataset with its split, final objective and reference optimum."""

    def __init__(self, name, m0):
        ds = benchmark_dataset(name)
        self.dataset = ds
        self.train, self.test = train_test_split(ds, 0.1, seed=0)
        self.n = self.train.n_rows
        self.nu = 1.0 / self.n
        self.full_obj = RegularizedObjective(
            LossKind.LOGISTIC, self.train.prefix(self.n), self.nu)
        self.f_ref, _ = reference_optimum(self.train, self.nu, use_cache=False)
        self.m0 = m0

    def recorder(self):
        return TraceRecorder(self.full_obj, self.f_ref, None, record_wall_time=False)

    def continuation_config(self, **kw):
        kw.setdefault("m0", self.m0)
        kw.setdefault("mu0", self.nu * self.n / kw["m0"])
        return ContinuationConfig(**kw)

    def run_dyna(self, x0_value=0.0, m0=None, newton_cfg=None, **cont_kw):
        if m0 is not None:
            cont_kw["m0"] = m0
        cfg = self.continuation_config(**cont_kw)
        rec = self.recorder()
        x0 = np.full(self.train.dim, float(x0_value))
        rec.record(x0)
        t0 = time.perf_counter()
        res = dyna_newton(self.train, cfg,
                          newton_cfg if newton_cfg is not None else NewtonConfig(),
                          x0=x0, observer=rec)
        return res, rec.trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def a9a():
    # m0 chosen so the first growth stage sits where the curvature model is
    # already accurate (the initial-sample dimension ratio d/m0 is ~4%)
    return Bench("a9a_like", m0=3072)


@pytest.fixture(scope="session")
def w8a():
    return Bench("w8a_like", m0=2400)


@pytest.fixture(scope="session")
def a9a_v2_run(a9a):
    return a9a.run_dyna()


@pytest.fixture(scope="session")
def w8a_v2_run(w8a):
    return w8a.run_dyna()


@pytest.fixture(scope="session")
def a9a_newton_run(a9a):
    rec = a9a.recorder()
    x0 = np.zeros(a9a.train.dim)
    rec.record(x0)
    res = minimize(a9a.full_obj, x0, NewtonConfig(eps=1e-12), observer=rec)
    return res, rec.trace


@pytest.fixture(scope="session")
def a9a_saga_run(a9a):
    rec = a9a.recorder()
    x0 = np.zeros(a9a.train.dim)
    rec.record(x0)
    res = saga_run(a9a.full_obj, x0, epochs=12, seed=3, observer=rec)
    return res, rec.trace


@pytest.fixture(scope="session")
def a9a_lbfgs_run(a9a):
    rec = a9a.recorder()
    x0 = np.zeros(a9a.train.dim)
    rec.record(x0)
    res = lbfgs_minimize(a9a.full_obj, x0, LbfgsConfig(tol=1e-9, max_iters=3000),
                         observer=rec)
    return res, rec.trace


@pytest.fixture(scope="session")
def a9a_dyna_lbfgs_run(a9a):
    rec = a9a.recorder()
    x0 = np.zeros(a9a.train.dim)
    rec.record(x0)
    cfg = a9a.continuation_config()
    res = dyna_lbfgs(a9a.train, cfg, LbfgsConfig(tol=1e-9, max_iters=3000),
                     x0=x0, observer=rec)
    return res, rec.trace
