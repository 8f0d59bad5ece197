import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from newtonpath.accounting import effective_epoch_cost
from newtonpath.cli import main
from newtonpath.dataset import synthesize_logistic, write_svmlight
from newtonpath.harness import (ExperimentConfig, Trace, TraceRecord,
                                plot, reference_optimum, run,
                                statistical_accuracy_level)
from newtonpath.objective import LossKind, RegularizedObjective


SYN = {"kind": "logistic", "n": 2000, "d": 5, "seed": 2}


def small_cfg(tmp_path, solver="dyna_newton_v2", **kw):
    kw.setdefault("synthetic", dict(SYN))
    kw.setdefault("out_dir", str(tmp_path / solver))
    kw.setdefault("record_wall_time", False)
    return ExperimentConfig(solver=solver, **kw)


class TestEpochCost:
    def test_full_batch_newton_step_three_passes(self):
        assert effective_epoch_cost("newton_step", n=1000, n_total=1000,
                                    ls_trials=2) == pytest.approx(3.0)

    def test_saga_full_epoch(self):
        n = 1234
        total = sum(effective_epoch_cost("saga_step", n=n, n_total=n)
                    for _ in range(n))
        assert total == pytest.approx(1.0)

    def test_quarter_window_stage(self):
        assert effective_epoch_cost("newton_step", n=250, n_total=1000,
                                    ls_trials=1) == pytest.approx(0.5)

    def test_growth_decision(self):
        assert effective_epoch_cost("growth_decision", n=0, n_total=1000,
                                    new_rows=300) == pytest.approx(0.3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            effective_epoch_cost("mystery", n=1, n_total=1)


class TestReference:
    def test_quadratic_matches_closed_form(self, tmp_path):
        rng = np.random.default_rng(1)
        from newtonpath.dataset import Dataset
        import scipy.sparse as sp
        Z = rng.standard_normal((60, 4))
        labels = np.where(rng.random(60) < 0.5, 1.0, -1.0)
        m = sp.csr_matrix(Z)
        ds = Dataset(m.data, m.indices, m.indptr, labels, 4)
        nu = 0.2
        value, hit = reference_optimum(ds, nu, LossKind.QUADRATIC)
        H = Z.T @ Z / 60 + nu * np.eye(4)
        xstar = np.linalg.solve(H, Z.T @ labels / 60)
        obj = RegularizedObjective(LossKind.QUADRATIC, ds.prefix(60), nu)
        assert not hit
        assert abs(value - obj.value(xstar)) <= 1e-12

    def test_cache_hit_on_second_call(self):
        ds = synthesize_logistic(200, 4, seed=3)
        v1, hit1 = reference_optimum(ds, 0.01)
        v2, hit2 = reference_optimum(ds, 0.01)
        assert not hit1 and hit2
        assert v1 == v2

    def test_stable_across_fresh_computations(self):
        ds = synthesize_logistic(300, 4, seed=4)
        v1, _ = reference_optimum(ds, 0.005, use_cache=False)
        v2, _ = reference_optimum(ds, 0.005, use_cache=False)
        assert abs(v1 - v2) <= 1e-12 * max(1.0, abs(v1))


class TestTraceCsv:
    def test_roundtrip(self):
        tr = Trace([TraceRecord(0.0, 0.0, 1.0, 0.5, 0.7, None, None),
                    TraceRecord(1.5, 0.1, 0.6, 0.1, 0.65, 0.2, 3)])
        back = Trace.from_csv(tr.to_csv())
        assert len(back) == 2
        assert back.records[1].stage == 3
        assert back.records[1].lam == pytest.approx(0.2)
        assert back.records[0].lam is None

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            Trace.from_csv("a,b,c\n1,2,3\n")

    def test_epochs_to_reach(self):
        tr = Trace([TraceRecord(0, 0, 1, 1e-2, 0), TraceRecord(2, 0, 1, 1e-7, 0)])
        assert tr.epochs_to_reach(1e-6) == 2
        assert tr.epochs_to_reach(1e-9) is None


class TestRun:
    def test_writes_artifacts_and_converges(self, tmp_path):
        cfg = small_cfg(tmp_path)
        result = run(cfg)
        assert result.converged
        out = result.out_dir
        assert (out / "trace.csv").exists()
        assert (out / "stages.json").exists()
        assert (out / "config.json").exists()
        stages = json.loads((out / "stages.json").read_text())
        assert len(stages) >= 1
        resolved = json.loads((out / "config.json").read_text())
        assert resolved["nu_final"] == pytest.approx(1.0 / 1800)  # 90% of 2000 rows

    def test_identical_config_identical_trace_bytes(self, tmp_path):
        r1 = run(small_cfg(tmp_path / "a"))
        r2 = run(small_cfg(tmp_path / "b"))
        t1 = (r1.out_dir / "trace.csv").read_bytes()
        t2 = (r2.out_dir / "trace.csv").read_bytes()
        assert t1 == t2

    def test_stage_granularity_bounded_by_grid(self, tmp_path):
        # the grid bottom (0.25) caps growth at one quadrupling per stage, so
        # a run must emit at least one stage per quadrupling of the window
        cfg = small_cfg(tmp_path, continuation={"m0": 128, "mu0": 1.0 / 128})
        result = run(cfg)
        sizes = [s["m"] for s in json.loads(
            (result.out_dir / "stages.json").read_text())]
        n_quadruplings = int(np.floor(np.log(sizes[-1] / sizes[0]) / np.log(4)))
        assert len(sizes) - 1 >= n_quadruplings
        assert all(b / a <= 4.0 + 1e-9 for a, b in zip(sizes, sizes[1:]))

    def test_all_solvers_run(self, tmp_path):
        for solver in ("newton", "dyna_newton_v1", "saga", "lbfgs", "dyna_lbfgs"):
            cfg = small_cfg(tmp_path, solver=solver, epochs=3,
                            lbfgs={"tol": 1e-8, "max_iters": 500})
            result = run(cfg)
            assert len(result.trace) > 0

    def test_suboptimality_eventually_monotone(self, tmp_path):
        result = run(small_cfg(tmp_path))
        subs = [r.subopt for r in result.trace.records if r.epoch > 1.0]
        assert len(subs) >= 2
        assert all(b <= a + 1e-12 for a, b in zip(subs, subs[1:]))
        assert all(r.subopt >= -1e-12 for r in result.trace.records)

    def test_unknown_solver_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(solver="sgd", synthetic=SYN)

    def test_dataset_xor_synthetic(self):
        with pytest.raises(ValueError):
            ExperimentConfig(solver="newton")
        with pytest.raises(ValueError):
            ExperimentConfig(solver="newton", dataset="x.svm", synthetic=SYN)

    def test_file_dataset_roundtrip(self, tmp_path):
        ds = synthesize_logistic(500, 4, seed=9)
        path = tmp_path / "train.svm"
        write_svmlight(ds, path)
        cfg = ExperimentConfig(solver="newton", dataset=str(path),
                               out_dir=str(tmp_path / "out"),
                               record_wall_time=False)
        result = run(cfg)
        assert result.converged


class TestCli:
    def test_missing_dataset_exit_2(self, tmp_path, capsys):
        cfg = {"solver": "newton", "dataset": str(tmp_path / "nope.svm"),
               "out_dir": str(tmp_path / "out")}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(cfg_path)]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json")]) == 2

    def test_run_and_plot_end_to_end(self, tmp_path):
        cfg = {"solver": "dyna_newton_v2", "synthetic": SYN,
               "out_dir": str(tmp_path / "run"), "record_wall_time": False}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(cfg_path)]) == 0
        out_svg = tmp_path / "chart.svg"
        rc = main(["plot", str(tmp_path / "run" / "trace.csv"),
                   "--out", str(out_svg), "--stat-line"])
        assert rc == 0
        assert out_svg.exists()

    def test_reference_command(self, tmp_path, capsys):
        ds = synthesize_logistic(200, 3, seed=5)
        path = tmp_path / "d.svm"
        write_svmlight(ds, path)
        assert main(["reference", "--dataset", str(path), "--nu", "0.01"]) == 0
        out = capsys.readouterr().out
        float(out.split()[0])  # parses as a number

    def test_check_command(self):
        assert main(["check"]) == 0


class TestPlot:
    def _trace_file(self, tmp_path, subopts, risks=None):
        risks = risks if risks is not None else [0.5] * len(subopts)
        recs = [TraceRecord(float(i), 0.0, 1.0 + s, s, r)
                for i, (s, r) in enumerate(zip(subopts, risks))]
        p = tmp_path / "t.csv"
        p.write_text(Trace(recs).to_csv())
        return p

    def test_renders_line(self, tmp_path):
        p = self._trace_file(tmp_path, [1e-1, 1e-3, 1e-6])
        out = plot([p], tmp_path / "o.svg")
        root = ET.parse(out).getroot()
        ns = "{http://www.w3.org/2000/svg}"
        paths = root.iter(f"{ns}path")
        assert sum(1 for _ in paths) >= 1

    def test_nonpositive_values_clipped(self, tmp_path):
        p = self._trace_file(tmp_path, [1e-2, 0.0, -1e-15])
        out = plot([p], tmp_path / "o.svg")
        assert out.exists()

    def test_empty_trace_rejected(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text(Trace([]).to_csv())
        with pytest.raises(ValueError):
            plot([p], tmp_path / "o.svg")

    def test_statistical_accuracy_rule(self):
        # level = suboptimality at the first record where the test risk
        # improvement drops below 1e-4
        recs = [TraceRecord(0, 0, 1, 1e-1, 0.50),
                TraceRecord(1, 0, 1, 1e-3, 0.40),
                TraceRecord(2, 0, 1, 1e-5, 0.39995),
                TraceRecord(3, 0, 1, 1e-7, 0.3999)]
        assert statistical_accuracy_level(Trace(recs)) == pytest.approx(1e-5)
