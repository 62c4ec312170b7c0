import json
import os
from pathlib import Path

import numpy as np
import pytest

from wormsim.cli import (
    ExperimentSpec,
    SpecError,
    analyze,
    curves_from_rows,
    default_worker_count,
    emit,
    execute,
    fmt,
    graph_metrics_audit,
    load_graph_metrics,
    load_rows,
    load_spec,
    main,
)

MINIMAL_SPEC = """\
# smallest valid experiment
name = demo
topology = rgg
node_counts = 120
side_length = 1000
transmission_range = 80
lambda_grid = 0.05, 0.2
"""

SMALL_SPEC = """\
name = tiny
topology = rgg
node_counts = 150, 250
side_length = 1000
transmission_range = 90
lambda_grid = 0.02, 0.08, 0.3
patching_rate = 1
mac = both
runs_per_point = 24
seed_nodes_per_point = 3
master_seed = 11
graph_replicas = 1
"""


def write_spec(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadSpec:
    def test_minimal_spec_defaults(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, MINIMAL_SPEC))
        assert spec.name == "demo"
        assert spec.patching_rate == 1.0
        assert spec.mac == "both"
        assert spec.runs_per_point == 500
        assert spec.seed_nodes_per_point == 5
        assert spec.master_seed == 0
        assert spec.graph_replicas == 1
        assert spec.mac_arms == (False, True)

    def test_unknown_key_rejected_with_line(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC + "bogus_key = 3\n")
        with pytest.raises(SpecError, match=r":8: unknown key 'bogus_key'"):
            load_spec(p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC + "name = again\n")
        with pytest.raises(SpecError, match="duplicate key"):
            load_spec(p)

    def test_lambda_out_of_range(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC.replace("0.05, 0.2", "0.05, 1.5"))
        with pytest.raises(SpecError, match=r"infection_rate out of \[0, 1\]"):
            load_spec(p)

    def test_unsorted_lambda_grid(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC.replace("0.05, 0.2", "0.2, 0.05"))
        with pytest.raises(SpecError, match="sorted"):
            load_spec(p)

    def test_er_requires_mac_off(self, tmp_path):
        text = MINIMAL_SPEC.replace("topology = rgg", "topology = er-matched") + "mac = both\n"
        with pytest.raises(SpecError, match="mac"):
            load_spec(write_spec(tmp_path, text))

    def test_pathloss_alternative(self, tmp_path):
        text = MINIMAL_SPEC.replace("transmission_range = 80\n", "")
        text += (
            "transmit_power = 16\npathloss_constant = 1\npathloss_exponent = 2\n"
            "attenuation_threshold = 1\nnoise_level = 0.000256\n"
        )
        spec = load_spec(write_spec(tmp_path, text))
        # (16 / 0.000256) ** 0.5 = 250
        assert spec.transmission_range == pytest.approx(250.0)

    def test_pathloss_and_range_conflict(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC + "transmit_power = 1\n")
        with pytest.raises(SpecError, match="not both"):
            load_spec(p)

    def test_range_must_fit_torus(self, tmp_path):
        p = write_spec(tmp_path, MINIMAL_SPEC.replace("transmission_range = 80", "transmission_range = 600"))
        with pytest.raises(SpecError, match="side_length / 2"):
            load_spec(p)

    def test_garbled_line(self, tmp_path):
        p = write_spec(tmp_path, "name demo\n" + MINIMAL_SPEC)
        with pytest.raises(SpecError, match=":1:"):
            load_spec(p)

    def test_mac_arm_expansion(self, tmp_path):
        for mac, arms in (("on", (True,)), ("off", (False,)), ("both", (False, True))):
            spec = load_spec(write_spec(tmp_path, MINIMAL_SPEC + f"mac = {mac}\n", f"{mac}.cfg"))
            assert spec.mac_arms == arms


class TestFmt:
    def test_six_significant_digits_fixed(self):
        assert fmt(0.0123456789) == "0.0123457"
        assert fmt(0.5) == "0.5"
        assert fmt(1234.5678) == "1234.57"
        assert fmt(0.00001234567) == "0.0000123457"
        assert fmt(0.0) == "0"
        assert fmt(1.0) == "1"

    def test_no_scientific_notation(self):
        assert "e" not in fmt(1.2345e-7)


class TestExecute:
    def run_small(self, tmp_path, out_name="out", workers=1):
        spec = load_spec(write_spec(tmp_path, SMALL_SPEC))
        out = tmp_path / out_name
        rows = execute(spec, out, worker_count=workers, log=lambda m: None)
        return spec, out, rows

    def test_outputs_and_schemas(self, tmp_path):
        spec, out, rows = self.run_small(tmp_path)
        # 2 densities x 2 mac arms x 3 lambdas
        assert len(rows) == 12
        assert (out / "manifest.json").exists()
        prevalence = (out / "prevalence.csv").read_text().splitlines()
        assert prevalence[0] == (
            "name,N,topology,mac,lambda,graph_replica,prevalence_mean,"
            "prevalence_conditional,susceptibility,std_error,runs"
        )
        assert len(prevalence) == 13
        ts = (out / "timeseries.csv").read_text().splitlines()
        assert ts[0] == "name,N,topology,mac,lambda,t,mean_i_frac,mean_r_frac"
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "name,N,topology,graph_replica,mean_degree,clustering,connected,giant_frac"
        assert len(metrics) == 3
        th = (out / "thresholds.csv").read_text().splitlines()
        assert th[0] == (
            "name,N,topology,mac,method,lambda_c,uncertainty,kappa_c,mean_degree,mean_field_lambda_c"
        )

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        _, out1, _ = self.run_small(tmp_path, "out1", workers=1)
        _, out2, _ = self.run_small(tmp_path, "out2", workers=2)
        for fname in ("prevalence.csv", "timeseries.csv", "metrics.csv", "thresholds.csv"):
            assert (out1 / fname).read_bytes() == (out2 / fname).read_bytes(), fname

    def test_rerun_is_bit_identical(self, tmp_path):
        spec, out, _ = self.run_small(tmp_path)
        before = {f: (out / f).read_bytes() for f in ("prevalence.csv", "timeseries.csv")}
        execute(spec, out, worker_count=1, log=lambda m: None)  # resume: no pending cells
        for f, data in before.items():
            assert (out / f).read_bytes() == data

    def test_resume_after_partial(self, tmp_path):
        spec, out, _ = self.run_small(tmp_path)
        reference = (out / "prevalence.csv").read_bytes()
        # drop two cells and the emitted CSVs, then resume
        cells = sorted((out / "cells").glob("*.json"))
        cells[0].unlink()
        cells[-1].unlink()
        (out / "prevalence.csv").unlink()
        recomputed = []
        execute(spec, out, worker_count=1, log=recomputed.append)
        assert (out / "prevalence.csv").read_bytes() == reference
        assert any("cell" in line for line in recomputed)

    def test_refuses_foreign_dir_without_force(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, SMALL_SPEC))
        out = tmp_path / "occupied"
        out.mkdir()
        (out / "something.txt").write_text("existing data")
        with pytest.raises(FileExistsError):
            execute(spec, out, worker_count=1, log=lambda m: None)
        execute(spec, out, worker_count=1, force=True, log=lambda m: None)
        assert not (out / "something.txt").exists()

    def test_refuses_different_experiment(self, tmp_path):
        spec, out, _ = self.run_small(tmp_path)
        other = load_spec(write_spec(tmp_path, SMALL_SPEC.replace("master_seed = 11", "master_seed = 12"), "other.cfg"))
        with pytest.raises(FileExistsError):
            execute(other, out, worker_count=1, log=lambda m: None)

    def test_disconnected_graph_warns_but_runs(self, tmp_path):
        sparse = SMALL_SPEC.replace("node_counts = 150, 250", "node_counts = 60").replace(
            "transmission_range = 90", "transmission_range = 40"
        )
        spec = load_spec(write_spec(tmp_path, sparse, "sparse.cfg"))
        messages = []
        rows = execute(spec, tmp_path / "sparse_out", worker_count=1, log=messages.append)
        assert any("disconnected" in m for m in messages)
        assert len(rows) == 6

    def test_provenance_in_rows(self, tmp_path):
        spec, out, rows = self.run_small(tmp_path)
        assert all(r.master_seed == 11 for r in rows)
        assert all(r.code_version for r in rows)
        keys = {r.sort_key() for r in rows}
        assert len(keys) == len(rows)


class TestAnalyze:
    def test_analyze_reemits_and_summarizes(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, SMALL_SPEC))
        out = tmp_path / "out"
        execute(spec, out, worker_count=1, log=lambda m: None)
        summary = analyze(out, log=lambda m: None)
        assert (out / "collapse.json").exists()
        assert isinstance(summary["thresholds"], dict)

    def test_analyze_missing_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            analyze(tmp_path / "nope", log=lambda m: None)


class TestGraphMetricsAudit:
    def test_audit_writes_csvs(self, tmp_path):
        spec = load_spec(write_spec(tmp_path, MINIMAL_SPEC))
        entries = graph_metrics_audit(spec, tmp_path / "audit", log=lambda m: None)
        assert len(entries) == 1
        assert (tmp_path / "audit" / "metrics.csv").exists()
        hist = (tmp_path / "audit" / "degree_histogram.csv").read_text().splitlines()
        assert hist[0] == "name,N,topology,graph_replica,degree,count"
        total = sum(int(line.rsplit(",", 1)[1]) for line in hist[1:])
        assert total == 120


class TestMain:
    def test_run_and_analyze_exit_codes(self, tmp_path, capsys):
        spec_path = write_spec(tmp_path, SMALL_SPEC)
        out = tmp_path / "cli_out"
        assert main(["run", str(spec_path), "--out", str(out), "--workers", "1"]) == 0
        assert main(["analyze", str(out)]) == 0
        captured = capsys.readouterr()
        assert "lambda_c" in captured.out

    def test_validation_error_exit_code(self, tmp_path):
        bad = write_spec(tmp_path, MINIMAL_SPEC.replace("0.05, 0.2", "0.05, 2.0"), "bad.cfg")
        assert main(["run", str(bad), "--out", str(tmp_path / "x")]) == 1

    def test_missing_dir_exit_code(self, tmp_path):
        assert main(["analyze", str(tmp_path / "missing")]) == 2

    def test_conflicting_out_dir_exit_code(self, tmp_path):
        spec_path = write_spec(tmp_path, SMALL_SPEC)
        out = tmp_path / "dirty"
        out.mkdir()
        (out / "junk").write_text("x")
        assert main(["run", str(spec_path), "--out", str(out)]) == 1

    def test_graph_metrics_command(self, tmp_path, capsys):
        spec_path = write_spec(tmp_path, MINIMAL_SPEC)
        assert main(["graph-metrics", str(spec_path)]) == 0
        assert "mean_degree" in capsys.readouterr().out

    def test_workers_env_override(self, monkeypatch):
        monkeypatch.setenv("WORMSIM_WORKERS", "3")
        assert default_worker_count() == 3
        monkeypatch.setenv("WORMSIM_WORKERS", "zero")
        with pytest.raises(SpecError):
            default_worker_count()
        monkeypatch.delenv("WORMSIM_WORKERS")
        assert default_worker_count() >= 1


class TestCurvesFromRows:
    def test_replica_averaging(self, tmp_path):
        text = SMALL_SPEC.replace("graph_replicas = 1", "graph_replicas = 2").replace(
            "node_counts = 150, 250", "node_counts = 150"
        )
        spec = load_spec(write_spec(tmp_path, text))
        out = tmp_path / "reps"
        rows = execute(spec, out, worker_count=1, log=lambda m: None)
        assert len(rows) == 12  # 1 density x 2 arms x 3 lambdas x 2 replicas
        curves = curves_from_rows(rows, load_graph_metrics(out))
        curve = curves[("tiny", 150, "rgg", "off")]
        assert len(curve.points) == 3
        by_rep = [r for r in rows if r.mac == "off" and r.infection_rate == 0.3]
        expected = np.mean([r.prevalence_mean for r in by_rep])
        assert curve.points[-1].prevalence_mean == pytest.approx(expected)
