import csv
import json
import math
import os

import numpy as np
import pytest
import yaml

from missfair import harness
from missfair.data_model import ConfigurationError

SMALL_POPULATION = {
    "n_majority": 3000, "n_marginalised": 600,
    "prevalence_majority": 0.66, "prevalence_marginalised": 0.66,
    "negative_cluster": {"mean": [0.0, 0.0], "variance": 0.0625},
    "positive_majority_cluster": {"mean": [0.0, 1.0], "variance": 0.0625},
    "positive_marginalised_cluster": {"mean": [1.0, 0.0], "variance": 0.0625},
    "correlate_x2_with_x1": False,
}


def _small_config(**kwargs):
    config = harness.load_config()
    config["population"] = dict(SMALL_POPULATION)
    config["repetitions"] = 2
    config["scenarios"] = ["S1", "S3"]
    config["imputers"] = [{"strategy": "population_mean"}, {"strategy": "group_mean"}]
    config["capacities"] = [0.25]
    config.update(kwargs)
    return config


def test_load_config_defaults_file_and_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"repetitions": 7, "split": {"train": 0.7, "test": 0.3}}))
    config = harness.load_config(str(path), {"seed": 42})
    assert config["repetitions"] == 7
    assert config["seed"] == 42
    assert config["split"]["train"] == 0.7
    assert config["split"]["tune"] == 0.0          # merged, not replaced
    assert config["population"]["n_majority"] == 100000


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"repetition": 7}))
    with pytest.raises(ConfigurationError):
        harness.load_config(str(path))


def test_simulation_report_structure_and_sign_audit(tmp_path):
    report = harness.run_simulation(_small_config())
    rows = list(report.rows)
    cells = {(r["scenario"], r["imputer"]) for r in rows}
    assert cells == {(s, i) for s in ("S1", "S3")
                     for i in ("PopulationMean", "GroupMean")}
    metrics_seen = {r["metric"] for r in rows}
    assert {"reconstruction", "auc", "fnr@0.25", "prioritisation@0.25"} <= metrics_seen
    assert harness.audit_sign_convention(rows) == []
    path = report.write(str(tmp_path))
    assert os.path.exists(path)
    assert os.path.exists(os.path.join(str(tmp_path), "manifest.json"))
    with open(os.path.join(str(tmp_path), "manifest.json")) as handle:
        manifest = json.load(handle)
    assert manifest["mode"] == "simulate"
    assert manifest["config"]["repetitions"] == 2


def test_simulation_deterministic_across_thread_counts(tmp_path):
    a = harness.run_simulation(_small_config(threads=1))
    b = harness.run_simulation(_small_config(threads=3))
    pa = a.write(str(tmp_path / "a"))
    pb = b.write(str(tmp_path / "b"))
    assert open(pa, "rb").read() == open(pb, "rb").read()


def test_simulation_contains_cell_errors(monkeypatch):
    calls = []
    original = harness._cell_metrics

    def flaky(cohort, mask, train, test, imputer_spec, logistic_spec, target, capacities):
        calls.append(imputer_spec.label())
        if imputer_spec.label() == "GroupMean":
            raise RuntimeError("boom")
        return original(cohort, mask, train, test, imputer_spec,
                        logistic_spec, target, capacities)

    monkeypatch.setattr(harness, "_cell_metrics", flaky)
    report = harness.run_simulation(_small_config())
    rows = list(report.rows)
    failed = [r for r in rows if r["imputer"] == "GroupMean"]
    assert failed and all("RuntimeError: boom" in r["error"] for r in failed)
    ok = [r for r in rows if r["imputer"] == "PopulationMean" and r["metric"] == "auc"]
    assert ok and all(r["error"] == "" for r in ok)


def test_repetition_seeds_differ_but_runs_reproduce():
    config = _small_config()
    a, _ = harness._simulate_repetition(config, 0)
    b, _ = harness._simulate_repetition(config, 0)
    c, _ = harness._simulate_repetition(config, 1)
    key = ("S1", "PopulationMean")

    def _equal(x, y):
        return x.keys() == y.keys() and all(
            (math.isnan(x[k]) and math.isnan(y[k])) or x[k] == y[k] for k in x)

    assert _equal(a[key], b[key])
    assert not _equal(a[key], c[key])


def test_read_csv_cohort_missing_cells(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x1,x2,group,outcome\n1.0,2.0,0,1\n3.0,,1,0\n,5.0,1,1\n")
    cohort, mask, names = harness.read_csv_cohort(str(path), "group", "outcome")
    assert names == ["x1", "x2"]
    assert cohort.n == 3
    assert not mask.observed[1, 1] and not mask.observed[2, 0]
    assert mask.observed[0].all()
    assert cohort.group.tolist() == [0, 1, 1]
    assert cohort.outcome.tolist() == [1, 0, 1]


def test_read_csv_cohort_requires_columns(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        harness.read_csv_cohort(str(path), "group", "outcome")


def test_make_standin_and_csv_audit(tmp_path):
    standin = harness.make_standin(str(tmp_path / "standin.csv"), seed=0,
                                   n_majority=3000, n_marginalised=600, n_noise=2)
    with open(standin) as handle:
        header = handle.readline().strip().split(",")
    assert header[-2:] == ["group", "outcome"]

    config = harness.load_config()
    config["csv"] = {"path": standin}
    config["imputers"] = [{"strategy": "population_mean"}, {"strategy": "group_mean"}]
    config["capacities"] = [0.25]
    config["bootstrap_resamples"] = 25
    report = harness.run_csv_audit(config)
    rows = [r for r in report.rows if r["metric"]]
    assert {r["imputer"] for r in rows} == {"PopulationMean", "GroupMean"}
    aucs = [r for r in rows if r["metric"] == "auc" and r["group"] == "overall"]
    assert all(0.5 < r["mean"] <= 1.0 for r in aucs)
    assert all(r["lower"] <= r["mean"] <= r["upper"] for r in aucs)


def test_region_scan_report(tmp_path):
    config = harness.load_config()
    config["region"]["steps"] = 21
    report = harness.run_region_scan(config)
    assert len(report.rows) == 441
    diffs = [r["diff"] for r in report.rows if r["feasible"] and not math.isnan(r["diff"])]
    assert any(d > 0 for d in diffs) and any(d < 0 for d in diffs)
    path = report.write(str(tmp_path))
    with open(path) as handle:
        parsed = list(csv.DictReader(handle))
    assert len(parsed) == 441


def test_theorem_validation_runs_small():
    lines, ok = harness.run_theorem_validation(n_cases=2, n=150000, seed=0, tolerance=0.1)
    assert ok
    assert len(lines) == 5
