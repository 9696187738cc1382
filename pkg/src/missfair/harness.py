"""Config-driven experiment runner producing deterministic CSV reports.

Three entry points: `run_simulation` (synthetic cohorts, repeated end to end),
`run_csv_audit` (one external table, bootstrap CIs), and `run_region_scan`
(closed-form gap maps over a correlation grid). All of them write a long-format
`report.csv` plus a `manifest.json` capturing the resolved configuration.
"""

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import impute, metrics, predict, theory
from .data_model import Cohort, ConfigurationError, MaskedCohort, ObservationMask, \
    SplitSpec, split
from .missingness import ScenarioSpec, apply_scenario
from .synthgen import ClusterSpec, PopulationSpec, generate

DEFAULT_CONFIG = {
    "seed": 20240601,
    "repetitions": 100,
    "threads": 1,
    "output_dir": "results",
    "population": {
        "n_majority": 100000,
        "n_marginalised": 1000,
        "prevalence_majority": 0.66,
        "prevalence_marginalised": 0.66,
        "negative_cluster": {"mean": [0.0, 0.0], "variance": 0.0625},
        "positive_majority_cluster": {"mean": [0.0, 1.0], "variance": 0.0625},
        "positive_marginalised_cluster": {"mean": [1.0, 0.0], "variance": 0.0625},
        "correlate_x2_with_x1": False,
    },
    "scenarios": ["S1", "S2", "S3"],
    "imputers": [
        {"strategy": "population_mean"},
        {"strategy": "group_mean"},
        {"strategy": "mice"},
        {"strategy": "group_mice"},
        {"strategy": "group_mice", "append_indicators": True},
    ],
    "model": {"fixed_penalty": 1.0, "penalty_grid": [0.1, 1.0, 10.0, 100.0]},
    "split": {"train": 0.8, "tune": 0.0, "test": 0.2},
    "target_covariate": 1,
    "capacities": [0.1, 0.25, 0.5],
    "bootstrap_resamples": 100,
    "region": {
        "alpha_g": 0.7, "alpha_ng": 0.8, "r_g": 0.25,
        "mu_obs_g": 0.5, "mu_obs_ng": 0.0, "sigma": 0.5,
        "rho_min": -0.3, "rho_max": 0.3, "steps": 101,
    },
    "csv": None,
}


def _merge(base, override):
    out = dict(base)
    for key, value in (override or {}).items():
        if key not in base:
            raise ConfigurationError(f"unknown configuration key: {key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = {**base[key], **value}
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None):
    """Resolve a run configuration: defaults, then YAML file, then CLI overrides."""
    config = dict(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as handle:
            loaded = yaml.safe_load(handle) or {}
        if not isinstance(loaded, dict):
            raise ConfigurationError("configuration file must hold a mapping")
        config = _merge(config, loaded)
    config = _merge(config, {k: v for k, v in (overrides or {}).items() if v is not None})
    return config


def _population_spec(config, seed):
    p = config["population"]
    return PopulationSpec(
        n_majority=int(p["n_majority"]),
        n_marginalised=int(p["n_marginalised"]),
        prevalence_majority=float(p["prevalence_majority"]),
        prevalence_marginalised=float(p["prevalence_marginalised"]),
        negative_cluster=ClusterSpec(tuple(p["negative_cluster"]["mean"]),
                                     float(p["negative_cluster"]["variance"])),
        positive_majority_cluster=ClusterSpec(
            tuple(p["positive_majority_cluster"]["mean"]),
            float(p["positive_majority_cluster"]["variance"])),
        positive_marginalised_cluster=ClusterSpec(
            tuple(p["positive_marginalised_cluster"]["mean"]),
            float(p["positive_marginalised_cluster"]["variance"])),
        correlate_x2_with_x1=bool(p["correlate_x2_with_x1"]),
        seed=seed,
    )


def _scenario_spec(entry, target, seed):
    if isinstance(entry, str):
        entry = {"scenario": entry}
    return ScenarioSpec(
        scenario=entry["scenario"],
        target_covariate=int(entry.get("target_covariate", target)),
        trigger_covariate=int(entry.get("trigger_covariate", 0)),
        threshold=float(entry.get("threshold", 0.5)),
        mask_probability=float(entry.get("mask_probability", 0.5)),
        seed=seed,
    )


def _imputer_spec(entry, seed):
    return impute.ImputerSpec(
        strategy=entry["strategy"],
        append_indicators=bool(entry.get("append_indicators", False)),
        mice_iterations=int(entry.get("mice_iterations", 10)),
        mice_draws=int(entry.get("mice_draws", 10)),
        seed=seed,
    )


def _logistic_spec(config, fixed):
    m = config["model"]
    return predict.LogisticSpec(
        penalty_grid=tuple(float(p) for p in m.get("penalty_grid", (0.1, 1.0, 10.0, 100.0))),
        fixed_penalty=float(m["fixed_penalty"]) if fixed else None,
    )


def _derived_seed(*entropy):
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _cell_metrics(cohort, mask, train, test, imputer_spec, logistic_spec, target, capacities):
    """All metric values for one (scenario, imputer) cell: {(metric, group): value}."""
    fitted = impute.fit(train, imputer_spec)
    values = {}

    recon = metrics.reconstruction_error(
        cohort, mask, impute.transform(fitted, MaskedCohort(cohort, mask)), target)
    _store(values, "reconstruction", recon)

    model = predict.train(impute.transform(fitted, train), train.outcome, logistic_spec)
    scores = predict.predict(model, impute.transform(fitted, test))
    _store(values, "auc", metrics.auc(scores, test.outcome, test.group))
    for capacity in capacities:
        tm = metrics.threshold_metrics(scores, test.outcome, test.group, capacity)
        _store(values, f"fnr@{capacity:g}", tm.fnr)
        _store(values, f"prioritisation@{capacity:g}", tm.prioritisation_rate)
    return values


def _store(values, name, gm):
    values[(name, "overall")] = gm.overall
    values[(name, "majority")] = gm.majority
    values[(name, "marginalised")] = gm.marginalised
    values[(name, "gap")] = gm.gap


def _simulate_repetition(config, rep):
    """One end-to-end repetition; returns (records, errors) keyed by cell."""
    seed = int(config["seed"])
    cohort = generate(_population_spec(config, _derived_seed(seed, rep, 0)))
    split_spec = SplitSpec(float(config["split"]["train"]), float(config["split"]["tune"]),
                           float(config["split"]["test"]), _derived_seed(seed, rep, 1))
    target = int(config["target_covariate"])
    logistic_spec = _logistic_spec(config, fixed=True)
    records, errors = {}, {}
    for s_index, entry in enumerate(config["scenarios"]):
        scenario_spec = _scenario_spec(entry, target, _derived_seed(seed, rep, 2, s_index))
        mask = apply_scenario(cohort, scenario_spec)
        train, _, test = split(cohort, mask, split_spec)
        for i_index, imp_entry in enumerate(config["imputers"]):
            imputer_spec = _imputer_spec(imp_entry, _derived_seed(seed, rep, 3, i_index))
            cell = (scenario_spec.scenario, imputer_spec.label())
            try:
                records[cell] = _cell_metrics(cohort, mask, train, test, imputer_spec,
                                              logistic_spec, target, config["capacities"])
            except Exception as exc:   # contain the cell, keep the run going
                errors[cell] = f"{type(exc).__name__}: {exc}"
    return records, errors


@dataclass(frozen=True)
class Report:
    rows: tuple          # dict rows in a stable order
    manifest: dict

    def write(self, output_dir):
        os.makedirs(output_dir, exist_ok=True)
        report_path = os.path.join(output_dir, "report.csv")
        if self.rows:
            with open(report_path, "w", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=list(self.rows[0].keys()))
                writer.writeheader()
                for row in self.rows:
                    writer.writerow({k: _format(v) for k, v in row.items()})
        with open(os.path.join(output_dir, "manifest.json"), "w") as handle:
            json.dump(self.manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
        return report_path


def _format(value):
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".10g")
    return value


def _aggregate(per_rep, cell_errors, repetitions):
    """Long-format rows from per-repetition cell records; nan values are skipped."""
    collected = {}
    for records in per_rep:
        for cell, values in records.items():
            for (metric, group), value in values.items():
                collected.setdefault((cell, metric, group), []).append(value)
    rows = []
    for (cell, metric, group), values in sorted(collected.items()):
        arr = np.asarray(values, dtype=float)
        ok = arr[~np.isnan(arr)]
        error = "; ".join(sorted(set(cell_errors.get(cell, ()))))
        rows.append({
            "scenario": cell[0], "imputer": cell[1], "metric": metric, "group": group,
            "mean": float(ok.mean()) if ok.size else math.nan,
            "std": float(ok.std(ddof=1)) if ok.size > 1 else (0.0 if ok.size else math.nan),
            "lower": float(np.quantile(ok, 0.025)) if ok.size else math.nan,
            "upper": float(np.quantile(ok, 0.975)) if ok.size else math.nan,
            "n_values": int(ok.size),
            "n_repetitions": repetitions,
            "error": error,
        })
    for cell, messages in sorted(cell_errors.items()):
        if not any(r["scenario"] == cell[0] and r["imputer"] == cell[1] for r in rows):
            rows.append({"scenario": cell[0], "imputer": cell[1], "metric": "", "group": "",
                         "mean": math.nan, "std": math.nan, "lower": math.nan,
                         "upper": math.nan, "n_values": 0, "n_repetitions": repetitions,
                         "error": "; ".join(sorted(set(messages)))})
    return rows


def audit_sign_convention(rows, tolerance=1e-9):
    """Check every gap row equals marginalised minus majority; returns problems."""
    table = {(r["scenario"], r["imputer"], r["metric"], r["group"]): r["mean"] for r in rows}
    problems = []
    for (scenario, imputer, metric, group), value in table.items():
        if group != "gap":
            continue
        marg = table.get((scenario, imputer, metric, "marginalised"))
        maj = table.get((scenario, imputer, metric, "majority"))
        if marg is None or maj is None or math.isnan(marg) or math.isnan(maj):
            continue
        if not math.isnan(value) and abs(value - (marg - maj)) > tolerance:
            problems.append((scenario, imputer, metric))
    return problems


def run_simulation(config):
    """Repeat generate/mask/split/impute/train/audit; aggregate across repetitions."""
    repetitions = int(config["repetitions"])
    threads = max(1, int(config["threads"]))
    if threads == 1:
        results = [_simulate_repetition(config, rep) for rep in range(repetitions)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda rep: _simulate_repetition(config, rep),
                                    range(repetitions)))
    cell_errors = {}
    for _, errors in results:
        for cell, message in errors.items():
            cell_errors.setdefault(cell, []).append(message)
    rows = _aggregate([records for records, _ in results], cell_errors, repetitions)
    problems = audit_sign_convention(rows)
    if problems:
        raise RuntimeError(f"gap sign-convention audit failed for cells: {problems}")
    manifest = {"mode": "simulate", "config": _manifest_config(config)}
    return Report(tuple(rows), manifest)


def _manifest_config(config):
    out = {k: v for k, v in config.items() if k != "csv" or v is not None}
    return json.loads(json.dumps(out))


def read_csv_cohort(path, group_column, outcome_column,
                    marginalised_value="1", positive_value="1"):
    """Load an external table: empty covariate cells become missing entries.

    All columns except the group and outcome columns are treated as numeric
    covariates. Returns (Cohort, ObservationMask, covariate_names); ground truth
    at missing positions is unknowable, so those cells carry 0 under the mask.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = list(reader)
    if group_column not in header or outcome_column not in header:
        raise ConfigurationError(
            f"columns '{group_column}' and '{outcome_column}' must exist in the CSV")
    g_idx, y_idx = header.index(group_column), header.index(outcome_column)
    cov_idx = [i for i in range(len(header)) if i not in (g_idx, y_idx)]
    names = [header[i] for i in cov_idx]
    n, d = len(rows), len(cov_idx)
    if n == 0 or d == 0:
        raise ConfigurationError("CSV needs at least one row and one covariate column")
    X = np.zeros((n, d))
    observed = np.ones((n, d), dtype=bool)
    group = np.zeros(n, dtype=np.int8)
    outcome = np.zeros(n, dtype=np.int8)
    for r, row in enumerate(rows):
        group[r] = 1 if row[g_idx].strip() == str(marginalised_value) else 0
        outcome[r] = 1 if row[y_idx].strip() == str(positive_value) else 0
        for c, i in enumerate(cov_idx):
            cell = row[i].strip()
            if cell == "":
                observed[r, c] = False
            else:
                X[r, c] = float(cell)
    return Cohort(X, group, outcome), ObservationMask(observed), names


def run_csv_audit(config):
    """Audit the five imputers on one external CSV with bootstrap intervals.

    The table is split 0.8/0.1/0.1; the ridge penalty is tuned on the middle
    partition; metrics are bootstrapped over test rows. No reconstruction error
    is reported because ground truth at missing cells is unknown.
    """
    spec = config.get("csv")
    if not spec or "path" not in spec:
        raise ConfigurationError("csv.path must be set for audit-csv")
    cohort, mask, names = read_csv_cohort(
        spec["path"], spec.get("group_column", "group"),
        spec.get("outcome_column", "outcome"),
        spec.get("marginalised_value", "1"), spec.get("positive_value", "1"))
    seed = int(config["seed"])
    fractions = spec.get("fractions", (0.8, 0.1, 0.1))
    train, tune, test = split(cohort, mask, SplitSpec(
        float(fractions[0]), float(fractions[1]), float(fractions[2]),
        _derived_seed(seed, 0, 1)))
    logistic_spec = _logistic_spec(config, fixed=tune is None)
    capacities = config["capacities"]
    resamples = int(config["bootstrap_resamples"])

    rows = []
    cell_errors = {}
    for i_index, imp_entry in enumerate(config["imputers"]):
        imputer_spec = _imputer_spec(imp_entry, _derived_seed(seed, 0, 3, i_index))
        cell = ("csv", imputer_spec.label())
        try:
            fitted = impute.fit(train, imputer_spec)
            model = predict.train(
                impute.transform(fitted, train), train.outcome, logistic_spec,
                tune_result=impute.transform(fitted, tune) if tune is not None else None,
                tune_outcome=tune.outcome if tune is not None else None)
            scores = predict.predict(model, impute.transform(fitted, test))

            def metric_fn(idx):
                out = {}
                s, y, g = scores[idx], test.outcome[idx], test.group[idx]
                _store_named(out, "auc", metrics.auc(s, y, g))
                for capacity in capacities:
                    tm = metrics.threshold_metrics(s, y, g, capacity)
                    _store_named(out, f"fnr@{capacity:g}", tm.fnr)
                    _store_named(out, f"prioritisation@{capacity:g}", tm.prioritisation_rate)
                return out

            summaries = metrics.bootstrap(metric_fn, test.n, n_resamples=resamples,
                                          seed=_derived_seed(seed, 0, 4, i_index))
            point = metric_fn(np.arange(test.n))
            for key in sorted(point):
                metric, group = key.rsplit("/", 1)
                boot = summaries[key]
                rows.append({
                    "scenario": "csv", "imputer": imputer_spec.label(),
                    "metric": metric, "group": group,
                    "mean": point[key], "std": boot.std,
                    "lower": boot.lower, "upper": boot.upper,
                    "n_values": boot.n_effective, "n_repetitions": resamples,
                    "error": "",
                })
        except Exception as exc:
            cell_errors[cell] = [f"{type(exc).__name__}: {exc}"]
            rows.append({"scenario": "csv", "imputer": imputer_spec.label(),
                         "metric": "", "group": "", "mean": math.nan, "std": math.nan,
                         "lower": math.nan, "upper": math.nan, "n_values": 0,
                         "n_repetitions": resamples,
                         "error": cell_errors[cell][0]})
    problems = audit_sign_convention([r for r in rows if r["metric"]])
    if problems:
        raise RuntimeError(f"gap sign-convention audit failed for cells: {problems}")
    manifest = {"mode": "audit-csv", "covariates": names,
                "config": _manifest_config(config)}
    return Report(tuple(rows), manifest)


def _store_named(out, name, gm):
    out[f"{name}/overall"] = gm.overall
    out[f"{name}/majority"] = gm.majority
    out[f"{name}/marginalised"] = gm.marginalised
    out[f"{name}/gap"] = gm.gap


def region_base_inputs(config):
    r = config["region"]
    sigma = float(r["sigma"])
    return theory.TheoremInputs(
        alpha_g=float(r["alpha_g"]), alpha_ng=float(r["alpha_ng"]),
        rho_g=0.0, rho_ng=0.0, r_g=float(r["r_g"]),
        sigma_g=sigma, sigma_ng=sigma,
        var_unobs_g=sigma * sigma, var_unobs_ng=sigma * sigma,
        mu_obs_g=float(r["mu_obs_g"]), mu_obs_ng=float(r["mu_obs_ng"]),
    )


def run_region_scan(config):
    """Closed-form gap map over the (rho_g, rho_ng) grid from the configuration."""
    r = config["region"]
    grid = np.linspace(float(r["rho_min"]), float(r["rho_max"]), int(r["steps"]))
    cells = theory.region_scan(region_base_inputs(config), grid, grid)
    rows = tuple({
        "rho_g": c.rho_g, "rho_ng": c.rho_ng,
        "delta_pop": c.delta_pop, "delta_group": c.delta_group, "diff": c.diff,
        "theorem3": int(c.theorem3), "dotted": int(c.dotted), "feasible": int(c.feasible),
    } for c in cells)
    manifest = {"mode": "region-scan", "config": _manifest_config(config)}
    return Report(rows, manifest)


def sample_feasible_inputs(rng):
    """One random TheoremInputs comfortably inside the latent-threshold bounds."""
    from .missingness import rho_feasible_bound
    alpha_g = float(rng.uniform(0.2, 0.85))
    alpha_ng = float(rng.uniform(0.2, 0.85))
    rho_g = float(rng.uniform(-0.8, 0.8) * rho_feasible_bound(alpha_g))
    rho_ng = float(rng.uniform(-0.8, 0.8) * rho_feasible_bound(alpha_ng))
    return theory.latent_threshold_inputs(
        alpha_g=alpha_g, rho_g=rho_g, alpha_ng=alpha_ng, rho_ng=rho_ng,
        r_g=float(rng.uniform(0.2, 0.5)),
        mu_g=float(rng.uniform(-1.0, 1.0)), mu_ng=float(rng.uniform(-1.0, 1.0)),
        sigma_g=float(rng.uniform(0.5, 2.0)), sigma_ng=float(rng.uniform(0.5, 2.0)))


def run_theorem_validation(n_cases=20, n=1_000_000, seed=0, tolerance=0.02):
    """Monte Carlo check of the closed-form errors on random feasible inputs.

    Returns (lines, ok): a printable table and whether every relative error on
    the marginalised group stayed within tolerance.
    """
    rng = np.random.default_rng(seed)
    lines = ["case  group  closed_group  empirical  closed_pop  empirical  rel_g  rel_pop"]
    ok = True
    for case in range(n_cases):
        inputs = sample_feasible_inputs(rng)
        report = theory.monte_carlo_validate(inputs, n=n, seed=int(rng.integers(2 ** 63)))
        for key in ("g", "ng"):
            v = report[key]
            within = v.rel_error_group <= tolerance and v.rel_error_pop <= tolerance
            ok = ok and within
            lines.append(
                f"{case:4d}  {key:5s}  {v.closed_group:12.6f}  {v.empirical_group:9.6f}  "
                f"{v.closed_pop:10.6f}  {v.empirical_pop:9.6f}  "
                f"{v.rel_error_group:5.3f}  {v.rel_error_pop:7.3f}"
                + ("" if within else "  <-- exceeds tolerance"))
    return lines, ok


def make_standin(path, seed=0, n_majority=20000, n_marginalised=2000, n_noise=8):
    """Write a schema-compatible stand-in CSV with group-correlated missingness.

    Mirrors the synthetic geometry (two signal covariates, three clusters) plus
    noise columns, then hides high values of the second covariate (a rule that
    reads what it hides), which strikes the two groups very differently because
    their positive clusters sit on different axes.
    """
    rng = np.random.default_rng(seed)
    spec = PopulationSpec(
        n_majority=n_majority, n_marginalised=n_marginalised,
        prevalence_majority=0.66, prevalence_marginalised=0.66,
        negative_cluster=ClusterSpec((0.0, 0.0), 0.0625),
        positive_majority_cluster=ClusterSpec((0.0, 1.0), 0.0625),
        positive_marginalised_cluster=ClusterSpec((1.0, 0.0), 0.0625),
        seed=int(rng.integers(2 ** 63)))
    cohort = generate(spec)
    mask = apply_scenario(cohort, ScenarioSpec(
        "S3", seed=int(rng.integers(2 ** 63))))
    noise = rng.standard_normal((cohort.n, n_noise))
    header = [f"x{j + 1}" for j in range(2 + n_noise)] + ["group", "outcome"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(cohort.n):
            row = []
            for j in range(2):
                row.append("" if not mask.observed[i, j]
                           else format(cohort.covariates[i, j], ".6g"))
            row.extend(format(v, ".6g") for v in noise[i])
            row.append(str(int(cohort.group[i])))
            row.append(str(int(cohort.outcome[i])))
            writer.writerow(row)
    return path
