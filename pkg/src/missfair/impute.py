"""Imputation strategies: population/group means and (group-)MICE chained equations.

Fit learns everything from a training partition; transform completes any
partition with the same schema without touching its ground truth.
"""

from dataclasses import dataclass

import numpy as np

from .data_model import ConfigurationError, ImputationResult
from .linalg_stat import ols_solve

STRATEGIES = ("population_mean", "group_mean", "mice", "group_mice")
MEAN_STRATEGIES = ("population_mean", "group_mean")


@dataclass(frozen=True)
class ImputerSpec:
    strategy: str
    append_indicators: bool = False
    mice_iterations: int = 10
    mice_draws: int = 10
    noise_draws: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}")
        if self.mice_iterations < 1 or self.mice_draws < 1:
            raise ConfigurationError("mice_iterations and mice_draws must be >= 1")

    @property
    def n_draws(self):
        return 1 if self.strategy in MEAN_STRATEGIES else self.mice_draws

    @property
    def uses_group(self):
        return self.strategy in ("group_mean", "group_mice")

    def label(self):
        name = {"population_mean": "PopulationMean", "group_mean": "GroupMean",
                "mice": "MICE", "group_mice": "GroupMICE"}[self.strategy]
        return name + ("+indicators" if self.append_indicators else "")


@dataclass(frozen=True)
class ChainRegression:
    column: int
    coefficients: np.ndarray    # intercept first, then remaining columns (and group)
    residual_std: float


@dataclass(frozen=True)
class FittedImputer:
    spec: ImputerSpec
    d: int
    population_means: np.ndarray
    group_means: dict               # group -> length-d array (nan where no data)
    medians: np.ndarray
    chains: tuple = ()              # per chain: tuple of ChainRegression
    incomplete_columns: tuple = ()
    fallback_columns: frozenset = frozenset()   # columns mean-imputed inside MICE
    group_fallback: frozenset = frozenset()     # (group, column) cells with no data
    warnings: tuple = ()


def _mice_design(X, column, group, use_group):
    others = np.delete(X, column, axis=1)
    parts = [np.ones((X.shape[0], 1)), others]
    if use_group:
        parts.append(group[:, None].astype(float))
    return np.hstack(parts)


def fit(train, spec):
    """Learn imputation parameters from the training partition only."""
    X = train.covariates_masked
    observed = train.mask.observed
    group = train.group
    n, d = X.shape

    fully_missing = np.flatnonzero(~observed.any(axis=0))
    if fully_missing.size:
        raise ConfigurationError(
            f"covariates with zero observed training values: {fully_missing.tolist()}")

    population_means = np.array([X[observed[:, j], j].mean() for j in range(d)])
    medians = np.array([np.median(X[observed[:, j], j]) for j in range(d)])

    group_means = {}
    group_fallback = set()
    warnings = []
    for g in (0, 1):
        means = np.empty(d)
        for j in range(d):
            rows = (group == g) & observed[:, j]
            if rows.any():
                means[j] = X[rows, j].mean()
            else:
                means[j] = population_means[j]
                group_fallback.add((g, j))
                warnings.append(f"group {g} has no observed values for covariate {j}; "
                                "falling back to the population mean")
        group_means[g] = means

    chains = ()
    incomplete = tuple(int(j) for j in range(d) if not observed[:, j].all())
    fallback_columns = set()
    if spec.strategy in ("mice", "group_mice"):
        chains = []
        for c in range(spec.mice_draws):
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, c)))
            work = X.copy()
            for j in incomplete:
                work[~observed[:, j], j] = medians[j]
            regressions = {}
            for _ in range(spec.mice_iterations):
                for j in incomplete:
                    rows = observed[:, j]
                    if rows.sum() < d + 2:
                        fallback_columns.add(j)
                        work[~rows, j] = population_means[j]
                        continue
                    design = _mice_design(work, j, group, spec.uses_group)
                    coef, resid_std = ols_solve(design[rows], work[rows, j])
                    pred = design[~rows] @ coef
                    if spec.noise_draws:
                        pred = pred + resid_std * rng.standard_normal(pred.size)
                    work[~rows, j] = pred
                    regressions[j] = ChainRegression(j, coef, resid_std)
            chains.append(tuple(regressions.values()))
        chains = tuple(chains)
        if fallback_columns:
            warnings.append(f"MICE fell back to mean imputation for columns "
                            f"{sorted(fallback_columns)}: too few observed rows")

    return FittedImputer(
        spec=spec, d=d,
        population_means=population_means,
        group_means=group_means,
        medians=medians,
        chains=chains,
        incomplete_columns=incomplete,
        fallback_columns=frozenset(fallback_columns),
        group_fallback=frozenset(group_fallback),
        warnings=tuple(warnings),
    )


def _fill_means(fitted, data):
    X = data.covariates_masked.copy()
    observed = data.mask.observed
    if fitted.spec.strategy == "population_mean":
        for j in range(fitted.d):
            X[~observed[:, j], j] = fitted.population_means[j]
    else:
        for g in (0, 1):
            rows = data.group == g
            for j in range(fitted.d):
                fill = rows & ~observed[:, j]
                X[fill, j] = fitted.group_means[g][j]
    return X


def _run_chain(fitted, data, regressions, rng):
    X = data.covariates_masked.copy()
    observed = data.mask.observed
    spec = fitted.spec
    by_column = {r.column: r for r in regressions}
    for j in fitted.incomplete_columns:
        missing = ~observed[:, j]
        if j in fitted.fallback_columns or j not in by_column:
            X[missing, j] = fitted.population_means[j]
        else:
            X[missing, j] = fitted.medians[j]
    for _ in range(spec.mice_iterations):
        for j in fitted.incomplete_columns:
            reg = by_column.get(j)
            if reg is None:
                continue
            missing = ~observed[:, j]
            if not missing.any():
                continue
            design = _mice_design(X, j, data.group, spec.uses_group)
            pred = design[missing] @ reg.coefficients
            if spec.noise_draws:
                pred = pred + reg.residual_std * rng.standard_normal(pred.size)
            X[missing, j] = pred
    return X


def transform(fitted, data):
    """Complete a partition; observed entries are copied verbatim."""
    if data.d != fitted.d:
        raise ConfigurationError(
            f"schema mismatch: fitted on {fitted.d} covariates, data has {data.d}")
    spec = fitted.spec
    if spec.strategy in MEAN_STRATEGIES:
        completed = (_fill_means(fitted, data),)
    else:
        completed = tuple(
            _run_chain(fitted, data, regressions,
                       np.random.default_rng(np.random.SeedSequence((spec.seed, 1000 + c))))
            for c, regressions in enumerate(fitted.chains))
    indicators = None
    if spec.append_indicators:
        indicators = (~data.mask.observed).astype(float)
    return ImputationResult(completed, indicators_appended=spec.append_indicators,
                            indicator_columns=indicators)
