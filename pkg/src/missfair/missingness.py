"""Masking processes: the three clinical scenarios plus a calibrated (alpha, rho) mechanism."""

import math
from dataclasses import dataclass

import numpy as np

from .data_model import ConfigurationError, ObservationMask
from .linalg_stat import normal_cdf_inv, normal_pdf

SCENARIOS = ("S1", "S2", "S3")


class InfeasibleCorrelationError(ValueError):
    """Target rho exceeds what a latent-threshold mechanism can realise."""


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    target_covariate: int = 1
    trigger_covariate: int = 0
    threshold: float = 0.5
    mask_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"scenario must be one of {SCENARIOS}")
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ConfigurationError("mask_probability must lie in [0, 1]")


@dataclass(frozen=True)
class CalibratedMechanismSpec:
    """Per-group targets for the latent-threshold mechanism; index 0 = majority."""

    alpha: tuple            # per-group observation rate, each in (0, 1)
    rho: tuple              # per-group Corr(O, X | G) target
    target_covariate: int = 1
    seed: int = 0

    def __post_init__(self):
        if len(self.alpha) != 2 or len(self.rho) != 2:
            raise ConfigurationError("alpha and rho need one entry per group")
        for a in self.alpha:
            if not 0.0 < a < 1.0:
                raise ConfigurationError("alpha must lie strictly in (0, 1)")
        for a, r in zip(self.alpha, self.rho):
            bound = rho_feasible_bound(a)
            if abs(r) > bound:
                raise InfeasibleCorrelationError(
                    f"rho={r} infeasible at alpha={a}: latent-threshold bound is "
                    f"|rho| <= {bound:.6f}")


def rho_feasible_bound(alpha):
    """Largest |Corr(O, X)| a Gaussian latent threshold at rate alpha can produce."""
    z = normal_cdf_inv(alpha)
    return normal_pdf(z) / math.sqrt(alpha * (1.0 - alpha))


def apply_scenario(cohort, spec):
    """Mask the target covariate per scenario; every other entry stays observed.

    S1 masks marginalised rows with the given probability; S2 masks rows whose
    trigger covariate exceeds the threshold; S3 masks rows whose own target value
    exceeds the threshold (MNAR by construction: the rule reads what it hides).
    """
    X = cohort.covariates
    if not (0 <= spec.target_covariate < cohort.d and 0 <= spec.trigger_covariate < cohort.d):
        raise ConfigurationError("covariate index out of range")
    rng = np.random.default_rng(spec.seed)
    if spec.scenario == "S1":
        eligible = cohort.group == 1
    elif spec.scenario == "S2":
        eligible = X[:, spec.trigger_covariate] > spec.threshold
    else:
        eligible = X[:, spec.target_covariate] > spec.threshold
    masked = eligible & (rng.random(cohort.n) < spec.mask_probability)
    observed = np.ones((cohort.n, cohort.d), dtype=bool)
    observed[masked, spec.target_covariate] = False
    return ObservationMask(observed)


def apply_calibrated(cohort, spec):
    """Realise target (alpha_g, rho_g) on the target covariate per group.

    Uses the bivariate-normal point-biserial identity: O = 1[Z <= Phi^-1(alpha)]
    with Corr(Z, X_std) = r = -rho * sqrt(alpha (1 - alpha)) / phi(Phi^-1(alpha)).
    Exact for Gaussian covariates; approximate otherwise.
    """
    j = spec.target_covariate
    x = cohort.covariates[:, j]
    rng = np.random.default_rng(spec.seed)
    observed = np.ones((cohort.n, cohort.d), dtype=bool)
    for g in (0, 1):
        rows = cohort.group == g
        alpha, rho = spec.alpha[g], spec.rho[g]
        z_alpha = normal_cdf_inv(alpha)
        r = -rho * math.sqrt(alpha * (1.0 - alpha)) / normal_pdf(z_alpha)
        if abs(r) > 1.0:
            raise InfeasibleCorrelationError(
                f"rho={rho} infeasible at alpha={alpha}: latent-threshold bound is "
                f"|rho| <= {rho_feasible_bound(alpha):.6f}")
        xg = x[rows]
        sd = xg.std()
        x_std = (xg - xg.mean()) / sd if sd > 0 else np.zeros_like(xg)
        z = r * x_std + math.sqrt(1.0 - r * r) * rng.standard_normal(xg.size)
        observed[rows, j] = z <= z_alpha
    return ObservationMask(observed)


@dataclass(frozen=True)
class GroupDescriptor:
    alpha: float
    rho: float                  # nan when undefined (fully observed / fully missing)
    mean_observed: float
    mean_true: float
    std_true: float
    var_unobserved: float       # nan when no unobserved value exists

    @property
    def rho_defined(self):
        return not math.isnan(self.rho)


@dataclass(frozen=True)
class MissingnessDescriptor:
    per_group: dict
    alpha_overall: float
    mean_observed_overall: float


def describe(cohort, mask, covariate):
    """Sample (alpha_g, rho_g, mu_g^O, sigma) descriptor per group plus pooled values.

    Reads ground truth at masked positions, so this is a simulation/test-side tool.
    """
    x = cohort.covariates[:, covariate]
    o = mask.observed[:, covariate]
    per_group = {}
    for g in (0, 1):
        rows = cohort.group == g
        xg, og = x[rows], o[rows]
        alpha = float(og.mean())
        if 0.0 < alpha < 1.0:
            rho = float(np.corrcoef(og.astype(float), xg)[0, 1])
            var_unobs = float(xg[~og].var())
        else:
            rho = math.nan
            var_unobs = float(xg[~og].var()) if (~og).any() else math.nan
        per_group[g] = GroupDescriptor(
            alpha=alpha,
            rho=rho,
            mean_observed=float(xg[og].mean()) if og.any() else math.nan,
            mean_true=float(xg.mean()),
            std_true=float(xg.std()),
            var_unobserved=var_unobs,
        )
    return MissingnessDescriptor(
        per_group=per_group,
        alpha_overall=float(o.mean()),
        mean_observed_overall=float(x[o].mean()) if o.any() else math.nan,
    )
