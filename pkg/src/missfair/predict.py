"""Ridge-penalised logistic regression trained per imputation draw.

One model is fitted on each completed matrix; prediction averages the per-draw
probabilities. Raw covariates are standardised to training moments; appended
missingness indicators are left on their 0/1 scale.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data_model import ConfigurationError
from .metrics import _auc_core


class ConvergenceError(RuntimeError):
    """Newton iterations failed to reach the gradient tolerance."""


@dataclass(frozen=True)
class LogisticSpec:
    penalty_grid: tuple = (0.1, 1.0, 10.0, 100.0)
    fixed_penalty: float = None
    max_iterations: int = 100
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.fixed_penalty is not None and self.fixed_penalty < 0:
            raise ConfigurationError("fixed_penalty must be non-negative")
        if any(p <= 0 for p in self.penalty_grid):
            raise ConfigurationError("penalty grid entries must be positive")


@dataclass(frozen=True)
class DrawModel:
    weights: np.ndarray         # per standardised feature
    intercept: float
    feature_means: np.ndarray
    feature_stds: np.ndarray    # 1.0 where the raw std was 0 or standardisation is off


@dataclass(frozen=True)
class FittedModel:
    draws: tuple                # one DrawModel per imputation draw
    penalty: float
    n_raw_features: int
    n_features: int

    @property
    def n_draws(self):
        return len(self.draws)


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _standardisation(X, n_raw):
    means = np.zeros(X.shape[1])
    stds = np.ones(X.shape[1])
    means[:n_raw] = X[:, :n_raw].mean(axis=0)
    raw_stds = X[:, :n_raw].std(axis=0)
    stds[:n_raw] = np.where(raw_stds > 0, raw_stds, 1.0)
    return means, stds


def _fit_draw(X, y, penalty, spec, n_raw):
    means, stds = _standardisation(X, n_raw)
    Z = (X - means) / stds
    n, p = Z.shape
    beta = np.zeros(p + 1)              # intercept first, unpenalised
    design = np.hstack([np.ones((n, 1)), Z])
    ridge = np.full(p + 1, penalty)
    ridge[0] = 0.0
    for _ in range(spec.max_iterations):
        eta = design @ beta
        mu = _sigmoid(eta)
        grad = design.T @ (mu - y) + ridge * beta
        if np.linalg.norm(grad, ord=np.inf) < spec.tolerance:
            break
        w = np.maximum(mu * (1.0 - mu), 1e-10)
        hess = design.T @ (design * w[:, None]) + np.diag(ridge)
        step = np.linalg.solve(hess, grad)
        # halve the step until the penalised loss stops increasing
        loss = _penalised_loss(design, y, beta, ridge)
        scale = 1.0
        for _ in range(30):
            candidate = beta - scale * step
            if _penalised_loss(design, y, candidate, ridge) <= loss + 1e-12:
                beta = candidate
                break
            scale *= 0.5
        else:
            raise ConvergenceError("line search failed to reduce the loss")
    else:
        raise ConvergenceError(
            f"no convergence in {spec.max_iterations} Newton iterations")
    return DrawModel(weights=beta[1:], intercept=float(beta[0]),
                     feature_means=means, feature_stds=stds)


def _penalised_loss(design, y, beta, ridge):
    eta = design @ beta
    # log(1 + exp(eta)) - y * eta, computed stably
    loss = np.sum(np.logaddexp(0.0, eta) - y * eta)
    return loss + 0.5 * np.sum(ridge * beta * beta)


def _score_draws(draws, result):
    total = None
    for i, dm in enumerate(draws):
        X = result.features(i if result.n_draws > 1 else 0)
        Z = (X - dm.feature_means) / dm.feature_stds
        p = _sigmoid(Z @ dm.weights + dm.intercept)
        total = p if total is None else total + p
    return total / len(draws)


def train(train_result, train_outcome, spec=None, tune_result=None, tune_outcome=None):
    """Fit one ridge logistic model per draw; choose the penalty on tuning AUC.

    Without tuning data the penalty is `fixed_penalty` (default 1.0). With it,
    each grid value is fitted on the training draws and scored by the AUC of the
    averaged tuning predictions; the best value wins, ties to the smaller penalty.
    """
    spec = spec or LogisticSpec()
    y = np.asarray(train_outcome, dtype=float)
    n_raw = train_result.completed[0].shape[1]
    n_features = train_result.features(0).shape[1]
    if y.shape[0] != train_result.completed[0].shape[0]:
        raise ConfigurationError("outcome length must match the training rows")

    def _fit_all(penalty):
        return tuple(_fit_draw(train_result.features(i), y, penalty, spec, n_raw)
                     for i in range(train_result.n_draws))

    if tune_result is None:
        penalty = spec.fixed_penalty if spec.fixed_penalty is not None else 1.0
        draws = _fit_all(penalty)
    else:
        tune_y = np.asarray(tune_outcome)
        best = None
        for penalty in sorted(spec.penalty_grid):
            draws = _fit_all(penalty)
            score = _auc_core(_score_draws(draws, tune_result), tune_y)
            if best is None or score > best[0] + 1e-12:
                best = (score, penalty, draws)
        _, penalty, draws = best
    return FittedModel(draws=draws, penalty=float(penalty),
                       n_raw_features=n_raw, n_features=n_features)


def predict(model, result):
    """Average per-draw probabilities for one ImputationResult.

    Draw counts must match, or the data may carry a single draw that is then
    scored by every per-draw model (broadcast).
    """
    if result.features(0).shape[1] != model.n_features:
        raise ConfigurationError("feature count differs from the fitted model")
    if result.n_draws not in (1, model.n_draws):
        raise ConfigurationError(
            f"data has {result.n_draws} draws but the model has {model.n_draws}")
    return _score_draws(model.draws, result)
