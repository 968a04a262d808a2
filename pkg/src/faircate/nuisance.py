"""Cross-fitted nuisance estimation.

For each fold b, the outcome regressions are trained per treatment arm on
records outside b, and the propensity is a regression of the binary treatment
on (s, x) trained on the same out-of-fold records, clipped away from 0 and 1.
Predictions stored for fold-b records come only from those out-of-fold
models, so downstream moment estimates keep the cross-fitting structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ObservationalDataset
from .errors import FitError, ParameterError, PositivityError
from .learners import LearnerSpec, fit_learner


@dataclass(frozen=True)
class FoldModels:
    """Models trained with one fold held out."""

    excluded_fold: int
    mu0: object
    mu1: object
    pi1: object


@dataclass(frozen=True)
class NuisanceFit:
    """Out-of-fold nuisance predictions for every record plus the per-fold
    models that produced them. Propensity predictions are clipped to
    [epsilon, 1 - epsilon] exactly."""

    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    pi1_hat: np.ndarray
    epsilon: float
    per_fold_models: tuple[FoldModels, ...]
    design_columns: tuple[str, ...]

    def model_for(self, excluded_fold: int) -> FoldModels:
        for fm in self.per_fold_models:
            if fm.excluded_fold == excluded_fold:
                return fm
        raise ParameterError(f"no model excludes fold {excluded_fold}")


def design_matrix(data: ObservationalDataset) -> np.ndarray:
    return np.column_stack([data.s.astype(float), data.x])


def fit_cross_fitted(data: ObservationalDataset,
                     outcome_learner: LearnerSpec,
                     propensity_learner: LearnerSpec,
                     epsilon: float = 0.025) -> NuisanceFit:
    """Fit mu0, mu1 and pi1 with K-fold cross-fitting.

    Every record's stored prediction comes from models that never saw its
    fold. A training slice without treated (or control) units raises
    PositivityError naming the fold and arm.
    """
    if data.fold is None:
        raise ParameterError("assign folds before fitting nuisances")
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must be in (0, 0.5), got {epsilon}")
    design = design_matrix(data)
    columns = ("s", *data.covariate_names)
    n = data.n
    mu0_hat = np.zeros(n)
    mu1_hat = np.zeros(n)
    pi1_hat = np.zeros(n)
    fold_models = []
    for b in range(1, data.n_folds + 1):
        train = data.fold != b
        models = {}
        for arm in (0, 1):
            rows = train & (data.a == arm)
            if not rows.any():
                raise PositivityError(
                    f"fold {b}: no units with treatment {arm} in the training split")
            try:
                models[arm] = fit_learner(outcome_learner, design[rows], data.y[rows],
                                          columns, arm=arm,
                                          context=f"outcome arm {arm}, fold {b}")
            except FitError as err:
                raise FitError(str(err)) from None
        pi_model = fit_learner(propensity_learner, design[train],
                               data.a[train].astype(float), columns, arm=None,
                               context=f"propensity, fold {b}")
        fm = FoldModels(excluded_fold=b, mu0=models[0], mu1=models[1], pi1=pi_model)
        fold_models.append(fm)
        held = data.fold == b
        mu0_hat[held] = fm.mu0.predict(design[held])
        mu1_hat[held] = fm.mu1.predict(design[held])
        pi1_hat[held] = np.clip(fm.pi1.predict(design[held]), epsilon, 1 - epsilon)
    return NuisanceFit(mu0_hat=mu0_hat, mu1_hat=mu1_hat, pi1_hat=pi1_hat,
                       epsilon=epsilon, per_fold_models=tuple(fold_models),
                       design_columns=columns)


def _as_design(fit: NuisanceFit, w: np.ndarray) -> tuple[np.ndarray, bool]:
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    design = np.atleast_2d(w)
    if design.shape[1] != len(fit.design_columns):
        raise ParameterError(f"expected {len(fit.design_columns)} design columns "
                             f"{fit.design_columns}, got {design.shape[1]}")
    return design, single


def predict_nuisance(fit: NuisanceFit, w: np.ndarray, arm: int,
                     fold_exclusion: int | None = None) -> np.ndarray | float:
    """Outcome-regression prediction mu_arm at covariate rows w = [s, x...].

    With ``fold_exclusion`` set, uses the single model trained without that
    fold; otherwise averages the K per-fold models.
    """
    if arm not in (0, 1):
        raise ParameterError(f"arm must be 0 or 1, got {arm}")
    design, single = _as_design(fit, w)
    attr = "mu1" if arm == 1 else "mu0"
    if fold_exclusion is not None:
        out = getattr(fit.model_for(fold_exclusion), attr).predict(design)
    else:
        out = np.mean([getattr(fm, attr).predict(design)
                       for fm in fit.per_fold_models], axis=0)
    return float(out[0]) if single else out


def predict_propensity(fit: NuisanceFit, w: np.ndarray,
                       fold_exclusion: int | None = None) -> np.ndarray | float:
    """Clipped treatment-propensity prediction pi1 at covariate rows w."""
    design, single = _as_design(fit, w)
    eps = fit.epsilon
    if fold_exclusion is not None:
        out = np.clip(fit.model_for(fold_exclusion).pi1.predict(design), eps, 1 - eps)
    else:
        out = np.mean([np.clip(fm.pi1.predict(design), eps, 1 - eps)
                       for fm in fit.per_fold_models], axis=0)
    return float(out[0]) if single else out


def predict_all(fit: NuisanceFit, data: ObservationalDataset
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Model-averaged (mu0, mu1, pi1) on a fresh sample."""
    design = design_matrix(data)
    mu0 = predict_nuisance(fit, design, arm=0)
    mu1 = predict_nuisance(fit, design, arm=1)
    pi1 = predict_propensity(fit, design)
    return mu0, mu1, pi1
