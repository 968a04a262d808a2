"""Built-in regression learners for the nuisance functions.

Every learner regresses a real target on a design matrix of
(sensitive feature, covariates). Deliberate misspecification is first-class:
``drop_variables`` removes named design columns before fitting, and the
``constant`` kind fits (or pins) a flat function. The ``oracle`` kind wraps a
closed-form truth for synthetic experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from sklearn.ensemble import GradientBoostingRegressor
from sklearn.neighbors import KNeighborsRegressor

from .basis import monomial_exponents, _evaluate_monomials
from .errors import FitError, ParameterError

KINDS = ("polynomial-ridge", "gradient-boosted-stumps", "k-nearest-neighbors",
         "constant", "oracle")

# oracle_fn(s, x, arm) -> predictions; arm is None for propensity targets
OracleFn = Callable[[np.ndarray, np.ndarray, int | None], np.ndarray]


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative choice of learner and hyperparameters.

    Only the fields relevant to ``kind`` are read. ``drop_variables`` names
    design columns ("s" or covariate names) to hide from the learner.
    """

    kind: str = "polynomial-ridge"
    degree: int = 3
    penalty: float = 1e-3
    n_trees: int = 200
    learning_rate: float = 0.1
    n_neighbors: int = 10
    value: float | None = None
    oracle_fn: OracleFn | None = None
    drop_variables: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown learner kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "polynomial-ridge":
            if self.degree < 1:
                raise ParameterError("ridge degree must be >= 1")
            if self.penalty < 0:
                raise ParameterError("ridge penalty must be >= 0")
        if self.kind == "gradient-boosted-stumps":
            if self.n_trees < 1 or self.learning_rate <= 0:
                raise ParameterError("boosting needs n_trees >= 1 and learning_rate > 0")
        if self.kind == "k-nearest-neighbors" and self.n_neighbors < 1:
            raise ParameterError("n_neighbors must be >= 1")
        if self.kind == "oracle" and self.oracle_fn is None:
            raise ParameterError("oracle learner needs an oracle_fn")

    @property
    def min_rows(self) -> int:
        if self.kind == "k-nearest-neighbors":
            return self.n_neighbors
        if self.kind == "gradient-boosted-stumps":
            return 2
        if self.kind == "oracle":
            return 0
        return 1


class _RidgeModel:
    """Least squares on a standardized monomial expansion of the design,
    with an L2 penalty on all non-intercept coefficients."""

    def __init__(self, degree: int, penalty: float):
        self.degree = degree
        self.penalty = penalty

    def fit(self, design: np.ndarray, target: np.ndarray) -> "_RidgeModel":
        self.shift = design.mean(axis=0)
        scale = design.std(axis=0)
        self.scale = np.where(scale > 0, scale, 1.0)
        z = (design - self.shift) / self.scale
        exps = monomial_exponents(design.shape[1], self.degree, include_intercept=True)
        # powers of two-valued columns are affinely redundant given the intercept
        two_valued = np.array([np.unique(col).size <= 2 for col in design.T])
        keep, seen = [], set()
        capped = exps.copy()
        capped[:, two_valued] = np.minimum(capped[:, two_valued], 1)
        for i, row in enumerate(map(tuple, capped)):
            if row not in seen:
                seen.add(row)
                keep.append(i)
        self.exponents = capped[keep]
        features = _evaluate_monomials(z, self.exponents)
        if self.penalty == 0.0:
            self.coef, *_ = np.linalg.lstsq(features, target, rcond=None)
        else:
            ridge = self.penalty * np.eye(features.shape[1])
            ridge[0, 0] = 0.0
            self.coef = np.linalg.solve(features.T @ features + ridge,
                                        features.T @ target)
        return self

    def predict(self, design: np.ndarray) -> np.ndarray:
        z = (design - self.shift) / self.scale
        return _evaluate_monomials(z, self.exponents) @ self.coef


class _ConstantModel:
    def __init__(self, value: float | None):
        self.pinned = value

    def fit(self, design: np.ndarray, target: np.ndarray) -> "_ConstantModel":
        self.value = self.pinned if self.pinned is not None else float(target.mean())
        return self

    def predict(self, design: np.ndarray) -> np.ndarray:
        return np.full(design.shape[0], self.value)


class _OracleModel:
    """Evaluates a closed-form truth; ignores the training data entirely."""

    def __init__(self, fn: OracleFn, arm: int | None, n_design_cols: int):
        self.fn = fn
        self.arm = arm
        self.n_design_cols = n_design_cols

    def fit(self, design: np.ndarray, target: np.ndarray) -> "_OracleModel":
        return self

    def predict(self, design: np.ndarray) -> np.ndarray:
        s = design[:, 0]
        x = design[:, 1:]
        return np.asarray(self.fn(s, x, self.arm), dtype=float)


class _DroppedColumnsModel:
    def __init__(self, inner, keep: np.ndarray):
        self.inner = inner
        self.keep = keep

    def fit(self, design, target):
        self.inner.fit(design[:, self.keep], target)
        return self

    def predict(self, design):
        return self.inner.predict(design[:, self.keep])


def _bare_model(spec: LearnerSpec, arm: int | None, n_design_cols: int):
    if spec.kind == "polynomial-ridge":
        return _RidgeModel(spec.degree, spec.penalty)
    if spec.kind == "gradient-boosted-stumps":
        return GradientBoostingRegressor(
            n_estimators=spec.n_trees, learning_rate=spec.learning_rate,
            max_depth=1, random_state=0)
    if spec.kind == "k-nearest-neighbors":
        return KNeighborsRegressor(n_neighbors=spec.n_neighbors)
    if spec.kind == "constant":
        return _ConstantModel(spec.value)
    return _OracleModel(spec.oracle_fn, arm, n_design_cols)


def fit_learner(spec: LearnerSpec, design: np.ndarray, target: np.ndarray,
                design_columns: tuple[str, ...], arm: int | None = None,
                context: str = "learner"):
    """Fit one learner on a design matrix whose columns are design_columns.

    ``arm`` tags oracle outcome models with the treatment arm they stand for.
    Raises FitError when the slice is smaller than the learner minimum.
    """
    if design.shape[0] < spec.min_rows:
        raise FitError(f"{context}: {design.shape[0]} rows < minimum "
                       f"{spec.min_rows} for {spec.kind}")
    unknown = [v for v in spec.drop_variables if v not in design_columns]
    if unknown:
        raise ParameterError(f"drop_variables {unknown} not among design columns "
                             f"{design_columns}")
    model = _bare_model(spec, arm, len(design_columns))
    if spec.drop_variables and spec.kind != "oracle":
        keep = np.array([c not in spec.drop_variables for c in design_columns])
        if not keep.any():
            raise ParameterError("drop_variables removes every design column")
        model = _DroppedColumnsModel(model, keep)
    return model.fit(design, target)
