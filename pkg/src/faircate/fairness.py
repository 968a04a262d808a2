"""Fairness-moment vectors mean[uf_j(Z) b(W)] for the supported criteria.

Each criterion defines a per-record weight uf whose inner products with the
fitted function's basis coordinates measure between-group disparity:

* independence: group-mean difference of the fitted value across S.
* conditional-parity: the same difference within a stratum of legitimate
  factors L = l.
* positive-balance: the difference restricted to records whose estimated
  treatment effect is positive; the indicator uses the out-of-fold outcome
  regressions and the denominators average per-fold means, so the estimate
  keeps its cross-fitting structure.
* counterfactual-smooth: a user-supplied smooth function of the per-record
  influence values (phi0, phi1) and the covariates.

All weights are self-normalized by empirical denominators, so the
independence weights average to zero by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .basis import BasisMatrix
from .dataset import ObservationalDataset
from .errors import (DegenerateGroupError, DegenerateStratumError,
                     EvaluationError, ParameterError)
from .moments import InfluenceValues
from .nuisance import NuisanceFit

KINDS = ("independence", "conditional-parity", "positive-balance",
         "counterfactual-smooth")

# factor(x_matrix) -> per-record stratum labels
FactorFn = Callable[[np.ndarray], np.ndarray]
# handle(phi0, phi1, w_matrix) -> per-record weights
SmoothFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class BinnedFactor:
    """Picklable stratifier: bin index of one covariate column under a fixed
    set of cut points (np.digitize convention)."""

    def __init__(self, column_index: int, cuts: tuple[float, ...]):
        self.column_index = int(column_index)
        self.cuts = tuple(float(c) for c in cuts)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.digitize(np.atleast_2d(x)[:, self.column_index], self.cuts)

    def __repr__(self):
        return f"BinnedFactor(column_index={self.column_index}, cuts={self.cuts})"


@dataclass(frozen=True)
class FairnessCriterion:
    """One fairness constraint: a criterion kind plus its tolerance delta."""

    kind: str
    delta: float = 0.0
    factor: FactorFn | None = None
    level: object | None = None
    smooth_fn: SmoothFn | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown fairness kind {self.kind!r}; choose from {KINDS}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if self.kind == "conditional-parity" and (self.factor is None or self.level is None):
            raise ParameterError("conditional-parity needs a factor function and a level")
        if self.kind == "counterfactual-smooth" and self.smooth_fn is None:
            raise ParameterError("counterfactual-smooth needs a smooth_fn")

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        if self.kind == "conditional-parity":
            return f"conditional-parity[{self.level}]"
        return self.kind

    def with_delta(self, delta: float) -> "FairnessCriterion":
        return replace(self, delta=float(delta))

    @staticmethod
    def independence(delta: float = 0.0) -> "FairnessCriterion":
        return FairnessCriterion(kind="independence", delta=delta)

    @staticmethod
    def conditional_parity(factor: FactorFn, level, delta: float = 0.0,
                           label: str | None = None) -> "FairnessCriterion":
        return FairnessCriterion(kind="conditional-parity", delta=delta,
                                 factor=factor, level=level, label=label)

    @staticmethod
    def positive_balance(delta: float = 0.0) -> "FairnessCriterion":
        return FairnessCriterion(kind="positive-balance", delta=delta)

    @staticmethod
    def counterfactual_smooth(fn: SmoothFn, delta: float = 0.0,
                              label: str | None = None) -> "FairnessCriterion":
        return FairnessCriterion(kind="counterfactual-smooth", delta=delta,
                                 smooth_fn=fn, label=label)


@dataclass(frozen=True)
class FairnessMoment:
    """Estimated moment vector a_j = mean(uf * b(W)) plus the per-record
    weights and the denominators that normalized them."""

    a: np.ndarray
    per_record_uf: np.ndarray
    criterion: FairnessCriterion
    diagnostics: Mapping[str, object]


def _moment(uf: np.ndarray, basis_values: np.ndarray) -> np.ndarray:
    return (uf[:, None] * basis_values).mean(axis=0)


def independence_weights(s: np.ndarray) -> np.ndarray:
    """(1-S)/mean(1-S) - S/mean(S); errors when one group is empty."""
    s = np.asarray(s)
    p1 = s.mean()
    if p1 == 0.0 or p1 == 1.0:
        raise DegenerateGroupError("both sensitive groups must be nonempty")
    return (1.0 - s) / (1.0 - p1) - s / p1


def uf_independence(data: ObservationalDataset, basis: BasisMatrix) -> FairnessMoment:
    """Statistical-parity moment: coordinatewise group-mean difference of the
    basis columns (S=0 minus S=1)."""
    uf = independence_weights(data.s)
    p1 = data.s.mean()
    return FairnessMoment(a=_moment(uf, basis.values), per_record_uf=uf,
                          criterion=FairnessCriterion.independence(),
                          diagnostics={"p_s1": float(p1)})


def conditional_parity_weights(s: np.ndarray, hits: np.ndarray, level) -> np.ndarray:
    s = np.asarray(s)
    hits = np.asarray(hits, dtype=float)
    d0 = ((1.0 - s) * hits).mean()
    d1 = (s * hits).mean()
    if d0 <= 0.0 or d1 <= 0.0:
        raise DegenerateStratumError(
            f"stratum L={level!r} has no mass in sensitive group "
            f"{'S=0' if d0 <= 0 else 'S=1'}")
    return (1.0 - s) * hits / d0 - s * hits / d1


def uf_conditional_parity(data: ObservationalDataset, basis: BasisMatrix,
                          criterion: FairnessCriterion) -> FairnessMoment:
    """Conditional statistical parity within the stratum factor(X) == level."""
    if criterion.kind != "conditional-parity":
        raise ParameterError(f"expected a conditional-parity criterion, got {criterion.kind}")
    labels = np.asarray(criterion.factor(data.x))
    hits = labels == criterion.level
    uf = conditional_parity_weights(data.s, hits, criterion.level)
    d0 = ((1 - data.s) * hits).mean()
    d1 = (data.s * hits).mean()
    return FairnessMoment(a=_moment(uf, basis.values), per_record_uf=uf,
                          criterion=criterion,
                          diagnostics={"d0": float(d0), "d1": float(d1),
                                       "hits": hits})


def positive_balance_weights(s: np.ndarray, indicator: np.ndarray,
                             fold: np.ndarray | None) -> tuple[np.ndarray, float, float]:
    """Weights for balance on the estimated-responder class.

    Denominators are fold-averaged means (the plain mean when fold is None),
    matching the cross-fitted display of the estimator.
    """
    s = np.asarray(s)
    ind = np.asarray(indicator, dtype=float)
    if fold is None:
        d0 = ((1.0 - s) * ind).mean()
        d1 = (s * ind).mean()
    else:
        labels = np.unique(fold)
        d0 = float(np.mean([((1.0 - s) * ind)[fold == b].mean() for b in labels]))
        d1 = float(np.mean([(s * ind)[fold == b].mean() for b in labels]))
    if d0 <= 0.0 or d1 <= 0.0:
        group = "S=0" if d0 <= 0 else "S=1"
        raise DegenerateGroupError(f"no estimated responders in group {group}")
    return (1.0 - s) * ind / d0 - s * ind / d1, d0, d1


def uf_positive_balance(data: ObservationalDataset, basis: BasisMatrix,
                        fit: NuisanceFit) -> FairnessMoment:
    """Balance-for-the-positive-class moment using the out-of-fold indicator
    1{mu1_hat - mu0_hat > 0} (strict: ties fall outside the positive class)."""
    indicator = (fit.mu1_hat - fit.mu0_hat) > 0
    uf, d0, d1 = positive_balance_weights(data.s, indicator, data.fold)
    return FairnessMoment(a=_moment(uf, basis.values), per_record_uf=uf,
                          criterion=FairnessCriterion.positive_balance(),
                          diagnostics={"d0": d0, "d1": d1, "indicator": indicator})


def uf_counterfactual_smooth(data: ObservationalDataset, basis: BasisMatrix,
                             iv: InfluenceValues,
                             criterion: FairnessCriterion) -> FairnessMoment:
    """Moment for a smooth counterfactual fairness function evaluated at the
    per-record influence values."""
    if criterion.kind != "counterfactual-smooth":
        raise ParameterError(f"expected a counterfactual-smooth criterion, got {criterion.kind}")
    w = np.column_stack([data.s.astype(float), data.x])
    uf = np.asarray(criterion.smooth_fn(iv.phi0, iv.phi1, w), dtype=float)
    if uf.shape != (data.n,):
        raise EvaluationError(f"smooth_fn must return one value per record, "
                              f"got shape {uf.shape}")
    bad = ~np.isfinite(uf)
    if bad.any():
        raise EvaluationError(f"smooth_fn produced non-finite values at record(s) "
                              f"{np.flatnonzero(bad)[:10].tolist()}")
    return FairnessMoment(a=_moment(uf, basis.values), per_record_uf=uf,
                          criterion=criterion, diagnostics={})


def fairness_moment(criterion: FairnessCriterion, data: ObservationalDataset,
                    basis: BasisMatrix, fit: NuisanceFit | None = None,
                    iv: InfluenceValues | None = None) -> FairnessMoment:
    """Dispatch a criterion to its estimator; keeps the criterion (and its
    delta) attached to the result."""
    if criterion.kind == "independence":
        fm = uf_independence(data, basis)
    elif criterion.kind == "conditional-parity":
        fm = uf_conditional_parity(data, basis, criterion)
    elif criterion.kind == "positive-balance":
        if fit is None:
            raise ParameterError("positive-balance needs a nuisance fit")
        fm = uf_positive_balance(data, basis, fit)
    else:
        if iv is None:
            raise ParameterError("counterfactual-smooth needs influence values")
        fm = uf_counterfactual_smooth(data, basis, iv, criterion)
    return FairnessMoment(a=fm.a, per_record_uf=fm.per_record_uf,
                          criterion=criterion, diagnostics=fm.diagnostics)


def policy_unfairness(policy: np.ndarray, uf: FairnessMoment | np.ndarray) -> float:
    """|mean(uf * g)|: the disparity a criterion assigns to a hard policy."""
    g = np.asarray(policy, dtype=float)
    weights = uf.per_record_uf if isinstance(uf, FairnessMoment) else np.asarray(uf)
    if g.shape != weights.shape:
        raise ParameterError("policy and fairness weights must have equal length")
    return float(abs((weights * g).mean()))
