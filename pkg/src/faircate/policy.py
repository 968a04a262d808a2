"""Policies derived from a fitted treatment-effect function, and their
welfare / regret / disparity evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .basis import BasisMatrix
from .dataset import ObservationalDataset
from .errors import OracleUnavailableError, ParameterError
from .moments import InfluenceValues


@dataclass(frozen=True)
class FittedCate:
    """A coefficient vector tied to the basis (and standardization) it was
    fitted with, evaluable on new data."""

    beta: np.ndarray
    basis: BasisMatrix

    def evaluate(self, variables: np.ndarray) -> np.ndarray:
        return self.basis.evaluate(variables) @ self.beta

    def evaluate_dataset(self, data: ObservationalDataset) -> np.ndarray:
        return self.basis.evaluate_dataset(data) @ self.beta


@dataclass(frozen=True)
class PolicyReport:
    """Evaluation summary for one policy on one sample. ``regret`` and
    ``misclassification`` are only available on synthetic data."""

    welfare: float
    unfairness: Mapping[str, float]
    treated_fraction_by_s: tuple[float, float]
    regret: float | None = None
    misclassification: float | None = None

    def as_dict(self) -> dict:
        out = {"welfare": self.welfare,
               "treated_fraction_s0": self.treated_fraction_by_s[0],
               "treated_fraction_s1": self.treated_fraction_by_s[1]}
        for name, value in self.unfairness.items():
            out[f"unfairness.{name}"] = value
        if self.regret is not None:
            out["regret"] = self.regret
        if self.misclassification is not None:
            out["misclassification"] = self.misclassification
        return out


def policy_threshold(cate: FittedCate, data: ObservationalDataset) -> np.ndarray:
    """Treat exactly when the fitted effect is strictly positive (ties are
    not treated)."""
    return cate.evaluate_dataset(data) > 0.0


def policy_interval(cate: FittedCate, data: ObservationalDataset,
                    interval: tuple[float, float]) -> np.ndarray:
    """Subgroup rule: treat when the fitted effect lies in (lo, hi]."""
    lo, hi = interval
    if not lo < hi:
        raise ParameterError(f"interval needs lo < hi, got ({lo}, {hi})")
    tau = cate.evaluate_dataset(data)
    return (tau > lo) & (tau <= hi)


def estimate_welfare(policy: np.ndarray, iv: InfluenceValues) -> float:
    """Influence-based welfare estimate mean[phi1 g + phi0 (1 - g)]."""
    g = np.asarray(policy, dtype=float)
    if g.shape != iv.phi1.shape:
        raise ParameterError("policy and influence values must have equal length")
    return float((iv.phi1 * g + iv.phi0 * (1.0 - g)).mean())


def oracle_regret(policy: np.ndarray, true_tau: np.ndarray | None
                  ) -> tuple[float, float]:
    """Welfare regret and misclassification of a policy against the
    oracle rule 1{tau > 0}. Requires ground-truth effects (synthetic data)."""
    if true_tau is None:
        raise OracleUnavailableError(
            "regret against the oracle policy needs ground-truth effects; "
            "not available on real data")
    tau = np.asarray(true_tau, dtype=float)
    g = np.asarray(policy, dtype=float)
    if g.shape != tau.shape:
        raise ParameterError("policy and true effects must have equal length")
    g_star = (tau > 0.0).astype(float)
    regret = float((tau * (g_star - g)).mean())
    misclassification = float((g != g_star).mean())
    return regret, misclassification


def treated_fraction_by_group(policy: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    g = np.asarray(policy, dtype=float)
    s = np.asarray(s)
    fractions = []
    for group in (0, 1):
        mask = s == group
        fractions.append(float(g[mask].mean()) if mask.any() else float("nan"))
    return fractions[0], fractions[1]


def recidivism_objective_flip(data: ObservationalDataset) -> ObservationalDataset:
    """Negate the outcome so smaller-is-better targets (e.g. rearrest risk)
    run through the larger-is-better machinery. Applying it twice is the
    identity; reports should display risk = -welfare."""
    flipped = ObservationalDataset(y=-data.y, a=data.a, s=data.s, x=data.x,
                                   covariate_names=data.covariate_names,
                                   fold=data.fold)
    return flipped
