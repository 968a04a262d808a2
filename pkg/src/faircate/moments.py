"""Counterfactual moment vectors E[(Y^1 - Y^0) b(W)] by three estimators.

The influence-function (DR) route combines the outcome regressions with
inverse-propensity residual corrections:

    phi_a(Z) = 1{A=a} / pi_a(W) * (Y - mu_a(W)) + mu_a(W),

and averages (phi_1 - phi_0) b(W) over the sample. The plug-in (PI) route
averages (mu1 - mu0) b(W); the inverse-probability-weighted (IPW) route
averages (1{A=1} Y / pi1 - 1{A=0} Y / pi0) b(W). Per-record contributions are
retained so resampling schemes can reweight them without refitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisMatrix
from .dataset import ObservationalDataset
from .errors import ParameterError
from .nuisance import NuisanceFit

METHODS = ("DR", "PI", "IPW")


@dataclass(frozen=True)
class InfluenceValues:
    """Uncentered per-record influence values for both potential outcomes."""

    phi0: np.ndarray
    phi1: np.ndarray

    @property
    def contrast(self) -> np.ndarray:
        return self.phi1 - self.phi0


@dataclass(frozen=True)
class MomentEstimate:
    """A moment-vector estimate c plus the per-record contributions whose
    column means reproduce it exactly."""

    c: np.ndarray
    method: str
    per_record_contributions: np.ndarray

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {self.method!r}")


def influence_values_from_predictions(y: np.ndarray, a: np.ndarray,
                                      mu0: np.ndarray, mu1: np.ndarray,
                                      pi1: np.ndarray) -> InfluenceValues:
    """Influence values from explicit nuisance predictions (used both for the
    training sample and for held-out evaluation samples)."""
    treated = a == 1
    phi1 = np.where(treated, (y - mu1) / pi1, 0.0) + mu1
    phi0 = np.where(~treated, (y - mu0) / (1.0 - pi1), 0.0) + mu0
    return InfluenceValues(phi0=phi0, phi1=phi1)


def influence_values(data: ObservationalDataset, fit: NuisanceFit) -> InfluenceValues:
    """Influence values at the stored out-of-fold predictions."""
    return influence_values_from_predictions(data.y, data.a, fit.mu0_hat,
                                             fit.mu1_hat, fit.pi1_hat)


def _reduce(contrib: np.ndarray, method: str) -> MomentEstimate:
    return MomentEstimate(c=contrib.mean(axis=0), method=method,
                          per_record_contributions=contrib)


def dr_moments(iv: InfluenceValues, basis: BasisMatrix) -> MomentEstimate:
    """Doubly robust moment estimate mean[(phi1 - phi0) b(W)]."""
    contrast = iv.contrast
    if contrast.shape[0] != basis.values.shape[0]:
        raise ParameterError("influence values and basis rows must align")
    return _reduce(contrast[:, None] * basis.values, "DR")


def pi_moments(data: ObservationalDataset, fit: NuisanceFit,
               basis: BasisMatrix) -> MomentEstimate:
    """Plug-in moment estimate mean[(mu1 - mu0) b(W)]."""
    contrast = fit.mu1_hat - fit.mu0_hat
    return _reduce(contrast[:, None] * basis.values, "PI")


def ipw_moments(data: ObservationalDataset, fit: NuisanceFit,
                basis: BasisMatrix) -> MomentEstimate:
    """Inverse-probability-weighted moment estimate."""
    treated = data.a == 1
    weight = np.where(treated, data.y / fit.pi1_hat,
                      -data.y / (1.0 - fit.pi1_hat))
    return _reduce(weight[:, None] * basis.values, "IPW")


def moments_by_method(method: str, data: ObservationalDataset, fit: NuisanceFit,
                      basis: BasisMatrix) -> MomentEstimate:
    if method == "DR":
        return dr_moments(influence_values(data, fit), basis)
    if method == "PI":
        return pi_moments(data, fit, basis)
    if method == "IPW":
        return ipw_moments(data, fit, basis)
    raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
