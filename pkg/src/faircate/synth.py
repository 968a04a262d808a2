"""Synthetic data generator with full oracle access.

The generating process: S ~ Bernoulli(1/2); (X1, X2) | S ~ N((0, 2S-1), I);
A ~ Bernoulli(expit(S + S*X1)); potential outcomes Y^a = a*X2^3/2 + f(S,X) + e
with a single shared standard-normal e per record, where
f(S,X) = log(S*X1^2 + 10) + exp(-S*X2/5) + S*X1. Hence the treatment-effect
surface is X2^3/2 and the welfare-optimal rule treats exactly when X2 > 0.
The ``randomized-pi`` variant replaces the treatment propensity with a
constant 1/2 while keeping everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .dataset import ObservationalDataset
from .errors import ParameterError
from .learners import LearnerSpec

VARIANTS = ("confounded", "randomized-pi")
COVARIATE_NAMES = ("x1", "x2")


def _f_base(s: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.log(s * x1**2 + 10.0) + np.exp(-s * x2 / 5.0) + s * x1


def true_mu(s: np.ndarray, x: np.ndarray, arm: int | None) -> np.ndarray:
    """Closed-form outcome regression for either arm."""
    x = np.atleast_2d(x)
    return arm * x[:, 1] ** 3 / 2.0 + _f_base(np.asarray(s, dtype=float), x[:, 0], x[:, 1])


def true_tau(x2: np.ndarray) -> np.ndarray:
    return np.asarray(x2, dtype=float) ** 3 / 2.0


def true_pi1(s: np.ndarray, x1: np.ndarray, variant: str = "confounded") -> np.ndarray:
    if variant == "randomized-pi":
        return np.full(np.broadcast(s, x1).shape, 0.5)
    s = np.asarray(s, dtype=float)
    return expit(s + s * np.asarray(x1, dtype=float))


@dataclass(frozen=True)
class DgpSample:
    """A generated dataset plus per-record ground truth."""

    dataset: ObservationalDataset
    y0: np.ndarray
    y1: np.ndarray
    true_tau: np.ndarray
    true_pi1: np.ndarray
    true_mu0: np.ndarray
    true_mu1: np.ndarray
    seed: object
    variant: str


def generate(n: int, seed, variant: str = "confounded") -> DgpSample:
    """Draw n records from the generating process, deterministic per seed."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    rng = np.random.default_rng(seed)
    s = rng.binomial(1, 0.5, size=n)
    x1 = rng.normal(0.0, 1.0, size=n)
    x2 = rng.normal(2.0 * s - 1.0, 1.0, size=n)
    pi1 = true_pi1(s, x1, variant)
    a = rng.binomial(1, pi1)
    f = _f_base(s.astype(float), x1, x2)
    mu0 = f
    mu1 = x2**3 / 2.0 + f
    eps = rng.normal(0.0, 1.0, size=n)
    y0 = mu0 + eps
    y1 = mu1 + eps
    y = y1 * a + y0 * (1 - a)
    dataset = ObservationalDataset(y=y, a=a, s=s, x=np.column_stack([x1, x2]),
                                   covariate_names=COVARIATE_NAMES)
    return DgpSample(dataset=dataset, y0=y0, y1=y1, true_tau=true_tau(x2),
                     true_pi1=pi1, true_mu0=mu0, true_mu1=mu1,
                     seed=seed, variant=variant)


def _oracle_pi_paper(s, x, arm):
    return true_pi1(s, np.atleast_2d(x)[:, 0], "confounded")


def _oracle_pi_randomized(s, x, arm):
    return true_pi1(s, np.atleast_2d(x)[:, 0], "randomized-pi")


def oracle_outcome_spec() -> LearnerSpec:
    """Learner that returns the exact outcome regressions."""
    return LearnerSpec(kind="oracle", oracle_fn=true_mu)


def oracle_propensity_spec(variant: str = "confounded") -> LearnerSpec:
    """Learner that returns the exact treatment propensity."""
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    fn = _oracle_pi_paper if variant == "confounded" else _oracle_pi_randomized
    return LearnerSpec(kind="oracle", oracle_fn=fn)


@dataclass(frozen=True)
class OracleValues:
    """Closed-form population constants of the generating process."""

    p_treat_given_s0: float        # P(X2 > 0 | S=0)
    p_treat_given_s1: float        # P(X2 > 0 | S=1)
    tau_mean_given_s0: float       # E[X2^3/2 | S=0]
    tau_mean_given_s1: float       # E[X2^3/2 | S=1]
    unconstrained_group_gap: float
    independence_unfairness_of_gstar: float


def oracle_values() -> OracleValues:
    """Group treatment shares and effect means implied by Gaussian moments
    (third moment of N(m, 1) is m^3 + 3m)."""
    phi1 = float(norm.cdf(1.0))
    return OracleValues(
        p_treat_given_s0=1.0 - phi1,
        p_treat_given_s1=phi1,
        tau_mean_given_s0=-2.0,
        tau_mean_given_s1=2.0,
        unconstrained_group_gap=4.0,
        independence_unfairness_of_gstar=2.0 * phi1 - 1.0,
    )


def population_standardization() -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Exact population means and standard deviations of (s, x1, x2): X2 is
    an equal mixture of N(-1,1) and N(1,1), so its variance is 2. Useful as
    BasisSpec.fixed_standardization so the basis (and hence the projection
    target) does not vary with the sample."""
    return (0.5, 0.0, 0.0), (0.5, 1.0, float(np.sqrt(2.0)))
