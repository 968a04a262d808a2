"""Bootstrap confidence intervals for the constrained coefficient vector.

Nuisance models are held fixed across replicates; only the QP inputs (Gram
matrix, moment vector, fairness moments) are perturbed, which is the dominant
variance source once the influence-function structure is in place. Two
schemes:

* ``multiplier``: reweight every per-record contribution with i.i.d.
  unit-rate exponential draws (mean 1, variance 1, nonnegative, so the
  reweighted Gram matrix stays positive semidefinite) and re-solve the QP.
  The self-normalizing denominators inside the fairness weights stay fixed.
* ``pairs``: resample records with replacement, recompute all moments from
  the fixed out-of-fold nuisance predictions (fairness denominators are
  recomputed on the resample), and re-solve.

Both schemes are constructions on top of the normal-limit theory; neither
refits nuisances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisMatrix
from .dataset import ObservationalDataset
from .errors import (DegenerateGroupError, InferenceError, ParameterError,
                     QPNonconvergenceError)
from .fairness import (FairnessMoment, conditional_parity_weights,
                       independence_weights, positive_balance_weights)
from .moments import MomentEstimate
from .nuisance import NuisanceFit
from .qp import LinearConstraint, QPProblem, QPSettings, solve

METHODS = ("multiplier", "pairs")
MIN_REPLICATES = 200
MAX_DROP_FRACTION = 0.05


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate draws of the coefficient vector and percentile intervals."""

    replicates: np.ndarray      # (R_kept, k)
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    method: str
    ci_level: float
    n_dropped: int
    point_estimate: np.ndarray


def _resampled_fairness_vector(fm: FairnessMoment, idx: np.ndarray,
                               s: np.ndarray, fold: np.ndarray | None,
                               values_resampled: np.ndarray) -> np.ndarray:
    kind = fm.criterion.kind
    if kind == "independence":
        uf = independence_weights(s[idx])
    elif kind == "conditional-parity":
        hits = np.asarray(fm.diagnostics["hits"])[idx]
        uf = conditional_parity_weights(s[idx], hits, fm.criterion.level)
    elif kind == "positive-balance":
        indicator = np.asarray(fm.diagnostics["indicator"])[idx]
        fold_resampled = fold[idx] if fold is not None else None
        uf, _, _ = positive_balance_weights(s[idx], indicator, fold_resampled)
    else:
        uf = fm.per_record_uf[idx]
    return (uf[:, None] * values_resampled).mean(axis=0)


def bootstrap_beta(data: ObservationalDataset, fit: NuisanceFit,
                   basis: BasisMatrix, moment: MomentEstimate,
                   fairness_moments: tuple[FairnessMoment, ...] = (),
                   *, qp_settings: QPSettings | None = None,
                   n_replicates: int = 500, method: str = "multiplier",
                   seed: int = 0, ci_level: float = 0.95) -> BootstrapResult:
    """Resample the fitted QP and return percentile confidence intervals.

    Replicates whose QP fails to converge (or whose resample degenerates,
    e.g. a single-group draw under ``pairs``) are dropped; more than 5%
    dropped raises InferenceError.
    """
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    if n_replicates < MIN_REPLICATES:
        raise ParameterError(f"need at least {MIN_REPLICATES} replicates, "
                             f"got {n_replicates}")
    if not 0.0 < ci_level < 1.0:
        raise ParameterError(f"ci_level must be in (0, 1), got {ci_level}")
    qp_settings = qp_settings or QPSettings()
    n, k = basis.values.shape
    values = basis.values
    contributions = moment.per_record_contributions
    deltas = [fm.criterion.delta for fm in fairness_moments]

    point_problem = QPProblem(Q=basis.gram, c=moment.c, constraints=tuple(
        LinearConstraint(a=fm.a, delta=d) for fm, d in zip(fairness_moments, deltas)))
    point = solve(point_problem, qp_settings)

    streams = np.random.SeedSequence(seed).spawn(n_replicates)
    draws = np.full((n_replicates, k), np.nan)
    dropped = 0
    for r, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        try:
            if method == "multiplier":
                w = rng.standard_exponential(n)
                gram_r = (values * w[:, None]).T @ values / n
                gram_r = (gram_r + gram_r.T) / 2.0
                c_r = (contributions * w[:, None]).mean(axis=0)
                constraints = tuple(
                    LinearConstraint(a=((fm.per_record_uf * w)[:, None]
                                        * values).mean(axis=0), delta=d)
                    for fm, d in zip(fairness_moments, deltas))
            else:
                idx = rng.integers(0, n, size=n)
                values_r = values[idx]
                gram_r = values_r.T @ values_r / n
                gram_r = (gram_r + gram_r.T) / 2.0
                c_r = contributions[idx].mean(axis=0)
                constraints = tuple(
                    LinearConstraint(
                        a=_resampled_fairness_vector(fm, idx, data.s, data.fold,
                                                     values_r),
                        delta=d)
                    for fm, d in zip(fairness_moments, deltas))
            problem = QPProblem(Q=gram_r, c=c_r, constraints=constraints)
            draws[r] = solve(problem, qp_settings, warm_start=point).beta
        except (QPNonconvergenceError, DegenerateGroupError):
            dropped += 1
    if dropped > MAX_DROP_FRACTION * n_replicates:
        raise InferenceError(
            f"{dropped}/{n_replicates} bootstrap replicates failed; "
            "inference is unreliable")
    kept = draws[~np.isnan(draws).any(axis=1)]
    tail = 100.0 * (1.0 - ci_level) / 2.0
    ci_lower = np.percentile(kept, tail, axis=0)
    ci_upper = np.percentile(kept, 100.0 - tail, axis=0)
    return BootstrapResult(replicates=kept, ci_lower=ci_lower, ci_upper=ci_upper,
                           method=method, ci_level=ci_level, n_dropped=dropped,
                           point_estimate=point.beta)
