"""Experiment suites: single fits, tolerance sweeps, estimator comparisons
under misspecification, and the recidivism-style case study.

Every suite draws per-replicate seeds from a spawned seed tree, so results
are deterministic for a fixed config and independent of worker count.
Replicate failures are logged and flushed as NaN rows rather than aborting
the suite.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import synth
from .basis import BasisMatrix, BasisSpec, expand
from .dataset import ColumnSchema, ObservationalDataset, assign_folds, load_csv
from .errors import FaircateError, ParameterError
from .fairness import (FairnessCriterion, FairnessMoment, fairness_moment,
                       independence_weights, conditional_parity_weights,
                       policy_unfairness, positive_balance_weights)
from .learners import LearnerSpec
from .moments import (InfluenceValues, MomentEstimate, influence_values,
                      influence_values_from_predictions, moments_by_method)
from .nuisance import NuisanceFit, fit_cross_fitted, predict_all
from .policy import (FittedCate, PolicyReport, estimate_welfare, oracle_regret,
                     treated_fraction_by_group)
from .qp import LinearConstraint, QPProblem, QPSettings, QPSolution, solve

DEFAULT_DELTA_GRID = tuple(float(v) for v in np.linspace(0.0, 4.0, 17))
ESTIMATORS = ("DR", "PI", "IPW")


# ---------------------------------------------------------------------------
# single fit

@dataclass(frozen=True)
class CateFit:
    """Everything produced by one constrained fit on one training sample."""

    data: ObservationalDataset
    basis: BasisMatrix
    nuisance: NuisanceFit
    influence: InfluenceValues
    moment: MomentEstimate
    fairness_moments: tuple[FairnessMoment, ...]
    problem: QPProblem
    solution: QPSolution

    @property
    def cate(self) -> FittedCate:
        return FittedCate(beta=self.solution.beta, basis=self.basis)

    def constraint_residuals(self) -> dict[str, float]:
        return {fm.criterion.name: float(abs(fm.a @ self.solution.beta))
                for fm in self.fairness_moments}


def build_problem(basis: BasisMatrix, moment: MomentEstimate,
                  fairness_moments: tuple[FairnessMoment, ...],
                  deltas: Mapping[str, float] | float | None = None) -> QPProblem:
    """Assemble the QP; ``deltas`` (scalar or per-criterion-name map)
    overrides the tolerances stored in the criteria."""
    constraints = []
    for fm in fairness_moments:
        delta = fm.criterion.delta
        if isinstance(deltas, Mapping):
            delta = deltas.get(fm.criterion.name, delta)
        elif deltas is not None:
            delta = float(deltas)
        constraints.append(LinearConstraint(a=fm.a, delta=delta))
    return QPProblem(Q=basis.gram, c=moment.c, constraints=tuple(constraints))


def fit_fair_cate(data: ObservationalDataset, *,
                  basis_spec: BasisSpec = BasisSpec(),
                  outcome_learner: LearnerSpec = LearnerSpec(),
                  propensity_learner: LearnerSpec = LearnerSpec(),
                  criteria: tuple[FairnessCriterion, ...] = (),
                  estimator: str = "DR",
                  epsilon: float = 0.025,
                  qp_settings: QPSettings = QPSettings()) -> CateFit:
    """Cross-fit nuisances, estimate all moments, and solve the constrained
    projection once at the tolerances stored in the criteria."""
    if data.fold is None:
        raise ParameterError("assign folds before fitting (see assign_folds)")
    nuis = fit_cross_fitted(data, outcome_learner, propensity_learner, epsilon)
    basis = expand(data, basis_spec)
    iv = influence_values(data, nuis)
    moment = moments_by_method(estimator, data, nuis, basis)
    fms = tuple(fairness_moment(c, data, basis, fit=nuis, iv=iv) for c in criteria)
    problem = build_problem(basis, moment, fms)
    solution = solve(problem, qp_settings)
    return CateFit(data=data, basis=basis, nuisance=nuis, influence=iv,
                   moment=moment, fairness_moments=fms, problem=problem,
                   solution=solution)


def solutions_for_deltas(basis: BasisMatrix, moment: MomentEstimate,
                         fairness_moments: tuple[FairnessMoment, ...],
                         deltas, qp_settings: QPSettings) -> list[QPSolution]:
    """Re-solve the QP along a tolerance grid (uniform across criteria),
    warm-starting each solve from its neighbor."""
    solutions = []
    warm = None
    for delta in deltas:
        problem = build_problem(basis, moment, fairness_moments, deltas=float(delta))
        warm = solve(problem, qp_settings, warm_start=warm)
        solutions.append(warm)
    return solutions


# ---------------------------------------------------------------------------
# evaluation on an independent sample

def eval_fairness_weights(criterion: FairnessCriterion,
                          eval_data: ObservationalDataset,
                          mu0_eval: np.ndarray, mu1_eval: np.ndarray,
                          iv_eval: InfluenceValues) -> np.ndarray:
    """Per-record fairness weights recomputed on the evaluation sample."""
    if criterion.kind == "independence":
        return independence_weights(eval_data.s)
    if criterion.kind == "conditional-parity":
        labels = np.asarray(criterion.factor(eval_data.x))
        return conditional_parity_weights(eval_data.s, labels == criterion.level,
                                          criterion.level)
    if criterion.kind == "positive-balance":
        uf, _, _ = positive_balance_weights(eval_data.s, (mu1_eval - mu0_eval) > 0,
                                            fold=None)
        return uf
    w = np.column_stack([eval_data.s.astype(float), eval_data.x])
    return np.asarray(criterion.smooth_fn(iv_eval.phi0, iv_eval.phi1, w), dtype=float)


def evaluate_policy(policy: np.ndarray, eval_data: ObservationalDataset,
                    iv_eval: InfluenceValues,
                    fairness_weights: Mapping[str, np.ndarray],
                    true_tau: np.ndarray | None = None) -> PolicyReport:
    welfare = estimate_welfare(policy, iv_eval)
    unfairness = {name: policy_unfairness(policy, weights)
                  for name, weights in fairness_weights.items()}
    fractions = treated_fraction_by_group(policy, eval_data.s)
    regret = misclass = None
    if true_tau is not None:
        regret, misclass = oracle_regret(policy, true_tau)
    return PolicyReport(welfare=welfare, unfairness=unfairness,
                        treated_fraction_by_s=fractions, regret=regret,
                        misclassification=misclass)


# ---------------------------------------------------------------------------
# sweep configuration and results

@dataclass(frozen=True)
class SweepConfig:
    seed: int
    n: int = 2000
    replicates: int = 500
    deltas: tuple[float, ...] = DEFAULT_DELTA_GRID
    variant: str = "confounded"
    csv_path: str | None = None
    csv_schema: ColumnSchema | None = None
    basis: BasisSpec = BasisSpec()
    outcome_learner: LearnerSpec = LearnerSpec()
    propensity_learner: LearnerSpec = LearnerSpec()
    criteria: tuple[FairnessCriterion, ...] = (FairnessCriterion.independence(),)
    estimators: tuple[str, ...] = ("DR",)
    k_folds: int = 2
    epsilon: float = 0.025
    qp: QPSettings = QPSettings()
    eval_n: int | None = None
    workers: int = 1

    def __post_init__(self):
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise ParameterError(f"unknown estimator {est!r}; choose from {ESTIMATORS}")
        if self.replicates < 1:
            raise ParameterError("need at least one replicate")
        if len(self.deltas) == 0:
            raise ParameterError("delta grid must be nonempty")
        if any(b < a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ParameterError("delta grid must be sorted ascending")
        if self.csv_path is not None and self.csv_schema is None:
            raise ParameterError("csv_path needs csv_schema")


@dataclass
class SweepResult:
    """Per-replicate metric values on the tolerance grid, one (R, D) array
    per metric, plus replicate failure log."""

    deltas: np.ndarray
    estimator: str
    n: int
    metrics: dict[str, np.ndarray]
    failures: tuple[str, ...] = ()

    def mean(self, name: str) -> np.ndarray:
        return np.nanmean(self.metrics[name], axis=0)

    def se(self, name: str) -> np.ndarray:
        values = self.metrics[name]
        count = np.sum(~np.isnan(values), axis=0)
        return np.nanstd(values, axis=0, ddof=1) / np.sqrt(np.maximum(count, 1))

    def to_rows(self) -> list[dict]:
        rows = []
        for name in sorted(self.metrics):
            means = self.mean(name)
            ses = self.se(name)
            for j, delta in enumerate(self.deltas):
                rows.append({"delta": float(delta), "estimator": self.estimator,
                             "n": self.n, "metric": name,
                             "mean": float(means[j]), "se": float(ses[j])})
        return rows


def _metric_names(criteria: tuple[FairnessCriterion, ...],
                  synthetic: bool) -> list[str]:
    names = ["welfare", "treated_frac_s0", "treated_frac_s1", "cate_group_gap"]
    if synthetic:
        names += ["regret", "misclassification"]
    for crit in criteria:
        names += [f"unfairness.{crit.name}", f"lambda.{crit.name}",
                  f"residual.{crit.name}"]
    return names


def _make_replicate_data(config: SweepConfig, seed_seq: np.random.SeedSequence):
    """One (train, eval) pair: fresh draws under the generating process, or a
    random split of the fixed CSV sample."""
    train_seed, eval_seed, fold_seed = seed_seq.spawn(3)
    if config.csv_path is None:
        eval_n = config.eval_n or config.n
        train = synth.generate(config.n, train_seed, config.variant)
        holdout = synth.generate(eval_n, eval_seed, config.variant)
        data = assign_folds(train.dataset, config.k_folds,
                            np.random.default_rng(fold_seed).integers(2**32))
        return data, holdout.dataset, holdout.true_tau
    full = load_csv(config.csv_path, config.csv_schema)
    rng = np.random.default_rng(train_seed)
    perm = rng.permutation(full.n)
    n_train = full.n // 2
    train = full.take(perm[:n_train])
    holdout = full.take(perm[n_train:])
    data = assign_folds(train, config.k_folds,
                        np.random.default_rng(fold_seed).integers(2**32))
    return data, holdout, None


def _sweep_replicate(config: SweepConfig, seed_seq: np.random.SeedSequence
                     ) -> dict[str, dict[str, np.ndarray]]:
    """Fit once, solve the whole tolerance grid per estimator, evaluate on
    the held-out sample. Returns {estimator: {metric: (D,) values}}."""
    data, eval_data, true_tau_eval = _make_replicate_data(config, seed_seq)
    nuis = fit_cross_fitted(data, config.outcome_learner,
                            config.propensity_learner, config.epsilon)
    basis = expand(data, config.basis)
    iv = influence_values(data, nuis)
    fms = tuple(fairness_moment(c, data, basis, fit=nuis, iv=iv)
                for c in config.criteria)

    mu0_e, mu1_e, pi1_e = predict_all(nuis, eval_data)
    iv_eval = influence_values_from_predictions(eval_data.y, eval_data.a,
                                                mu0_e, mu1_e, pi1_e)
    weights = {c.name: eval_fairness_weights(c, eval_data, mu0_e, mu1_e, iv_eval)
               for c in config.criteria}
    basis_eval = basis.evaluate_dataset(eval_data)
    s_train = data.s

    out: dict[str, dict[str, np.ndarray]] = {}
    names = _metric_names(config.criteria, synthetic=true_tau_eval is not None)
    for estimator in config.estimators:
        moment = moments_by_method(estimator, data, nuis, basis)
        solutions = solutions_for_deltas(basis, moment, fms, config.deltas, config.qp)
        metrics = {name: np.full(len(config.deltas), np.nan) for name in names}
        for j, solution in enumerate(solutions):
            beta = solution.beta
            tau_eval = basis_eval @ beta
            g = tau_eval > 0.0
            report = evaluate_policy(g, eval_data, iv_eval, weights,
                                     true_tau=true_tau_eval)
            metrics["welfare"][j] = report.welfare
            metrics["treated_frac_s0"][j] = report.treated_fraction_by_s[0]
            metrics["treated_frac_s1"][j] = report.treated_fraction_by_s[1]
            tau_train = basis.values @ beta
            gap = tau_train[s_train == 0].mean() - tau_train[s_train == 1].mean()
            metrics["cate_group_gap"][j] = abs(gap)
            if true_tau_eval is not None:
                metrics["regret"][j] = report.regret
                metrics["misclassification"][j] = report.misclassification
            for fm, lam in zip(fms, solution.lambda_total):
                name = fm.criterion.name
                metrics[f"unfairness.{name}"][j] = report.unfairness[name]
                metrics[f"lambda.{name}"][j] = lam
                metrics[f"residual.{name}"][j] = abs(fm.a @ beta)
        out[estimator] = metrics
    return out


def _replicate_worker(args):
    config, seed_seq = args
    try:
        return _sweep_replicate(config, seed_seq)
    except FaircateError as err:
        return f"{type(err).__name__}: {err}"


def _run_replicates(config: SweepConfig) -> dict[str, SweepResult]:
    seeds = np.random.SeedSequence(config.seed).spawn(config.replicates)
    jobs = [(config, seed) for seed in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_replicate_worker, jobs, chunksize=4))
    else:
        outcomes = [_replicate_worker(job) for job in jobs]

    synthetic = config.csv_path is None
    names = _metric_names(config.criteria, synthetic=synthetic)
    n_delta = len(config.deltas)
    results = {}
    failures = tuple(f"replicate {i}: {res}" for i, res in enumerate(outcomes)
                     if isinstance(res, str))
    for estimator in config.estimators:
        metrics = {name: np.full((config.replicates, n_delta), np.nan)
                   for name in names}
        for i, res in enumerate(outcomes):
            if isinstance(res, str):
                continue
            for name, values in res[estimator].items():
                metrics[name][i] = values
        results[estimator] = SweepResult(deltas=np.asarray(config.deltas, dtype=float),
                                         estimator=estimator, n=config.n,
                                         metrics=metrics, failures=failures)
    return results


def run_delta_sweep(config: SweepConfig) -> SweepResult:
    """Tolerance sweep for a single estimator (the first configured one)."""
    estimator = config.estimators[0]
    config = replace(config, estimators=(estimator,))
    return _run_replicates(config)[estimator]


@dataclass(frozen=True)
class CompareConfig:
    """Estimator comparison across sample sizes (optionally under deliberate
    nuisance misspecification baked into the learner specs)."""

    seed: int
    ns: tuple[int, ...] = (2000, 10000)
    replicates: int = 500
    deltas: tuple[float, ...] = DEFAULT_DELTA_GRID
    variant: str = "confounded"
    basis: BasisSpec = BasisSpec()
    outcome_learner: LearnerSpec = LearnerSpec()
    propensity_learner: LearnerSpec = LearnerSpec()
    criteria: tuple[FairnessCriterion, ...] = (FairnessCriterion.independence(),)
    estimators: tuple[str, ...] = ESTIMATORS
    k_folds: int = 2
    epsilon: float = 0.025
    qp: QPSettings = QPSettings()
    workers: int = 1


def run_dr_comparison(config: CompareConfig) -> dict[tuple[str, int], SweepResult]:
    """Regret / unfairness curves per estimator per sample size. All
    estimators share each replicate's data and nuisance fit."""
    out: dict[tuple[str, int], SweepResult] = {}
    for n in config.ns:
        sweep_config = SweepConfig(
            seed=config.seed + n, n=n, replicates=config.replicates,
            deltas=config.deltas, variant=config.variant, basis=config.basis,
            outcome_learner=config.outcome_learner,
            propensity_learner=config.propensity_learner,
            criteria=config.criteria, estimators=config.estimators,
            k_folds=config.k_folds, epsilon=config.epsilon, qp=config.qp,
            workers=config.workers)
        for estimator, result in _run_replicates(sweep_config).items():
            out[(estimator, n)] = result
    return out


# ---------------------------------------------------------------------------
# case study

@dataclass(frozen=True)
class CaseStudyConfig:
    seed: int
    csv_path: str = ""
    csv_schema: ColumnSchema | None = None
    deltas: tuple[float, ...] = (0.0, float("inf"))
    train_fraction: float = 2.0 / 3.0
    basis: BasisSpec = BasisSpec()
    outcome_learner: LearnerSpec = LearnerSpec()
    propensity_learner: LearnerSpec = LearnerSpec()
    criteria: tuple[FairnessCriterion, ...] = (
        FairnessCriterion.independence(), FairnessCriterion.positive_balance())
    k_folds: int = 2
    epsilon: float = 0.025
    qp: QPSettings = QPSettings()


CASE_COLUMN_SHORT = {"independence": "idp", "positive-balance": "pb"}


def run_case_study(config: CaseStudyConfig) -> list[dict]:
    """Fit on a train split of a smaller-is-better outcome file, evaluate
    risk and per-criterion policy disparity on the holdout, one row per
    tolerance."""
    if not config.csv_path:
        raise ParameterError("case study needs a csv_path; supply the data file")
    if config.csv_schema is None:
        raise ParameterError("case study needs a csv_schema")
    from .policy import recidivism_objective_flip

    raw = load_csv(config.csv_path, config.csv_schema)
    flipped = recidivism_objective_flip(raw)
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(flipped.n)
    n_train = int(round(config.train_fraction * flipped.n))
    if not 0 < n_train < flipped.n:
        raise ParameterError(f"train fraction {config.train_fraction} leaves an "
                             "empty split")
    train = assign_folds(flipped.take(perm[:n_train]), config.k_folds,
                         int(rng.integers(2**32)))
    holdout = flipped.take(perm[n_train:])

    nuis = fit_cross_fitted(train, config.outcome_learner,
                            config.propensity_learner, config.epsilon)
    basis = expand(train, config.basis)
    iv = influence_values(train, nuis)
    moment = moments_by_method("DR", train, nuis, basis)
    fms = tuple(fairness_moment(c, train, basis, fit=nuis, iv=iv)
                for c in config.criteria)

    mu0_e, mu1_e, pi1_e = predict_all(nuis, holdout)
    iv_eval = influence_values_from_predictions(holdout.y, holdout.a,
                                                mu0_e, mu1_e, pi1_e)
    weights = {c.name: eval_fairness_weights(c, holdout, mu0_e, mu1_e, iv_eval)
               for c in config.criteria}
    basis_eval = basis.evaluate_dataset(holdout)

    rows = []
    warm = None
    for delta in config.deltas:
        problem = build_problem(basis, moment, fms, deltas=float(delta))
        warm = solve(problem, config.qp, warm_start=warm)
        g = basis_eval @ warm.beta > 0.0
        report = evaluate_policy(g, holdout, iv_eval, weights)
        label = "inf" if np.isinf(delta) else repr(float(delta))
        row = {"method": f"ours-delta-{label}",
               # outcomes were negated, so risk is minus the fitted welfare
               "risk": -report.welfare}
        for crit in config.criteria:
            short = CASE_COLUMN_SHORT.get(crit.name, crit.name)
            row[short] = report.unfairness[crit.name]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# writers

def write_sweep_csv(results, path: str | Path) -> None:
    """Tidy CSV: delta, estimator, n, metric, mean, se. Floats use repr so
    identical runs produce byte-identical files."""
    results = [results] if isinstance(results, SweepResult) else list(results)
    rows = []
    for result in results:
        rows.extend(result.to_rows())
    rows.sort(key=lambda r: (r["estimator"], r["n"], r["metric"], r["delta"]))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "estimator", "n", "metric", "mean", "se"])
        for row in rows:
            writer.writerow([repr(row["delta"]), row["estimator"], str(row["n"]),
                             row["metric"], repr(row["mean"]), repr(row["se"])])


def write_case_study_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        raise ParameterError("no case-study rows to write")
    columns = list(rows[0])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if isinstance(row[c], str) else repr(float(row[c]))
                             for c in columns])
