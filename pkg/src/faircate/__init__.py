"""faircate: heterogeneous treatment-effect estimation under fairness
constraints, with policy evaluation, bootstrap inference, and a simulation
harness."""

from .basis import A1Diagnostic, BasisMatrix, BasisSpec, check_a1, expand
from .dataset import (ColumnSchema, Observation, ObservationalDataset,
                      assign_folds, dump_csv, load_csv)
from .errors import FaircateError
from .experiments import (CaseStudyConfig, CateFit, CompareConfig, SweepConfig,
                          SweepResult, build_problem, fit_fair_cate,
                          run_case_study, run_delta_sweep, run_dr_comparison,
                          solutions_for_deltas)
from .fairness import (FairnessCriterion, FairnessMoment, fairness_moment,
                       policy_unfairness, uf_conditional_parity,
                       uf_counterfactual_smooth, uf_independence,
                       uf_positive_balance)
from .inference import BootstrapResult, bootstrap_beta
from .learners import LearnerSpec
from .moments import (InfluenceValues, MomentEstimate, dr_moments,
                      influence_values, ipw_moments, pi_moments)
from .nuisance import (NuisanceFit, fit_cross_fitted, predict_all,
                       predict_nuisance, predict_propensity)
from .policy import (FittedCate, PolicyReport, estimate_welfare, oracle_regret,
                     policy_interval, policy_threshold,
                     recidivism_objective_flip)
from .qp import (LinearConstraint, QPProblem, QPSettings, QPSolution, solve,
                 solve_unconstrained)
from .synth import DgpSample, generate, oracle_values

__version__ = "0.1.0"

__all__ = [
    "A1Diagnostic", "BasisMatrix", "BasisSpec", "BootstrapResult",
    "CaseStudyConfig", "CateFit", "ColumnSchema", "CompareConfig", "DgpSample",
    "FaircateError", "FairnessCriterion", "FairnessMoment", "FittedCate",
    "InfluenceValues", "LearnerSpec", "LinearConstraint", "MomentEstimate",
    "NuisanceFit", "Observation", "ObservationalDataset", "PolicyReport",
    "QPProblem", "QPSettings", "QPSolution", "SweepConfig", "SweepResult",
    "assign_folds", "bootstrap_beta", "build_problem", "check_a1",
    "dr_moments", "dump_csv", "estimate_welfare", "expand", "fairness_moment",
    "fit_cross_fitted", "fit_fair_cate", "generate", "influence_values",
    "ipw_moments", "load_csv", "oracle_regret", "oracle_values",
    "pi_moments", "policy_interval", "policy_threshold", "policy_unfairness",
    "predict_all", "predict_nuisance", "predict_propensity",
    "recidivism_objective_flip", "run_case_study", "run_delta_sweep",
    "run_dr_comparison", "solutions_for_deltas", "solve",
    "solve_unconstrained", "uf_conditional_parity", "uf_counterfactual_smooth",
    "uf_independence", "uf_positive_balance",
]
