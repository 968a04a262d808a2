"""Command-line entry point.

Subcommands: fit, sweep, compare, case-study, synth-dump. Runs are driven by
a JSON config document (--config), with flags overriding file keys; every run
writes a manifest.json echoing the fully resolved config, and re-running from
that manifest reproduces the outputs byte for byte. The seed is mandatory —
there is no wall-clock default.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, synth
from .basis import BasisSpec, check_a1
from .dataset import ColumnSchema, assign_folds, dump_csv, load_csv
from .errors import (ConfigError, DataValidationError, FaircateError,
                     FitError, InferenceError, ParameterError,
                     QPNonconvergenceError, SchemaError, SingularMatrixError)
from .experiments import (CaseStudyConfig, CompareConfig, SweepConfig,
                          fit_fair_cate, run_case_study, run_delta_sweep,
                          run_dr_comparison, write_case_study_csv,
                          write_sweep_csv)
from .fairness import BinnedFactor, FairnessCriterion
from .inference import bootstrap_beta
from .learners import LearnerSpec
from .qp import QPSettings

CONFIG_KEYS = """\
config JSON keys (flags override file keys; a manifest.json also works):
  seed            integer RNG seed (required)
  out             output directory (required)
  workers         worker processes (default $FAIRCATE_WORKERS or 1)
  data            {"dgp": "confounded"|"randomized-pi", "n": INT}
                  or {"csv": PATH, "schema": {outcome, treatment, sensitive,
                  covariates, treatment_positive?, sensitive_positive?, ...}}
  basis           {degree, include_intercept, variables, standardize}
  outcome_learner / propensity_learner
                  {"kind": "polynomial-ridge"|"gradient-boosted-stumps"|
                   "k-nearest-neighbors"|"constant"|"oracle", plus
                   degree, penalty, n_trees, learning_rate, n_neighbors,
                   value, drop_variables} ("oracle" needs a dgp data source)
  fairness        list of {"kind": "independence"|"positive-balance"|
                  "conditional-parity", "delta": FLOAT, and for
                  conditional-parity: covariate, cuts, level}
  k_folds         cross-fitting folds (default 2)
  epsilon         propensity clip (default 0.025)
  qp              {max_iter, feas_tol, stat_tol, ridge_jitter}
  bootstrap       {replicates, method: "multiplier"|"pairs", ci_level}
  deltas          sweep grid: "LO:HI:COUNT" or a JSON list ("inf" allowed)
  replicates      sweep/compare replicates (default 500)
  estimator       "DR"|"PI"|"IPW" (sweep)
  ns              compare sample sizes (default [2000, 10000])
  eval_n          evaluation-sample size (default: same as n)
  variant         dgp variant for synth-dump/sweep
  train_fraction  case-study train share (default 2/3)
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faircate",
        description="Fairness-constrained heterogeneous treatment-effect "
                    "estimation and policy evaluation.",
        epilog=CONFIG_KEYS, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (or a manifest.json)")
        p.add_argument("--seed", type=int, help="RNG seed (required here or in config)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--dgp", choices=list(synth.VARIANTS),
                       help="generate data from the built-in process")
        p.add_argument("--n", type=int, help="sample size for --dgp")
        p.add_argument("--csv", help="CSV data file")
        p.add_argument("--schema", help="schema JSON (inline string or file path)")
        p.add_argument("--fairness", help="criteria as KIND:DELTA[,KIND:DELTA...]")
        p.add_argument("--delta", type=float,
                       help="uniform tolerance applied to every criterion")
        p.add_argument("--basis-degree", type=int, help="basis degree (default 3)")
        p.add_argument("--no-standardize", action="store_true",
                       help="skip basis standardization")
        p.add_argument("--outcome-learner", help="outcome learner kind")
        p.add_argument("--propensity-learner", help="propensity learner kind")
        p.add_argument("--k-folds", type=int, help="cross-fitting folds")
        p.add_argument("--epsilon", type=float, help="propensity clip")

    p_fit = sub.add_parser("fit", help="one constrained fit; writes beta.json")
    common(p_fit)
    p_fit.add_argument("--bootstrap-replicates", type=int,
                       help="bootstrap CI replicates (0 = skip)")
    p_fit.add_argument("--bootstrap-method", choices=("multiplier", "pairs"))

    p_sweep = sub.add_parser("sweep", help="tolerance sweep; writes sweep.csv")
    common(p_sweep)
    p_sweep.add_argument("--deltas", help='grid "LO:HI:COUNT" or JSON list')
    p_sweep.add_argument("--replicates", type=int)
    p_sweep.add_argument("--estimator", choices=("DR", "PI", "IPW"))

    p_cmp = sub.add_parser("compare", help="estimator comparison across sample "
                                           "sizes; writes compare.csv")
    common(p_cmp)
    p_cmp.add_argument("--deltas", help='grid "LO:HI:COUNT" or JSON list')
    p_cmp.add_argument("--replicates", type=int)
    p_cmp.add_argument("--ns", help="comma-separated sample sizes")

    p_case = sub.add_parser("case-study", help="train/holdout evaluation of a "
                                               "smaller-is-better outcome file")
    common(p_case)
    p_case.add_argument("--deltas", help='tolerances, e.g. "0,inf"')
    p_case.add_argument("--train-fraction", type=float)

    p_dump = sub.add_parser("synth-dump", help="write a generated sample as CSV")
    common(p_dump)
    p_dump.add_argument("--with-oracle", action="store_true",
                        help="include ground-truth columns")
    return parser


# ---------------------------------------------------------------------------
# config resolution

def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    # a manifest is a config wrapped under "config"
    return doc["config"] if "config" in doc and isinstance(doc["config"], dict) else doc


def _parse_fairness_flag(text: str) -> list[dict]:
    criteria = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            kind, delta = part.rsplit(":", 1)
            try:
                criteria.append({"kind": kind, "delta": float(delta)})
            except ValueError:
                raise ConfigError(f"bad fairness spec {part!r}; use KIND:DELTA") from None
        else:
            criteria.append({"kind": part, "delta": 0.0})
    if not criteria:
        raise ConfigError("empty --fairness list")
    return criteria


def _resolve(args: argparse.Namespace) -> dict:
    config = _load_config_file(args.config) if args.config else {}
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["out"] = args.out
    if args.workers is not None:
        config["workers"] = args.workers
    if args.dgp is not None:
        data = config.get("data", {})
        if "csv" in data:
            data = {}
        data["dgp"] = args.dgp
        config["data"] = data
    if args.n is not None:
        data = config.get("data", {})
        if "csv" in data:
            raise ConfigError("--n applies to a dgp data source, not csv")
        data.setdefault("dgp", "confounded")
        data["n"] = args.n
        config["data"] = data
    if args.csv is not None:
        schema = config.get("data", {}).get("schema")
        config["data"] = {"csv": args.csv, "schema": schema}
    if args.schema is not None:
        text = args.schema
        if os.path.exists(text):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        try:
            schema = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"--schema is neither a file nor valid JSON: {err}") from None
        config.setdefault("data", {})["schema"] = schema
    if args.fairness is not None:
        config["fairness"] = _parse_fairness_flag(args.fairness)
    if args.delta is not None:
        for crit in config.get("fairness", []):
            crit["delta"] = args.delta
    if args.basis_degree is not None:
        config.setdefault("basis", {})["degree"] = args.basis_degree
    if args.no_standardize:
        config.setdefault("basis", {})["standardize"] = False
    if args.outcome_learner is not None:
        config.setdefault("outcome_learner", {})["kind"] = args.outcome_learner
    if args.propensity_learner is not None:
        config.setdefault("propensity_learner", {})["kind"] = args.propensity_learner
    if args.k_folds is not None:
        config["k_folds"] = args.k_folds
    if args.epsilon is not None:
        config["epsilon"] = args.epsilon
    for key in ("deltas", "replicates", "estimator", "ns", "train_fraction",
                "bootstrap_replicates", "bootstrap_method", "with_oracle"):
        value = getattr(args, key, None)
        if value is not None and value is not False:
            if key == "ns":
                try:
                    value = [int(v) for v in str(value).split(",")]
                except ValueError:
                    raise ConfigError(f"bad --ns value {value!r}") from None
            if key.startswith("bootstrap_"):
                config.setdefault("bootstrap", {})[key.removeprefix("bootstrap_")] = value
            else:
                config[key] = value
    if "seed" not in config:
        raise ConfigError("missing required key: seed")
    if not isinstance(config["seed"], int):
        raise ConfigError("seed must be an integer")
    if "out" not in config:
        raise ConfigError("missing required key: out")
    if "workers" not in config:
        config["workers"] = int(os.environ.get("FAIRCATE_WORKERS", "1"))
    return config


def _parse_deltas(value) -> tuple[float, ...]:
    if value is None:
        return tuple(float(v) for v in np.linspace(0.0, 4.0, 17))
    if isinstance(value, str):
        if ":" in value:
            try:
                lo, hi, count = value.split(":")
                return tuple(float(v) for v in
                             np.linspace(float(lo), float(hi), int(count)))
            except ValueError:
                raise ConfigError(f"bad deltas grid {value!r}; use LO:HI:COUNT") from None
        value = [v.strip() for v in value.split(",")]
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad deltas value {value!r}") from None


_LEARNER_KEYS = {"kind", "degree", "penalty", "n_trees", "learning_rate",
                 "n_neighbors", "value", "drop_variables"}


def _build_learner(config: dict, key: str, role: str, dgp_variant: str | None) -> LearnerSpec:
    spec = dict(config.get(key, {}))
    unknown = set(spec) - _LEARNER_KEYS
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {sorted(unknown)}")
    kind = spec.pop("kind", "polynomial-ridge")
    if kind == "oracle":
        if dgp_variant is None:
            raise ConfigError(f"{key}: oracle learners need a dgp data source")
        return (synth.oracle_outcome_spec() if role == "outcome"
                else synth.oracle_propensity_spec(dgp_variant))
    if "drop_variables" in spec:
        spec["drop_variables"] = tuple(spec["drop_variables"])
    try:
        return LearnerSpec(kind=kind, **spec)
    except (ParameterError, TypeError) as err:
        raise ConfigError(f"{key}: {err}") from None


def _build_criteria(config: dict, covariate_names: tuple[str, ...] | None
                    ) -> tuple[FairnessCriterion, ...]:
    out = []
    for i, spec in enumerate(config.get("fairness", [])):
        kind = spec.get("kind")
        delta = float(spec.get("delta", 0.0))
        if kind == "independence":
            out.append(FairnessCriterion.independence(delta))
        elif kind == "positive-balance":
            out.append(FairnessCriterion.positive_balance(delta))
        elif kind == "conditional-parity":
            for field in ("covariate", "cuts", "level"):
                if field not in spec:
                    raise ConfigError(f"fairness[{i}]: conditional-parity needs {field!r}")
            if covariate_names is None or spec["covariate"] not in covariate_names:
                raise ConfigError(f"fairness[{i}]: unknown covariate {spec['covariate']!r}")
            factor = BinnedFactor(covariate_names.index(spec["covariate"]),
                                  tuple(float(c) for c in spec["cuts"]))
            out.append(FairnessCriterion.conditional_parity(
                factor, int(spec["level"]), delta,
                label=f"conditional-parity[{spec['covariate']}={spec['level']}]"))
        else:
            raise ConfigError(f"fairness[{i}]: unknown kind {kind!r} (the "
                              "counterfactual-smooth criterion is library-only)")
    return tuple(out)


def _build_basis(config: dict) -> BasisSpec:
    spec = dict(config.get("basis", {}))
    if "variables" in spec and spec["variables"] is not None:
        spec["variables"] = tuple(spec["variables"])
    try:
        return BasisSpec(**spec)
    except (ParameterError, TypeError) as err:
        raise ConfigError(f"basis: {err}") from None


def _build_qp(config: dict) -> QPSettings:
    spec = dict(config.get("qp", {}))
    try:
        return QPSettings(**spec)
    except TypeError as err:
        raise ConfigError(f"qp: {err}") from None


def _data_source(config: dict, require_n: bool = True):
    """Returns (kind, payload): ("dgp", (variant, n)) or ("csv", (path, schema))."""
    data = config.get("data")
    if not isinstance(data, dict) or not data:
        raise ConfigError("missing required key: data (use --dgp/--n or --csv/--schema)")
    if ("dgp" in data) == ("csv" in data):
        raise ConfigError("data must name exactly one source: dgp or csv")
    if "dgp" in data:
        variant = data["dgp"]
        if variant not in synth.VARIANTS:
            raise ConfigError(f"data.dgp must be one of {synth.VARIANTS}")
        n = data.get("n")
        if require_n and (not isinstance(n, int) or n < 1):
            raise ConfigError("data.n must be a positive integer")
        return "dgp", (variant, n)
    schema_spec = data.get("schema")
    if not isinstance(schema_spec, dict):
        raise ConfigError("data.schema is required with a csv source")
    try:
        schema = ColumnSchema.from_dict(schema_spec)
    except SchemaError as err:
        raise ConfigError(str(err)) from None
    return "csv", (data["csv"], schema)


def _write_manifest(out_dir: Path, config: dict, elapsed: float) -> None:
    manifest = {
        "config": config,
        "versions": {"faircate": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "elapsed_seconds": round(elapsed, 3),
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(config: dict) -> Path:
    out_dir = Path(config["out"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise ConfigError(f"output directory {out_dir} is not writable: {err}") from None
    return out_dir


# ---------------------------------------------------------------------------
# subcommands

def _load_training_data(config: dict):
    kind, payload = _data_source(config)
    seed = config["seed"]
    if kind == "dgp":
        variant, n = payload
        sample = synth.generate(n, np.random.SeedSequence(seed).spawn(1)[0], variant)
        data, variant_out = sample.dataset, variant
    else:
        path, schema = payload
        data, variant_out = load_csv(path, schema), None
    k_folds = int(config.get("k_folds", 2))
    data = assign_folds(data, k_folds, seed)
    return data, variant_out


def _cmd_fit(config: dict, out_dir: Path) -> None:
    data, variant = _load_training_data(config)
    criteria = _build_criteria(config, data.covariate_names)
    fit = fit_fair_cate(
        data,
        basis_spec=_build_basis(config),
        outcome_learner=_build_learner(config, "outcome_learner", "outcome", variant),
        propensity_learner=_build_learner(config, "propensity_learner",
                                          "propensity", variant),
        criteria=criteria,
        estimator=config.get("estimator", "DR"),
        epsilon=float(config.get("epsilon", 0.025)),
        qp_settings=_build_qp(config),
    )
    a1 = check_a1(fit.basis.gram)
    report = {
        "beta": fit.solution.beta.tolist(),
        "terms": list(fit.basis.term_labels),
        "constraints": [
            {"criterion": fm.criterion.name, "delta": fm.criterion.delta,
             "residual": float(abs(fm.a @ fit.solution.beta)),
             "lambda": float(lam), "moment": fm.a.tolist()}
            for fm, lam in zip(fit.fairness_moments, fit.solution.lambda_total)],
        "solver": {"iterations": fit.solution.iterations,
                   "primal_residual": fit.solution.primal_residual,
                   "dual_residual": fit.solution.dual_residual,
                   "active_set": list(fit.solution.active_set),
                   "notes": list(fit.solution.notes)},
        "a1": {"min_eigenvalue": a1.min_eigenvalue, "passed": a1.passed},
    }
    boot_cfg = config.get("bootstrap", {})
    n_boot = int(boot_cfg.get("replicates", 0))
    if n_boot > 0:
        result = bootstrap_beta(
            data, fit.nuisance, fit.basis, fit.moment, fit.fairness_moments,
            qp_settings=_build_qp(config), n_replicates=n_boot,
            method=boot_cfg.get("method", "multiplier"), seed=config["seed"],
            ci_level=float(boot_cfg.get("ci_level", 0.95)))
        report["ci"] = {"level": result.ci_level, "method": result.method,
                        "lower": result.ci_lower.tolist(),
                        "upper": result.ci_upper.tolist(),
                        "dropped_replicates": result.n_dropped}
    with (out_dir / "beta.json").open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sweep_config(config: dict, require_dgp: bool) -> SweepConfig:
    kind, payload = _data_source(config)
    covariates = synth.COVARIATE_NAMES if kind == "dgp" else payload[1].covariates
    criteria = _build_criteria(config, tuple(covariates))
    if not criteria:
        criteria = (FairnessCriterion.independence(),)
    variant = payload[0] if kind == "dgp" else None
    if require_dgp and kind != "dgp":
        raise ConfigError("this subcommand needs a dgp data source")
    common = dict(
        seed=config["seed"],
        deltas=_parse_deltas(config.get("deltas")),
        replicates=int(config.get("replicates", 500)),
        basis=_build_basis(config),
        outcome_learner=_build_learner(config, "outcome_learner", "outcome", variant),
        propensity_learner=_build_learner(config, "propensity_learner",
                                          "propensity", variant),
        criteria=criteria,
        k_folds=int(config.get("k_folds", 2)),
        epsilon=float(config.get("epsilon", 0.025)),
        qp=_build_qp(config),
        workers=int(config["workers"]),
    )
    if kind == "dgp":
        return SweepConfig(n=payload[1], variant=payload[0],
                           eval_n=config.get("eval_n"),
                           estimators=(config.get("estimator", "DR"),), **common)
    return SweepConfig(n=0, csv_path=payload[0], csv_schema=payload[1],
                       estimators=(config.get("estimator", "DR"),), **common)


def _cmd_sweep(config: dict, out_dir: Path) -> None:
    result = run_delta_sweep(_sweep_config(config, require_dgp=False))
    write_sweep_csv(result, out_dir / "sweep.csv")
    if result.failures:
        with (out_dir / "failures.log").open("w", encoding="utf-8") as fh:
            fh.write("\n".join(result.failures) + "\n")


def _cmd_compare(config: dict, out_dir: Path) -> None:
    kind, payload = _data_source(config, require_n=False)
    if kind != "dgp":
        raise ConfigError("compare needs a dgp data source")
    variant = payload[0]
    criteria = _build_criteria(config, synth.COVARIATE_NAMES)
    if not criteria:
        criteria = (FairnessCriterion.independence(),)
    cmp_config = CompareConfig(
        seed=config["seed"],
        ns=tuple(int(v) for v in config.get("ns", (2000, 10000))),
        replicates=int(config.get("replicates", 500)),
        deltas=_parse_deltas(config.get("deltas")),
        variant=variant,
        basis=_build_basis(config),
        outcome_learner=_build_learner(config, "outcome_learner", "outcome", variant),
        propensity_learner=_build_learner(config, "propensity_learner",
                                          "propensity", variant),
        criteria=criteria,
        k_folds=int(config.get("k_folds", 2)),
        epsilon=float(config.get("epsilon", 0.025)),
        qp=_build_qp(config),
        workers=int(config["workers"]),
    )
    results = run_dr_comparison(cmp_config)
    write_sweep_csv(list(results.values()), out_dir / "compare.csv")


def _cmd_case_study(config: dict, out_dir: Path) -> None:
    kind, payload = _data_source(config)
    if kind != "csv":
        raise ConfigError("case-study needs a csv data source")
    path, schema = payload
    if not Path(path).exists():
        raise DataValidationError(
            f"case-study data file not found: {path}. Supply a CSV with columns "
            "for outcome (smaller is better), treatment, sensitive group, and "
            "covariates, plus a matching schema; the data is not bundled.")
    criteria = _build_criteria(config, schema.covariates)
    if not criteria:
        criteria = (FairnessCriterion.independence(),
                    FairnessCriterion.positive_balance())
    deltas = config.get("deltas", (0.0, float("inf")))
    case_config = CaseStudyConfig(
        seed=config["seed"], csv_path=path, csv_schema=schema,
        deltas=_parse_deltas(deltas),
        train_fraction=float(config.get("train_fraction", 2.0 / 3.0)),
        basis=_build_basis(config),
        outcome_learner=_build_learner(config, "outcome_learner", "outcome", None),
        propensity_learner=_build_learner(config, "propensity_learner",
                                          "propensity", None),
        criteria=criteria,
        k_folds=int(config.get("k_folds", 2)),
        epsilon=float(config.get("epsilon", 0.025)),
        qp=_build_qp(config),
    )
    rows = run_case_study(case_config)
    write_case_study_csv(rows, out_dir / "case_study.csv")


def _cmd_synth_dump(config: dict, out_dir: Path) -> None:
    kind, payload = _data_source(config)
    if kind != "dgp":
        raise ConfigError("synth-dump needs a dgp data source")
    variant, n = payload
    sample = synth.generate(n, config["seed"], variant)
    extra = None
    if config.get("with_oracle"):
        extra = {"y0": sample.y0, "y1": sample.y1, "true_tau": sample.true_tau,
                 "true_pi1": sample.true_pi1, "true_mu0": sample.true_mu0,
                 "true_mu1": sample.true_mu1}
    dump_csv(sample.dataset, out_dir / "sample.csv", extra_columns=extra)


_COMMANDS = {"fit": _cmd_fit, "sweep": _cmd_sweep, "compare": _cmd_compare,
             "case-study": _cmd_case_study, "synth-dump": _cmd_synth_dump}

_DATA_ERRORS = (SchemaError, DataValidationError, FitError)
_NUMERICAL_ERRORS = (QPNonconvergenceError, SingularMatrixError, InferenceError)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        config = _resolve(args)
        out_dir = _prepare_out(config)
        _COMMANDS[args.subcommand](config, out_dir)
        _write_manifest(out_dir, config, time.monotonic() - started)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 4
    except FaircateError as err:
        # remaining library errors are argument/contract problems
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
