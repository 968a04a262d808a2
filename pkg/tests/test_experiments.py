import numpy as np
import pytest

from faircate import synth
from faircate.basis import BasisSpec
from faircate.dataset import assign_folds
from faircate.errors import ParameterError
from faircate.experiments import (CaseStudyConfig, CompareConfig, SweepConfig,
                                  fit_fair_cate, run_case_study,
                                  run_delta_sweep, run_dr_comparison,
                                  solutions_for_deltas, write_case_study_csv,
                                  write_sweep_csv)
from faircate.fairness import FairnessCriterion
from faircate.learners import LearnerSpec
from faircate.qp import QPSettings

from conftest import CASE_SCHEMA, write_case_csv

RIDGE3 = LearnerSpec(kind="polynomial-ridge", degree=3, penalty=1e-3)
# top of the grid sits far above any plausible empirical group gap so the
# constraint is certainly slack there
SMALL_GRID = (0.0, 1.0, 2.0, 6.0)


def small_config(**overrides):
    defaults = dict(seed=404, n=400, replicates=6, deltas=SMALL_GRID,
                    outcome_learner=RIDGE3, propensity_learner=RIDGE3,
                    criteria=(FairnessCriterion.independence(),), workers=1)
    defaults.update(overrides)
    return SweepConfig(**defaults)


class TestConfigValidation:
    def test_unsorted_grid_rejected(self):
        with pytest.raises(ParameterError, match="sorted"):
            small_config(deltas=(1.0, 0.0))

    def test_unknown_estimator_rejected(self):
        with pytest.raises(ParameterError, match="estimator"):
            small_config(estimators=("AIPW",))


class TestFitFairCate:
    def test_end_to_end_constraint_feasibility(self):
        sample = synth.generate(1000, seed=1)
        data = assign_folds(sample.dataset, 2, seed=2)
        fit = fit_fair_cate(data, outcome_learner=RIDGE3,
                            propensity_learner=RIDGE3,
                            criteria=(FairnessCriterion.independence(0.0),))
        assert fit.constraint_residuals()["independence"] <= 1e-8

    def test_requires_folds(self):
        sample = synth.generate(100, seed=1)
        with pytest.raises(ParameterError, match="folds"):
            fit_fair_cate(sample.dataset)

    def test_delta_resolve_warm_path(self):
        sample = synth.generate(800, seed=3)
        data = assign_folds(sample.dataset, 2, seed=4)
        fit = fit_fair_cate(data, outcome_learner=RIDGE3,
                            propensity_learner=RIDGE3,
                            criteria=(FairnessCriterion.independence(0.0),))
        sols = solutions_for_deltas(fit.basis, fit.moment, fit.fairness_moments,
                                    SMALL_GRID, QPSettings())
        assert len(sols) == len(SMALL_GRID)
        residual0 = abs(fit.fairness_moments[0].a @ sols[0].beta)
        assert residual0 <= 1e-8


@pytest.fixture(scope="module")
def result():
    return run_delta_sweep(small_config())


class TestDeltaSweep:
    def test_metric_shapes(self, result):
        assert result.metrics["welfare"].shape == (6, len(SMALL_GRID))
        assert not result.failures

    def test_constraint_residual_at_zero(self, result):
        assert np.nanmax(result.metrics["residual.independence"][:, 0]) <= 1e-8

    def test_duals_vanish_when_slack(self, result):
        assert np.nanmax(result.metrics["lambda.independence"][:, -1]) <= 1e-6

    def test_group_gap_tracks_tolerance(self, result):
        gaps = result.mean("cate_group_gap")
        assert np.all(np.diff(gaps) >= -1e-6)

    def test_deterministic_given_seed(self, tmp_path, result):
        again = run_delta_sweep(small_config())
        path_a = tmp_path / "a.csv"
        path_b = tmp_path / "b.csv"
        write_sweep_csv(result, path_a)
        write_sweep_csv(again, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_worker_pool_matches_serial(self, result):
        parallel = run_delta_sweep(small_config(workers=2))
        np.testing.assert_array_equal(parallel.metrics["welfare"],
                                      result.metrics["welfare"])

    def test_tidy_rows(self, result):
        rows = result.to_rows()
        metrics = {row["metric"] for row in rows}
        assert {"welfare", "regret", "misclassification",
                "unfairness.independence"} <= metrics
        per_metric = sum(1 for row in rows if row["metric"] == "welfare")
        assert per_metric == len(SMALL_GRID)


class TestComparison:
    def test_keys_and_ordering(self):
        config = CompareConfig(seed=11, ns=(300, 600), replicates=4,
                               deltas=(0.0, 4.0), outcome_learner=RIDGE3,
                               propensity_learner=RIDGE3,
                               estimators=("DR", "PI"))
        results = run_dr_comparison(config)
        assert set(results) == {("DR", 300), ("DR", 600), ("PI", 300), ("PI", 600)}
        for result in results.values():
            assert result.metrics["regret"].shape == (4, 2)


class TestCaseStudy:
    def test_stand_in_file_end_to_end(self, tmp_path):
        path = write_case_csv(tmp_path / "case.csv", n=1800, seed=3)
        config = CaseStudyConfig(seed=5, csv_path=str(path), csv_schema=CASE_SCHEMA,
                                 outcome_learner=RIDGE3, propensity_learner=RIDGE3,
                                 basis=BasisSpec(degree=2))
        rows = run_case_study(config)
        assert [row["method"] for row in rows] == ["ours-delta-0.0", "ours-delta-inf"]
        for row in rows:
            assert set(row) == {"method", "risk", "idp", "pb"}
            assert np.isfinite(row["risk"])
            assert 0 <= row["idp"] and 0 <= row["pb"]
        out = tmp_path / "case.out.csv"
        write_case_study_csv(rows, out)
        header = out.read_text().splitlines()[0]
        assert header == "method,risk,idp,pb"

    def test_missing_path_rejected(self):
        with pytest.raises(ParameterError, match="csv_path"):
            run_case_study(CaseStudyConfig(seed=1))


class TestWriters:
    def test_sweep_csv_columns(self, tmp_path):
        result = run_delta_sweep(small_config(replicates=2, n=300,
                                              deltas=(0.0, 4.0)))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "delta,estimator,n,metric,mean,se"
        assert len(lines) > 2
