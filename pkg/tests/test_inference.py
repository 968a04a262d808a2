import numpy as np
import pytest

from faircate import synth
from faircate.basis import BasisSpec, expand
from faircate.dataset import assign_folds
from faircate.errors import ParameterError
from faircate.fairness import FairnessCriterion, fairness_moment
from faircate.inference import bootstrap_beta
from faircate.learners import LearnerSpec
from faircate.moments import dr_moments, influence_values
from faircate.nuisance import fit_cross_fitted

from conftest import make_dataset

RIDGE = LearnerSpec(kind="polynomial-ridge", degree=2, penalty=1e-3)


def fit_pieces(data, basis_spec=BasisSpec(degree=2),
               outcome=RIDGE, propensity=RIDGE, criteria=()):
    nuis = fit_cross_fitted(data, outcome, propensity)
    basis = expand(data, basis_spec)
    iv = influence_values(data, nuis)
    moment = dr_moments(iv, basis)
    fms = tuple(fairness_moment(c, data, basis, fit=nuis, iv=iv) for c in criteria)
    return nuis, basis, moment, fms


class TestBootstrap:
    def test_min_replicates_enforced(self, random_dataset):
        nuis, basis, moment, fms = fit_pieces(random_dataset)
        with pytest.raises(ParameterError, match="200"):
            bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                           n_replicates=50, seed=0)

    def test_same_seed_identical_cis(self, random_dataset):
        nuis, basis, moment, fms = fit_pieces(
            random_dataset, criteria=(FairnessCriterion.independence(0.5),))
        a = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                           n_replicates=200, seed=7)
        b = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                           n_replicates=200, seed=7)
        np.testing.assert_array_equal(a.ci_lower, b.ci_lower)
        np.testing.assert_array_equal(a.ci_upper, b.ci_upper)

    def test_methods_differ_but_agree_roughly(self, random_dataset):
        nuis, basis, moment, fms = fit_pieces(random_dataset)
        mult = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                              n_replicates=400, method="multiplier", seed=3)
        pairs = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                               n_replicates=400, method="pairs", seed=3)
        sd_m = mult.replicates.std(axis=0)
        sd_p = pairs.replicates.std(axis=0)
        assert np.all(sd_m > 0) and np.all(sd_p > 0)
        ratio = sd_m / sd_p
        assert np.all(ratio > 0.5) and np.all(ratio < 2.0)

    @pytest.mark.filterwarnings("ignore:Gram matrix min eigenvalue")
    def test_degenerate_sample_zero_width_under_pairs(self):
        n = 24
        data = make_dataset(np.full(n, 2.0), np.resize([0, 1], n),
                            np.resize([0, 1], n), np.ones((n, 1)),
                            fold=np.resize([1, 1, 2, 2], n))
        const = LearnerSpec(kind="constant")
        nuis, basis, moment, fms = fit_pieces(
            data, basis_spec=BasisSpec(degree=1, standardize=False,
                                       variables=("x1",)),
            outcome=const, propensity=LearnerSpec(kind="constant", value=0.5))
        result = bootstrap_beta(data, nuis, basis, moment, fms,
                                n_replicates=200, method="pairs", seed=1)
        np.testing.assert_allclose(result.ci_upper - result.ci_lower, 0.0,
                                   atol=1e-12)

    def test_point_estimate_inside_percentile_band(self, random_dataset):
        nuis, basis, moment, fms = fit_pieces(random_dataset)
        result = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                                n_replicates=400, seed=5)
        assert np.all(result.ci_lower <= result.point_estimate + 1e-9)
        assert np.all(result.point_estimate <= result.ci_upper + 1e-9)

    def test_replicate_sd_matches_classical_se_intercept_only(self):
        sample = synth.generate(2000, seed=17)
        data = assign_folds(sample.dataset, 2, seed=4)
        nuis = fit_cross_fitted(data, synth.oracle_outcome_spec(),
                                synth.oracle_propensity_spec())
        basis = expand(data, BasisSpec(degree=1, standardize=False,
                                       variables=("x1",)))
        # keep only the intercept column
        from dataclasses import replace
        basis = replace(basis, values=basis.values[:, :1],
                        gram=np.array([[1.0]]), term_labels=("1",),
                        exponents=basis.exponents[:1])
        iv = influence_values(data, nuis)
        moment = dr_moments(iv, basis)
        result = bootstrap_beta(data, nuis, basis, moment, (),
                                n_replicates=600, seed=9)
        classical = iv.contrast.std(ddof=1) / np.sqrt(data.n)
        replicate_sd = result.replicates[:, 0].std(ddof=1)
        assert abs(replicate_sd - classical) / classical < 0.15

    def test_constrained_bootstrap_respects_constraint(self, random_dataset):
        crit = FairnessCriterion.independence(delta=0.0)
        nuis, basis, moment, fms = fit_pieces(random_dataset, criteria=(crit,))
        result = bootstrap_beta(random_dataset, nuis, basis, moment, fms,
                                n_replicates=200, seed=11)
        assert result.replicates.shape[0] >= 190
        assert result.n_dropped <= 10
