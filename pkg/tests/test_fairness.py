import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircate import synth
from faircate.basis import BasisSpec, expand
from faircate.dataset import assign_folds
from faircate.errors import (DegenerateGroupError, DegenerateStratumError,
                             EvaluationError, ParameterError)
from faircate.fairness import (BinnedFactor, FairnessCriterion, fairness_moment,
                               policy_unfairness, uf_conditional_parity,
                               uf_counterfactual_smooth, uf_independence,
                               uf_positive_balance)
from faircate.moments import InfluenceValues, dr_moments, influence_values
from faircate.nuisance import fit_cross_fitted

from conftest import make_dataset
from test_moments import make_fit


def x_basis(data):
    """Single-column basis equal to the raw covariate (no intercept)."""
    return expand(data, BasisSpec(degree=1, standardize=False, variables=("x1",),
                                  include_intercept=False))


def intercept_only(data):
    rows = np.ones((data.n, 1))
    basis = expand(data, BasisSpec(degree=1, standardize=False, variables=("x1",)))
    return basis  # columns [1, x1]; index 0 is the intercept


class TestIndependence:
    def test_balanced_intercept_is_zero(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0], [1.0], [1.0], [1.0]])
        fm = uf_independence(data, intercept_only(data))
        assert fm.a[0] == pytest.approx(0.0, abs=1e-12)

    def test_group_mean_difference(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0], [3.0], [2.0], [4.0]])
        fm = uf_independence(data, x_basis(data))
        assert fm.a[0] == pytest.approx(-1.0)

    def test_self_normalization_unbalanced(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 1, 1, 1],
                            [[1.0]] * 4)
        fm = uf_independence(data, intercept_only(data))
        assert abs(fm.a[0]) < 1e-10
        assert abs(fm.per_record_uf.mean()) < 1e-10

    def test_single_group_rejected(self):
        data = make_dataset([0.0] * 3, [0, 1, 0], [1, 1, 1], [[1.0]] * 3)
        with pytest.raises(DegenerateGroupError):
            uf_independence(data, intercept_only(data))

    @given(seed=st.integers(0, 400))
    @settings(max_examples=25, deadline=None)
    def test_matches_two_pass_group_means(self, seed):
        rng = np.random.default_rng(seed)
        n = 40
        s = rng.integers(0, 2, n)
        if s.min() == s.max():
            return
        data = make_dataset(np.zeros(n), np.resize([0, 1], n), s,
                            rng.normal(size=(n, 2)))
        basis = expand(data, BasisSpec(degree=2))
        fm = uf_independence(data, basis)
        direct = (basis.values[s == 0].mean(axis=0)
                  - basis.values[s == 1].mean(axis=0))
        np.testing.assert_allclose(fm.a, direct, rtol=0, atol=1e-12)


class TestConditionalParity:
    def test_constant_factor_reduces_to_independence(self):
        rng = np.random.default_rng(1)
        n = 30
        data = make_dataset(np.zeros(n), np.resize([0, 1], n),
                            rng.integers(0, 2, n), rng.normal(size=(n, 2)))
        basis = expand(data, BasisSpec(degree=2))
        crit = FairnessCriterion.conditional_parity(lambda x: np.zeros(x.shape[0]),
                                                    level=0.0)
        fm = uf_conditional_parity(data, basis, crit)
        ind = uf_independence(data, basis)
        np.testing.assert_array_equal(fm.a, ind.a)

    def test_single_group_stratum_errors(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0], [2.0], [3.0], [4.0]])
        crit = FairnessCriterion.conditional_parity(
            lambda x: (x[:, 0] > 2.5).astype(int), level=1)
        with pytest.raises(DegenerateStratumError, match="S=0"):
            uf_conditional_parity(data, x_basis(data), crit)

    def test_hand_stratum_means(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[5.0], [9.0], [7.0], [9.0]])
        hits = np.array([1, 0, 1, 0])
        crit = FairnessCriterion.conditional_parity(
            lambda x, h=hits: h, level=1)
        fm = uf_conditional_parity(data, x_basis(data), crit)
        assert fm.a[0] == pytest.approx(-2.0)

    def test_binned_factor_helper(self):
        factor = BinnedFactor(column_index=0, cuts=(0.0,))
        x = np.array([[-1.0, 5.0], [2.0, 5.0]])
        np.testing.assert_array_equal(factor(x), [0, 1])


class TestPositiveBalance:
    def test_hand_weights(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0], [1.0], [1.0], [1.0]], fold=[1, 2, 1, 2])
        fit = make_fit(data, mu0=np.zeros(4), mu1=np.array([1.0, -1.0, 1.0, -1.0]),
                       pi1=np.full(4, 0.5))
        fm = uf_positive_balance(data, intercept_only(data), fit)
        np.testing.assert_allclose(fm.per_record_uf, [4.0, 0.0, -4.0, 0.0])
        assert fm.a[0] == pytest.approx(0.0, abs=1e-12)

    def test_no_responders_errors(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0]] * 4, fold=[1, 2, 1, 2])
        fit = make_fit(data, mu0=np.zeros(4), mu1=-np.ones(4), pi1=np.full(4, 0.5))
        with pytest.raises(DegenerateGroupError, match="no estimated responders"):
            uf_positive_balance(data, intercept_only(data), fit)

    def test_oracle_indicator_matches_truth(self):
        sample = synth.generate(600, seed=5)
        data = assign_folds(sample.dataset, 2, seed=3)
        fit = fit_cross_fitted(data, synth.oracle_outcome_spec(),
                               synth.oracle_propensity_spec())
        basis = expand(data, BasisSpec(degree=2))
        fm = uf_positive_balance(data, basis, fit)
        np.testing.assert_array_equal(np.asarray(fm.diagnostics["indicator"]),
                                      data.x[:, 1] > 0)

    def test_tie_falls_outside_positive_class(self):
        data = make_dataset([0.0] * 4, [0, 1, 0, 1], [0, 0, 1, 1],
                            [[1.0]] * 4, fold=[1, 2, 1, 2])
        fit = make_fit(data, mu0=np.zeros(4), mu1=np.array([0.0, 1.0, 0.0, 1.0]),
                       pi1=np.full(4, 0.5))
        fm = uf_positive_balance(data, intercept_only(data), fit)
        assert not np.asarray(fm.diagnostics["indicator"])[0]


class TestCounterfactualSmooth:
    def test_zero_function(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        iv = InfluenceValues(phi0=np.zeros(random_dataset.n),
                             phi1=np.ones(random_dataset.n))
        crit = FairnessCriterion.counterfactual_smooth(
            lambda p0, p1, w: np.zeros(p0.shape[0]))
        fm = uf_counterfactual_smooth(random_dataset, basis, iv, crit)
        np.testing.assert_array_equal(fm.a, np.zeros(basis.k))

    def test_unit_weight_gives_column_means(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        iv = InfluenceValues(phi0=np.zeros(random_dataset.n),
                             phi1=np.ones(random_dataset.n))
        crit = FairnessCriterion.counterfactual_smooth(
            lambda p0, p1, w: np.ones(p0.shape[0]))
        fm = uf_counterfactual_smooth(random_dataset, basis, iv, crit)
        np.testing.assert_allclose(fm.a, basis.values.mean(axis=0), atol=1e-15)

    def test_contrast_handle_equals_dr_moments(self):
        sample = synth.generate(200, seed=8)
        data = assign_folds(sample.dataset, 2, seed=1)
        fit = fit_cross_fitted(data, synth.oracle_outcome_spec(),
                               synth.oracle_propensity_spec())
        basis = expand(data, BasisSpec(degree=2))
        iv = influence_values(data, fit)
        crit = FairnessCriterion.counterfactual_smooth(lambda p0, p1, w: p1 - p0)
        fm = uf_counterfactual_smooth(data, basis, iv, crit)
        np.testing.assert_array_equal(fm.a, dr_moments(iv, basis).c)

    def test_non_finite_output_names_record(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        iv = InfluenceValues(phi0=np.zeros(random_dataset.n),
                             phi1=np.ones(random_dataset.n))

        def bad(p0, p1, w):
            out = np.ones(p0.shape[0])
            out[3] = np.nan
            return out

        crit = FairnessCriterion.counterfactual_smooth(bad)
        with pytest.raises(EvaluationError, match="3"):
            uf_counterfactual_smooth(random_dataset, basis, iv, crit)


class TestPolicyUnfairness:
    def test_null_policy(self):
        fm_weights = np.array([4.0, 0.0, -4.0, 0.0])
        assert policy_unfairness(np.zeros(4), fm_weights) == 0.0

    def test_treat_all_with_independence_weights(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        fm = uf_independence(random_dataset, basis)
        assert policy_unfairness(np.ones(random_dataset.n), fm) < 1e-10

    def test_hand_value(self):
        assert policy_unfairness(np.array([1, 0, 0, 0]),
                                 np.array([4.0, 0.0, -4.0, 0.0])) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            policy_unfairness(np.ones(3), np.ones(4))


class TestSignFlip:
    """Swapping the sensitive labels negates every fairness moment exactly."""

    @given(seed=st.integers(0, 300))
    @settings(max_examples=20, deadline=None)
    def test_independence_and_positive_balance(self, seed):
        rng = np.random.default_rng(seed)
        n = 24
        s = np.resize([0, 1, 1, 0], n)
        tau_hat = rng.normal(size=n)
        if not ((tau_hat > 0) & (s == 0)).any() or not ((tau_hat > 0) & (s == 1)).any():
            return
        data = make_dataset(np.zeros(n), np.resize([0, 1], n), s,
                            rng.normal(size=(n, 2)), fold=np.resize([1, 2], n))
        swapped = make_dataset(np.zeros(n), data.a, 1 - s, data.x,
                               fold=data.fold)
        basis = expand(data, BasisSpec(degree=2, standardize=False))
        basis_swapped = expand(swapped, BasisSpec(degree=2, standardize=False,
                                                  variables=basis.variable_names))
        fit = make_fit(data, np.zeros(n), tau_hat, np.full(n, 0.5))
        fit_s = make_fit(swapped, np.zeros(n), tau_hat, np.full(n, 0.5))

        # compare on the common covariate columns (the s column flips, so
        # restrict the check to uf itself and covariate-only moments)
        a1 = uf_independence(data, basis).per_record_uf
        a2 = uf_independence(swapped, basis_swapped).per_record_uf
        np.testing.assert_array_equal(a2, -a1)
        p1 = uf_positive_balance(data, basis, fit).per_record_uf
        p2 = uf_positive_balance(swapped, basis_swapped, fit_s).per_record_uf
        np.testing.assert_array_equal(p2, -p1)
        crit = FairnessCriterion.conditional_parity(
            lambda x: (x[:, 0] > 0).astype(int), level=1)
        try:
            c1 = uf_conditional_parity(data, basis, crit).per_record_uf
        except DegenerateStratumError:
            return
        c2 = uf_conditional_parity(swapped, basis_swapped, crit).per_record_uf
        np.testing.assert_array_equal(c2, -c1)


class TestDispatch:
    def test_fairness_moment_keeps_delta(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        crit = FairnessCriterion.independence(delta=0.75)
        fm = fairness_moment(crit, random_dataset, basis)
        assert fm.criterion.delta == 0.75

    def test_positive_balance_requires_fit(self, random_dataset):
        basis = expand(random_dataset, BasisSpec(degree=1))
        with pytest.raises(ParameterError, match="nuisance fit"):
            fairness_moment(FairnessCriterion.positive_balance(), random_dataset,
                            basis)

    def test_invalid_kind(self):
        with pytest.raises(ParameterError):
            FairnessCriterion(kind="parity-of-everything")

    def test_negative_delta(self):
        with pytest.raises(ParameterError):
            FairnessCriterion.independence(delta=-0.1)
