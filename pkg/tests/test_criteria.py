"""Closed-form impurities, risk reduction, optimal predictions, margin losses."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_trees.criteria import (
    CdfSpec,
    ClassHistogram,
    CriterionSpec,
    counts_impurity,
    distribution_loss,
    impurity,
    lambda_from_mu,
    mu_from_lambda,
    optimal_constant_prediction,
    risk_reduction,
    twoing_score,
)
from robust_trees.errors import EmptyHistogramError, PartitionError


def hist(*counts):
    return ClassHistogram(np.array(counts))


counts_vectors = st.lists(st.integers(0, 20), min_size=2, max_size=5).filter(
    lambda c: sum(c) > 0
)

ALL_SPECS = [
    CriterionSpec("gini"),
    CriterionSpec("entropy"),
    CriterionSpec("misclassification"),
    CriterionSpec("mae"),
    CriterionSpec("gce", q=0.0),
    CriterionSpec("gce", q=0.5),
    CriterionSpec("gce", q=1.0),
    CriterionSpec("gce", q=2.0),
    CriterionSpec("ne", lam=0.25),
    CriterionSpec("ne", lam=1.0),
]


class TestImpurityValues:
    def test_gini_symmetric_binary(self):
        out = impurity(CriterionSpec("gini"), hist(5, 5), 10)
        assert out.value == 0.5
        assert out.weight == 1.0

    def test_misclassification_definition(self):
        assert impurity(CriterionSpec("misclassification"), hist(3, 1), 4).value == 0.25

    def test_ne_interior_band(self):
        # min{0.3, 0.5 * sqrt((1 - 0.58) / 2)}; frozen from the scalar-risk oracle
        out = impurity(CriterionSpec("ne", lam=0.5), hist(7, 3), 10)
        assert out.value == pytest.approx(0.22912878474779202, abs=1e-15)

    def test_gce_half_norm(self):
        # (1 - sqrt(0.5)) / 0.5 = 2 - sqrt(2); frozen from the simplex-grid oracle
        out = impurity(CriterionSpec("gce", q=0.5), hist(5, 5), 10)
        assert out.value == pytest.approx(0.5857864376269049, abs=1e-15)

    def test_pure_node_is_zero(self):
        value = impurity(CriterionSpec("entropy"), hist(4, 0), 4).value
        assert value == 0.0 and math.copysign(1.0, value) == 1.0

    def test_weight_is_node_share(self):
        out = impurity(CriterionSpec("gini"), hist(2, 2), 16)
        assert out.weight == 0.25
        assert out.value == 0.25 * 0.5

    def test_empty_histogram_rejected(self):
        with pytest.raises(EmptyHistogramError):
            impurity(CriterionSpec("gini"), hist(0, 0), 4)

    def test_dataset_size_smaller_than_node_rejected(self):
        with pytest.raises(ValueError):
            impurity(CriterionSpec("gini"), hist(3, 3), 4)

    def test_twoing_has_no_node_impurity(self):
        with pytest.raises(ValueError):
            impurity(CriterionSpec("twoing"), hist(1, 1), 2)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(kind="gce", q=-0.5), dict(kind="ne", lam=-0.1), dict(kind="ne", lam=1.5),
         dict(kind="gce"), dict(kind="ne"), dict(kind="bogus"),
         dict(kind="gini", q=1.0), dict(kind="entropy", lam=0.5)],
    )
    def test_bad_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            CriterionSpec(**kwargs)


class TestRiskReduction:
    def test_perfect_split_removes_all_impurity(self):
        rr = risk_reduction(CriterionSpec("gini"), hist(4, 4), hist(4, 0), hist(0, 4), 8)
        assert rr == 0.5

    def test_misclassification_equality_case_is_exact_zero(self):
        rr = risk_reduction(
            CriterionSpec("misclassification"), hist(4, 2), hist(3, 1), hist(1, 1), 6
        )
        assert rr == 0.0

    def test_entropy_still_gains_on_same_split(self):
        rr = risk_reduction(CriterionSpec("entropy"), hist(4, 2), hist(3, 1), hist(1, 1), 6)
        assert rr == pytest.approx(0.030575011695625515, abs=1e-15)
        assert rr > 0

    def test_children_must_partition_parent(self):
        with pytest.raises(PartitionError):
            risk_reduction(CriterionSpec("gini"), hist(4, 2), hist(3, 1), hist(2, 1), 6)

    def test_empty_child_rejected(self):
        with pytest.raises(EmptyHistogramError):
            risk_reduction(CriterionSpec("gini"), hist(4, 2), hist(4, 2), hist(0, 0), 6)

    @given(
        counts=counts_vectors,
        fracs=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=5),
        spec=st.sampled_from(ALL_SPECS + [CriterionSpec("ne", lam=0.0)]),
    )
    def test_nonnegative_for_every_criterion(self, counts, fracs, spec):
        parent = np.array(counts)
        fracs = (fracs * 3)[: len(counts)]
        left = np.minimum(parent, np.round(np.array(fracs) * parent)).astype(np.int64)
        right = parent - left
        if left.sum() == 0 or right.sum() == 0:
            return
        rr = risk_reduction(
            spec, ClassHistogram(parent), ClassHistogram(left), ClassHistogram(right),
            int(parent.sum()),
        )
        assert rr >= -1e-12


class TestTwoing:
    def test_zero_iff_equal_distributions(self):
        assert twoing_score(hist(2, 2), hist(4, 4), 12) == 0.0
        assert twoing_score(hist(4, 0), hist(0, 4), 8) == pytest.approx(0.25)

    def test_matches_closed_form(self):
        # (W_L W_R / 4) (sum |p_L - p_R|)^2 with W_L = 0.5, W_R = 0.5
        got = twoing_score(hist(3, 1), hist(1, 3), 8)
        assert got == pytest.approx(0.25 * 0.25 * 1.0 * 1.0)


class TestOptimalPrediction:
    def test_conservative_returns_one_hot(self):
        assert np.array_equal(
            optimal_constant_prediction(CriterionSpec("misclassification"), hist(7, 3)),
            [1.0, 0.0],
        )

    def test_entropy_returns_p(self):
        assert np.allclose(
            optimal_constant_prediction(CriterionSpec("entropy"), hist(7, 3)), [0.7, 0.3]
        )

    def test_gce_power_normalization(self):
        got = optimal_constant_prediction(CriterionSpec("gce", q=0.5), hist(8, 2))
        assert np.allclose(got, [0.64 / 0.68, 0.04 / 0.68], atol=1e-12)

    def test_argmax_tie_takes_lowest_index(self):
        got = optimal_constant_prediction(CriterionSpec("mae"), hist(3, 3, 1))
        assert np.array_equal(got, [1.0, 0.0, 0.0])

    def test_empty_histogram_rejected(self):
        with pytest.raises(EmptyHistogramError):
            optimal_constant_prediction(CriterionSpec("gini"), hist(0, 0))


class TestInvariants:
    @given(counts=counts_vectors, spec=st.sampled_from(ALL_SPECS))
    def test_permutation_symmetry(self, counts, spec):
        base = impurity(spec, ClassHistogram(np.array(counts)), sum(counts)).value
        rng = np.random.default_rng(sum(counts))
        perm = rng.permutation(len(counts))
        permuted = impurity(
            spec, ClassHistogram(np.array(counts)[perm]), sum(counts)
        ).value
        assert permuted == pytest.approx(base, abs=1e-12)

    @given(counts=counts_vectors, spec=st.sampled_from(ALL_SPECS))
    def test_purity_zero_iff_single_class(self, counts, spec):
        value = impurity(spec, ClassHistogram(np.array(counts)), sum(counts)).value
        if np.count_nonzero(counts) == 1:
            assert value == pytest.approx(0.0, abs=1e-15)
        else:
            assert value > 0.0

    @given(counts=counts_vectors)
    def test_conservative_identity_exact(self, counts):
        h = ClassHistogram(np.array(counts))
        total = h.total
        reference = (total / total) * (1.0 - h.counts.max() / total)
        assert impurity(CriterionSpec("misclassification"), h, total).value == reference
        assert impurity(CriterionSpec("mae"), h, total).value == 2.0 * reference
        assert impurity(CriterionSpec("gce", q=1.0), h, total).value == reference
        assert impurity(CriterionSpec("gce", q=2.0), h, total).value == reference / 2.0

    @given(counts=st.lists(st.integers(0, 20), min_size=2, max_size=2).filter(
        lambda c: sum(c) > 0))
    def test_ne_lambda_one_equals_misclassification_in_binary(self, counts):
        h = ClassHistogram(np.array(counts))
        ne = impurity(CriterionSpec("ne", lam=1.0), h, h.total).value
        mis = impurity(CriterionSpec("misclassification"), h, h.total).value
        assert ne == pytest.approx(mis, abs=1e-12)

    @pytest.mark.parametrize("counts", [(2, 8), (3, 7), (5, 5), (4, 6), (8, 2)])
    def test_ne_small_lambda_is_scaled_root_gini(self, counts):
        # p in [0.2, 0.8]: the sqrt branch of the min is active for tiny lambda
        h = hist(*counts)
        lam = 0.01
        p = h.probabilities()
        expected = lam * math.sqrt((1.0 - float(np.square(p).sum())) / 2.0)
        assert impurity(CriterionSpec("ne", lam=lam), h, h.total).value == expected

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_multiclass_ne_branches_coincide_at_uniform_for_lambda_one(self, k):
        p = np.full(k, 1.0 / k)
        mis_branch = 1.0 - p.max()
        root_branch = math.sqrt((1.0 - float(np.square(p).sum())) * (k - 1) / k)
        assert mis_branch == pytest.approx(root_branch, abs=1e-12)
        assert mis_branch == pytest.approx((k - 1) / k, abs=1e-12)

    def test_ne_lambda_zero_limit_ranks_by_root_gini(self):
        spec = CriterionSpec("ne", lam=0.0)
        p = hist(6, 4)
        expected = math.sqrt((1.0 - (0.6 ** 2 + 0.4 ** 2)) / 2.0)
        assert impurity(spec, p, 10).value == pytest.approx(expected, abs=1e-15)
        assert impurity(spec, hist(5, 0), 5).value == 0.0

    @given(
        spec=st.sampled_from(
            [CriterionSpec("gini"), CriterionSpec("entropy"), CriterionSpec("gce", q=0.5)]
        ),
        a=counts_vectors,
        alpha=st.floats(0.01, 0.99),
        data=st.data(),
    )
    def test_concavity_on_sampled_mixtures(self, spec, a, alpha, data):
        b = data.draw(
            st.lists(st.integers(0, 20), min_size=len(a), max_size=len(a)).filter(
                lambda c: sum(c) > 0
            )
        )
        p1 = np.array(a) / sum(a)
        p2 = np.array(b) / sum(b)
        mix = alpha * p1 + (1 - alpha) * p2
        lhs = float(counts_impurity(spec, mix))
        rhs = alpha * float(counts_impurity(spec, p1)) + (1 - alpha) * float(
            counts_impurity(spec, p2)
        )
        assert lhs >= rhs - 1e-12


class TestDistributionLosses:
    def test_logistic_midpoint(self):
        assert distribution_loss(CdfSpec("logistic"), 0.0) == 0.5

    def test_ramp_saturates(self):
        assert distribution_loss(CdfSpec("uniform"), 3.0) == 0.0
        assert distribution_loss(CdfSpec("uniform"), -3.0) == 1.0
        assert distribution_loss(CdfSpec("uniform"), 0.0) == 0.5

    def test_negexp_capped_at_one(self):
        for mu in (0.0, 0.5, 2.0):
            assert distribution_loss(CdfSpec("shifted_negexp", mu=mu), -10.0) == 1.0
        # cap applies before exponentiation, so huge negative margins are safe
        assert distribution_loss(CdfSpec("shifted_negexp", mu=1.0), -1e9) == 1.0

    def test_negexp_at_zero_margin(self):
        loss = distribution_loss(CdfSpec("shifted_negexp", mu=math.log(2.0)), 0.0)
        assert loss == pytest.approx(0.5, abs=1e-15)

    def test_bernoulli_is_01_loss(self):
        assert distribution_loss(CdfSpec("bernoulli"), 1.0) == 0.0
        assert distribution_loss(CdfSpec("bernoulli"), -1.0) == 1.0
        assert distribution_loss(CdfSpec("bernoulli"), 0.0) == 0.5

    @given(
        cdf=st.sampled_from(
            [CdfSpec("bernoulli"), CdfSpec("logistic"), CdfSpec("uniform"),
             CdfSpec("shifted_negexp", mu=0.7)]
        ),
        z1=st.floats(-50, 50),
        z2=st.floats(-50, 50),
    )
    def test_losses_bounded_and_non_increasing(self, cdf, z1, z2):
        lo, hi = sorted((z1, z2))
        l_lo, l_hi = distribution_loss(cdf, lo), distribution_loss(cdf, hi)
        assert 0.0 <= l_hi <= l_lo <= 1.0


class TestLambdaMuMap:
    def test_endpoints(self):
        assert lambda_from_mu(math.log(2.0)) == pytest.approx(1.0, abs=1e-15)
        assert mu_from_lambda(1.0) == pytest.approx(math.log(2.0), abs=1e-15)
        assert lambda_from_mu(2.0) == pytest.approx(0.2706705664732254, abs=1e-15)

    @given(st.floats(1e-6, 1.0))
    def test_round_trip(self, lam):
        assert lambda_from_mu(mu_from_lambda(lam)) == pytest.approx(lam, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            mu_from_lambda(0.0)
        with pytest.raises(ValueError):
            mu_from_lambda(1.5)
        with pytest.raises(ValueError):
            lambda_from_mu(-0.1)
