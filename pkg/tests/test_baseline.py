"""Non-speculative gap formulas against their Monte Carlo oracles."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkspec import (
    ConstantDetection,
    DomainError,
    EstimateSource,
    Exponential,
    ImprovingDetection,
    LevyComponent,
    MeasurementError,
    ParameterError,
    RiskEstimate,
    StaggeredPanel,
    bias_nospec,
    delta_benefit,
    improvement_curve,
    staggered_frequency,
    variance_gap,
    variance_gap_with_error,
)
from darkspec.oracles import bias_thinning_mc, staggered_frequency_mc, variance_gap_mc


def imagined(cid, lam, xi, s2=0.0):
    return RiskEstimate(
        component_id=cid,
        lambda_hat=lam,
        xi_hat=xi,
        severity_variance=s2,
        window=1.0,
        n_events=0,
        source=EstimateSource.UNDERWRITING,
        round=1,
    )


class TestProfiles:
    def test_constant_rejects_out_of_range(self):
        with pytest.raises(ParameterError):
            ConstantDetection((0.5, 1.2))
        with pytest.raises(ParameterError):
            ConstantDetection((-0.1,))

    def test_improving_rejects_bad_ordering(self):
        with pytest.raises(ParameterError):
            ImprovingDetection(pi_1=0.8, pi_max=0.5, psi=1.0)
        with pytest.raises(ParameterError):
            ImprovingDetection(pi_1=0.2, pi_max=0.8, psi=0.0)

    @given(
        st.floats(0.05, 0.4),
        st.floats(0.5, 0.95),
        st.floats(0.05, 3.0),
        st.integers(1, 40),
    )
    @settings(max_examples=200, deadline=None)
    def test_improvement_curve_bounds_and_monotonicity(self, pi_1, pi_max, psi, r):
        profile = ImprovingDetection(pi_1=pi_1, pi_max=pi_max, psi=psi)
        value = improvement_curve(r, profile)
        # never exceeds pi_max, never goes below the round-one level
        assert pi_max - pi_1 <= value <= pi_max
        assert improvement_curve(r + 1, profile) >= value


class TestBias:
    def test_full_detection_is_unbiased(self):
        ests = [imagined("a", 1.0, 2.0), imagined("b", 3.0, 4.0)]
        assert bias_nospec(ests, ConstantDetection((1.0, 1.0))) == 0.0

    def test_single_risk_substitution(self):
        assert bias_nospec(
            [imagined("a", 2.0, 10.0)], ConstantDetection((0.5,))
        ) == pytest.approx(-10.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            bias_nospec([imagined("a", 1.0, 1.0)], ConstantDetection((0.5, 0.5)))

    def test_thinning_oracle_matches_formula(self):
        ests = [imagined("a", 2.0, 3.0), imagined("b", 1.0, 5.0)]
        profile = ConstantDetection((0.3, 0.7))
        formula = bias_nospec(ests, profile)
        mc = bias_thinning_mc([6.0, 5.0], profile.pis, reps=10_000, seed=5)
        assert abs(mc.value - formula) <= 3.0 * mc.se + 1e-12


class TestVarianceGap:
    def test_full_detection_gap_is_zero(self):
        ests = [imagined("a", 1.0, 2.0, s2=4.0)]
        assert variance_gap(ests, [4.0], ConstantDetection((1.0,))) == 0.0

    def test_substitution(self):
        ests = [imagined("a", 1.0, 2.0, s2=4.0)]
        assert variance_gap(ests, [4.0], ConstantDetection((0.0,))) == pytest.approx(-8.0)

    def test_event_thinning_oracle_matches_formula(self):
        lam, mean = 2.0, 3.0
        ests = [imagined("a", lam, mean, s2=mean**2)]
        profile = ConstantDetection((0.5,))
        formula = variance_gap(ests, [mean**2], profile)
        mc = variance_gap_mc(
            [lam], [Exponential.from_mean(mean)], profile.pis, 1.0, 20_000, seed=11
        )
        assert mc.var_gap == pytest.approx(formula, rel=0.05)

    def test_gap_nonpositive_and_zero_only_at_full_detection(self):
        ests = [imagined("a", 2.0, 3.0, s2=1.0)]
        for pi in (0.0, 0.3, 0.9):
            assert variance_gap(ests, [1.0], ConstantDetection((pi,))) < 0.0
        assert variance_gap(ests, [1.0], ConstantDetection((1.0,))) == 0.0

    @given(
        st.lists(
            st.tuples(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.0, 1.0)),
            min_size=1, max_size=5,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_both_gaps_nonpositive_zero_iff_full_detection(self, rows):
        # with positive rates and means, both gaps are <= 0 for pi <= 1 and
        # exactly 0 only when every component is fully detected
        ests = [imagined(f"c{i}", lam, xi, s2=1.0) for i, (lam, xi, _) in enumerate(rows)]
        pis = tuple(pi for _, _, pi in rows)
        profile = ConstantDetection(pis)
        bias = bias_nospec(ests, profile)
        gap = variance_gap(ests, [1.0] * len(rows), profile)
        assert bias <= 0.0 and gap <= 0.0
        if all(pi == 1.0 for pi in pis):
            assert bias == 0.0 and gap == 0.0
        if bias == 0.0 and gap == 0.0:
            assert all(pi == 1.0 for pi in pis)


class TestVarianceGapWithError:
    def test_zero_noise_reduces_to_plain_gap(self):
        ests = [imagined("a", 2.0, 3.0, s2=9.0)]
        profile = ConstantDetection((0.4,))
        plain = variance_gap(ests, [9.0], profile)
        with_err = variance_gap_with_error(
            ests, [9.0], profile, MeasurementError((0.0,))
        )
        assert with_err == plain

    def test_only_error_term_survives_full_detection(self):
        ests = [imagined("a", 2.0, 5.0, s2=9.0)]
        value = variance_gap_with_error(
            ests, [9.0], ConstantDetection((1.0,)), MeasurementError((math.sqrt(3.0),))
        )
        assert value == pytest.approx(-6.0)

    def test_noise_inflation_oracle(self):
        # degenerate severity far from zero keeps truncation negligible, so
        # the inflation should equal rate * sigma_eps^2 per unit window
        lam, sigma = 1.0, 2.0
        from darkspec import Degenerate

        mc = variance_gap_mc(
            [lam], [Degenerate(5 * sigma)], [1.0], 1.0, 400_000, seed=3,
            sigma_eps=[sigma],
        )
        assert mc.inflation == pytest.approx(lam * sigma**2, rel=0.05)
        assert abs(mc.truncation_bias) < 0.01


class TestImprovementCurve:
    def test_round_one_is_offset_start(self):
        profile = ImprovingDetection(pi_1=0.3, pi_max=0.8, psi=0.5)
        assert improvement_curve(1, profile) == pytest.approx(0.5)

    def test_large_psi_saturates_by_round_two(self):
        profile = ImprovingDetection(pi_1=0.3, pi_max=0.8, psi=50.0)
        assert improvement_curve(2, profile) == pytest.approx(0.8, abs=1e-12)

    def test_frozen_scalar_value(self):
        # 0.8 - exp(-1) * 0.3, evaluated independently
        profile = ImprovingDetection(pi_1=0.3, pi_max=0.8, psi=0.5)
        assert improvement_curve(3, profile) == pytest.approx(
            0.6896361676485673, abs=1e-12
        )

    def test_round_below_one_rejected(self):
        with pytest.raises(DomainError):
            improvement_curve(0, ImprovingDetection(0.3, 0.8, 0.5))


class TestDeltaBenefit:
    def test_round_one_substitution(self):
        profile = ImprovingDetection(pi_1=0.25, pi_max=0.75, psi=1.0)
        value = delta_benefit(1, profile, lambda_hat=2.0, xi_hat=3.0, expected_duration=2.0)
        assert value == pytest.approx((1.0 - 0.5) * 6.0 / 2.0)

    def test_perfect_eventual_detection_vanishes(self):
        # as pi_max -> 1 with large psi and late rounds, the advantage -> 0
        values = [
            delta_benefit(30, ImprovingDetection(0.01, pi_max, 5.0), 2.0, 10.0, 1.0)
            for pi_max in (0.99, 0.999, 0.9999, 1.0 - 1e-9)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-7

    def test_frozen_scalar_value(self):
        # (1 - (0.8 - 0.3 * exp(-0.5))) * 20 / 4
        profile = ImprovingDetection(pi_1=0.3, pi_max=0.8, psi=0.5)
        value = delta_benefit(2, profile, lambda_hat=2.0, xi_hat=10.0, expected_duration=4.0)
        assert value == pytest.approx(1.9097959895689501, abs=1e-12)

    def test_bad_duration_rejected(self):
        with pytest.raises(DomainError):
            delta_benefit(1, ImprovingDetection(0.3, 0.8, 0.5), 1.0, 1.0, 0.0)

    def test_strictly_decreasing_in_round_and_psi(self):
        for psi in (0.1, 0.5, 2.0):
            profile = ImprovingDetection(pi_1=0.3, pi_max=0.8, psi=psi)
            values = [delta_benefit(r, profile, 2.0, 5.0, 1.0) for r in range(1, 11)]
            assert all(a > b for a, b in zip(values, values[1:]))
        # psi-monotonicity holds from round 2 on; at round 1 the curve is
        # psi-invariant since exp(0) = 1
        for r in range(2, 11):
            by_psi = [
                delta_benefit(r, ImprovingDetection(0.3, 0.8, psi), 2.0, 5.0, 1.0)
                for psi in (0.1, 0.5, 2.0)
            ]
            assert by_psi[0] > by_psi[1] > by_psi[2]

    def test_strictly_decreasing_in_pi_max(self):
        values = [
            delta_benefit(3, ImprovingDetection(0.2, pi_max, 0.5), 2.0, 5.0, 1.0)
            for pi_max in (0.4, 0.6, 0.8, 0.95)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_direction_in_pi_1_offset(self):
        # raising pi_1 lowers the analyst's detection at every round, so the
        # benefit of speculating rises; equivalently the benefit falls in the
        # round-one detection level pi_max - pi_1
        values = [
            delta_benefit(3, ImprovingDetection(pi_1, 0.8, 0.5), 2.0, 5.0, 1.0)
            for pi_1 in (0.1, 0.3, 0.5, 0.7)
        ]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestStaggered:
    def test_single_component_reduces_to_ratio(self):
        panel = StaggeredPanel(
            commencements=(0.0,), horizon=4.0, event_counts=(8,),
            jump_sizes=((1.0,) * 8,),
        )
        assert staggered_frequency(panel) == pytest.approx(2.0)

    def test_two_component_arithmetic(self):
        # durations (3, 1) with counts (3, 2): 3/3 + 2/1 = 3.0
        panel = StaggeredPanel(
            commencements=(0.0, 2.0), horizon=3.0, event_counts=(3, 2),
            jump_sizes=((1.0, 1.0, 1.0), (1.0, 1.0)),
        )
        assert staggered_frequency(panel) == pytest.approx(3.0)

    def test_ordering_invariants_enforced(self):
        with pytest.raises(DomainError):
            StaggeredPanel((1.0,), 4.0, (0,), ((),))  # first start must be 0
        with pytest.raises(DomainError):
            StaggeredPanel((0.0, 0.0), 4.0, (0, 0), ((), ()))  # strict ordering
        with pytest.raises(DomainError):
            StaggeredPanel((0.0, 5.0), 4.0, (0, 0), ((), ()))  # inside horizon

    def test_monte_carlo_recovers_summed_rates(self):
        rates = [0.5, 1.0, 1.5, 2.0, 0.25]
        mc = staggered_frequency_mc(rates, horizon=20.0, reps=5_000, seed=99)
        assert abs(mc.value - sum(rates)) <= 3.0 * mc.se


class TestMeasurementErrorType:
    def test_negative_sigma_rejected(self):
        with pytest.raises(ParameterError):
            MeasurementError((-0.1,))
