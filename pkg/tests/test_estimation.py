"""Frequency/severity estimators, Wald identity, and PKRE assembly."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkspec import (
    DomainError,
    EstimateSource,
    Exponential,
    LevyComponent,
    NoEventsError,
    RiskEstimate,
    aggregate,
    compute_pkre,
    estimate_frequency,
    estimate_from_observation,
    estimate_severity,
    expected_jump_loss,
    jump_loss_variance,
    sample_path,
    sample_paths,
    derive_seed,
)
from darkspec.estimation import (
    estimate_loss_variance,
    read_estimates_csv,
    write_estimates_csv,
)


def underwritten(cid, lam, xi, s2=0.0, window=1.0, round_index=1):
    return RiskEstimate(
        component_id=cid,
        lambda_hat=lam,
        xi_hat=xi,
        severity_variance=s2,
        window=window,
        n_events=0,
        source=EstimateSource.UNDERWRITING,
        round=round_index,
    )


class TestFrequency:
    def test_zero_events(self):
        est = estimate_frequency(0, 10.0)
        assert est.rate == 0.0
        assert est.variance == 0.0

    def test_direct_ratio(self):
        est = estimate_frequency(10, 5.0)
        assert est.rate == 2.0
        assert est.variance == pytest.approx(0.4)

    def test_bad_window_rejected(self):
        with pytest.raises(DomainError):
            estimate_frequency(1, 0.0)
        with pytest.raises(DomainError):
            estimate_frequency(-1, 1.0)

    def test_simulated_poisson_recovery(self):
        rng = np.random.default_rng(2024)
        n = int(rng.poisson(3.0 * 500.0))
        est = estimate_frequency(n, 500.0)
        assert abs(est.rate - 3.0) <= 3.0 * math.sqrt(3.0 / 500.0)


class TestSeverity:
    def test_constant_sample(self):
        est = estimate_severity([5.0, 5.0, 5.0])
        assert est.mean == 5.0
        assert est.variance == 0.0

    def test_two_point_arithmetic(self):
        est = estimate_severity([2.0, 4.0])
        assert est.mean == 3.0
        assert est.sample_variance == pytest.approx(2.0)
        assert est.variance == pytest.approx(1.0)

    def test_empty_is_an_error_not_zero(self):
        with pytest.raises(NoEventsError):
            estimate_severity([])

    def test_exponential_draws_recover_mean(self):
        draws = np.random.default_rng(7).exponential(2.0, 10_000)
        est = estimate_severity(draws)
        assert abs(est.mean - 2.0) <= 3.0 * (2.0 / 100.0)


class TestExpectedJumpLoss:
    def test_total_over_window(self):
        est = estimate_from_observation("k", [4.0, 6.0, 3.0, 7.0], 10.0)
        assert est.n_events == 4
        assert expected_jump_loss(est) == 2.0

    def test_zero_events_contribute_zero(self):
        est = estimate_from_observation("k", [], 10.0)
        assert est.xi_hat is None
        assert expected_jump_loss(est) == 0.0

    def test_monte_carlo_matches_rate_times_mean(self):
        c = LevyComponent("k", 0.0, 0.0, 2.0, Exponential.from_mean(3.0))
        losses = [
            expected_jump_loss(
                estimate_from_observation(
                    "k", sample_path(c, 200.0, derive_seed(3, "k", i)).jump_sizes, 200.0
                )
            )
            for i in range(400)
        ]
        losses = np.array(losses)
        se = losses.std(ddof=1) / math.sqrt(len(losses))
        assert abs(losses.mean() - 6.0) <= 3.0 * se

    @given(
        st.lists(st.floats(0.0, 100.0), min_size=1, max_size=40),
        st.floats(0.5, 50.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_wald_identity_is_exact(self, sizes, window):
        # rate * mean == total / window must hold exactly, not approximately
        est = estimate_from_observation("k", sizes, window)
        assert expected_jump_loss(est) == float(np.sum(np.asarray(sizes))) / window


class TestJumpLossVariance:
    def test_zero_rate(self):
        assert jump_loss_variance(0.0, 5.0, 2.0, 1.0) == 0.0

    def test_degenerate_severity(self):
        assert jump_loss_variance(1.0, 2.0, 0.0, 1.0) == 4.0

    def test_literal_form_flag(self):
        # default second-moment form vs the published first-power variant
        assert jump_loss_variance(2.0, 3.0, 9.0, 10.0) == pytest.approx(3.6)
        assert jump_loss_variance(2.0, 3.0, 9.0, 10.0, form="literal") == pytest.approx(2.4)
        with pytest.raises(DomainError):
            jump_loss_variance(1.0, 1.0, 1.0, 1.0, form="other")

    def test_bad_window(self):
        with pytest.raises(DomainError):
            jump_loss_variance(1.0, 1.0, 1.0, 0.0)

    def test_variance_of_per_unit_loss_monte_carlo(self):
        # rate 2, Exp mean 3, window 10: predicted 2*(9+9)/10 = 3.6
        c = LevyComponent("k", 0.0, 0.0, 2.0, Exponential.from_mean(3.0))
        per_unit = np.array(
            [float(np.sum(p.jump_sizes)) / 10.0 for p in sample_paths(c, 10.0, 23, 20_000)]
        )
        assert np.var(per_unit, ddof=1) == pytest.approx(3.6, rel=0.05)


class TestRiskEstimateInvariants:
    def test_observed_rate_identity_enforced(self):
        with pytest.raises(ValueError):
            RiskEstimate(
                component_id="k",
                lambda_hat=1.0,
                xi_hat=2.0,
                severity_variance=0.0,
                window=10.0,
                n_events=5,
                source=EstimateSource.OBSERVED_HISTORY,
            )

    def test_zero_event_window_has_no_xi(self):
        with pytest.raises(ValueError):
            RiskEstimate(
                component_id="k",
                lambda_hat=0.0,
                xi_hat=1.0,
                severity_variance=0.0,
                window=10.0,
                n_events=0,
                source=EstimateSource.OBSERVED_HISTORY,
            )

    def test_underwriting_requires_round_and_xi(self):
        with pytest.raises(ValueError):
            RiskEstimate(
                component_id="k",
                lambda_hat=1.0,
                xi_hat=None,
                severity_variance=0.0,
                window=1.0,
                n_events=0,
                source=EstimateSource.UNDERWRITING,
                round=1,
            )
        with pytest.raises(ValueError):
            underwritten("k", 1.0, 2.0, round_index=None)


class TestPkre:
    def test_observed_only_when_imagined_empty(self):
        observed = [estimate_from_observation("a", [2.0, 2.0], 2.0)]
        result = compute_pkre(observed, [], round_index=1)
        assert result.total == result.observed_total
        assert result.imagined_total == 0.0

    def test_two_plus_five(self):
        # 1*2 + 0.5*10; the arithmetic is source-agnostic
        observed = [underwritten("o", 1.0, 2.0)]
        imagined = [underwritten("i", 0.5, 10.0)]
        result = compute_pkre(observed, imagined, round_index=2)
        assert result.total == 7.0
        assert result.round == 2

    def test_duplicate_component_id_rejected(self):
        ests = [underwritten("x", 1.0, 1.0), underwritten("x", 2.0, 1.0)]
        with pytest.raises(DomainError):
            compute_pkre([], ests, 1)

    def test_same_risk_may_appear_in_both_sets(self):
        # a risk can have an observed history and an underwritten estimate;
        # uniqueness holds within each set, not across them
        observed = [estimate_from_observation("x", [2.0, 2.0], 2.0)]
        imagined = [underwritten("x", 0.5, 10.0)]
        result = compute_pkre(observed, imagined, 1)
        assert result.total == pytest.approx(2.0 + 5.0)

    def test_variance_totals_sum_per_component(self):
        imagined = [
            underwritten("a", 2.0, 3.0, s2=9.0, window=10.0),
            underwritten("b", 1.0, 2.0, s2=0.0, window=1.0),
        ]
        result = compute_pkre([], imagined, 1)
        assert result.variance == pytest.approx(3.6 + 4.0)
        assert [c.loss_variance for c in result.components] == [
            pytest.approx(estimate_loss_variance(e)) for e in imagined
        ]

    def test_three_components_cross_checked_against_aggregate_simulation(self):
        comps = [
            LevyComponent("a", 0.0, 0.0, 1.0, Exponential.from_mean(2.0)),
            LevyComponent("b", 0.0, 0.0, 2.0, Exponential.from_mean(1.0)),
            LevyComponent("c", 0.0, 0.0, 0.5, Exponential.from_mean(4.0)),
        ]
        imagined = [
            underwritten(c.component_id, c.jump_rate, c.severity.mean()) for c in comps
        ]
        result = compute_pkre([], imagined, 1)
        total = aggregate(comps)
        horizon = 50.0
        losses = np.array(
            [-p.terminal_value / horizon for p in sample_paths(total, horizon, 41, 10_000)]
        )
        se = losses.std(ddof=1) / math.sqrt(len(losses))
        assert abs(losses.mean() - result.total) <= 3.0 * se


# dyadic floats keep every sum exact, so additivity can be asserted with ==
dyadic = st.integers(0, 512).map(lambda n: n / 64.0)


class TestPkreAdditivity:
    @given(
        st.lists(st.tuples(dyadic, dyadic), min_size=0, max_size=6),
        st.lists(st.tuples(dyadic, dyadic), min_size=0, max_size=6),
    )
    @settings(max_examples=200, deadline=None)
    def test_disjoint_sets_add_exactly(self, first, second):
        def build(pairs, prefix):
            return [
                underwritten(f"{prefix}{i}", lam, xi, s2=1.0, window=2.0)
                for i, (lam, xi) in enumerate(pairs)
            ]

        set_a = build(first, "a")
        set_b = build(second, "b")
        combined = compute_pkre([], set_a + set_b, 1)
        separate_a = compute_pkre([], set_a, 1)
        separate_b = compute_pkre([], set_b, 1)
        assert combined.total == separate_a.total + separate_b.total
        assert combined.variance == separate_a.variance + separate_b.variance


class TestConsistency:
    def test_errors_shrink_as_window_grows(self):
        # nested windows at T = 10, 100, 1000; combined relative error of
        # (rate, mean severity) must shrink from T=10 to T=1000 in >= 95%
        # of 200 replications
        lam, mean = 3.0, 2.0
        rng = np.random.default_rng(404)
        wins = 0
        reps = 200
        for _ in range(reps):
            errors = {}
            n_prev, sizes_prev = 0, np.empty(0)
            t_prev = 0.0
            for horizon in (10.0, 100.0, 1000.0):
                extra = rng.poisson(lam * (horizon - t_prev))
                sizes_new = rng.exponential(mean, extra)
                n_prev += extra
                sizes_prev = np.concatenate([sizes_prev, sizes_new])
                t_prev = horizon
                rate = estimate_frequency(n_prev, horizon).rate
                xi = estimate_severity(sizes_prev).mean if n_prev else mean * 2
                errors[horizon] = abs(rate - lam) / lam + abs(xi - mean) / mean
            if errors[1000.0] < errors[10.0]:
                wins += 1
        assert wins >= 0.95 * reps


class TestCsvRoundTrip:
    def test_pinned_columns_and_values_survive(self):
        estimates = [
            estimate_from_observation("obs", [1.0, 3.0, 2.0], 6.0),
            estimate_from_observation("none", [], 4.0),
            underwritten("imag", 0.25, 8.0, s2=2.5, window=1.0, round_index=3),
        ]
        out = io.StringIO()
        write_estimates_csv(estimates, out)
        header = out.getvalue().splitlines()[0]
        assert header == (
            "component_id,source,round,lambda_hat,xi_hat,severity_var,window,n_events"
        )
        back = read_estimates_csv(io.StringIO(out.getvalue()))
        for orig, loaded in zip(estimates, back):
            assert loaded.component_id == orig.component_id
            assert loaded.source == orig.source
            assert loaded.round == orig.round
            assert loaded.lambda_hat == orig.lambda_hat
            assert loaded.xi_hat == orig.xi_hat
            assert loaded.severity_variance == orig.severity_variance
            assert loaded.window == orig.window
            assert loaded.n_events == orig.n_events
