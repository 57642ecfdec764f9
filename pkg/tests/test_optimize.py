"""Tests for the pump/sampling-rate grid search and the scheme comparison."""

import numpy as np
import pytest

from satellite_qkd import (
    GeoScenario,
    Scheme,
    SearchGrid,
    TimeOfDay,
    TimeProfile,
    accumulate_days,
    compare_schemes,
    evaluate_pump_grid,
    idealization_check,
    optimize_blockwise,
    optimize_nonblockwise,
)
from satellite_qkd.optimize import blockwise_bits, nonblockwise_bits


@pytest.fixture
def evaluation(reference_scenario, optics, profiles, small_grid, coarse_settings):
    return evaluate_pump_grid(reference_scenario, optics, profiles, small_grid.pump_values, coarse_settings)


@pytest.fixture
def homogeneous_profiles():
    """Day sky identical to the night sky."""
    return (
        TimeProfile(label=TimeOfDay.NIGHT, dark_click_prob=3e-6),
        TimeProfile(label=TimeOfDay.DAY, dark_click_prob=3e-6),
    )


class TestSearchGrid:
    def test_defaults(self):
        grid = SearchGrid()
        assert len(grid.pump_values) == 101
        assert grid.pump_values[0] == 0.0
        assert grid.pump_values[1] == pytest.approx(1e-3)
        assert grid.pump_values[-1] == pytest.approx(0.1)
        assert len(grid.base_sampling_rates) == 30

    def test_sampling_rates_scale_with_days(self):
        grid = SearchGrid()
        rates = grid.sampling_rates(20)
        assert rates[0] == pytest.approx(5e-4 / 20)
        assert rates[-1] == pytest.approx(0.3 / 20)

    def test_rejects_unordered_pumps(self):
        with pytest.raises(ValueError, match="ascending"):
            SearchGrid(pump_values=(0.1, 0.01), base_sampling_rates=(0.01,))

    def test_rejects_out_of_range_rates(self):
        with pytest.raises(ValueError, match="base_sampling_rates"):
            SearchGrid(pump_values=(0.1,), base_sampling_rates=(0.6,))

    def test_rejects_zero_days(self):
        with pytest.raises(ValueError, match="k_days"):
            SearchGrid().sampling_rates(0)


class TestPumpGridEvaluation:
    def test_labels_and_contact(self, evaluation):
        assert evaluation.labels == ("night", "day")
        assert evaluation.contact_length_s == pytest.approx(224, abs=1.0)

    def test_pump_zero_switches_source_off(self, evaluation):
        for label in evaluation.labels:
            off = evaluation.contributions[label][0]
            assert off.pairs_B == 0.0
            assert off.signals_N == pytest.approx(1e9 * evaluation.contact_length_s)

    def test_signals_do_not_depend_on_pump(self, evaluation):
        signals = {c.signals_N for c in evaluation.contributions["night"]}
        assert len(signals) == 1

    def test_pairs_grow_with_pump(self, evaluation):
        pairs, _, _ = evaluation.accumulated("night", 1)
        assert np.all(np.diff(pairs) > 0)

    def test_accumulated_scales_with_passes_and_days(self, evaluation):
        one, q1, n1 = evaluation.accumulated("day", 1)
        three, q3, n3 = evaluation.accumulated("day", 3)
        np.testing.assert_allclose(three, 3 * one)
        np.testing.assert_array_equal(q1, q3)
        assert n3 == pytest.approx(3 * n1)
        assert n1 == pytest.approx(9 * evaluation.contributions["day"][0].signals_N)

    def test_empty_contact_yields_nothing(self, optics, profiles, small_grid):
        far = GeoScenario(altitude_km=500.0, ground_distance_km=3000.0)
        evaluation = evaluate_pump_grid(far, optics, profiles, small_grid.pump_values)
        assert evaluation.contact_length_s == 0.0
        pairs, _, signals = evaluation.accumulated("night", 5)
        assert not pairs.any()
        assert signals == 0.0

    def test_duplicate_labels_rejected(self, reference_scenario, optics, small_grid):
        night = TimeProfile(label=TimeOfDay.NIGHT, dark_click_prob=3e-6)
        with pytest.raises(ValueError, match="unique"):
            evaluate_pump_grid(reference_scenario, optics, (night, night), small_grid.pump_values)


class TestAccumulateDays:
    def test_multipliers_and_doubling(self, evaluation, reference_scenario):
        night = evaluation.contributions["night"][5]
        day = evaluation.contributions["day"][5]
        night1, day1 = accumulate_days(night, day, reference_scenario, 1)
        night2, day2 = accumulate_days(night, day, reference_scenario, 2)
        assert night1.pairs_B == pytest.approx(7 * night.pairs_B)
        assert day1.pairs_B == pytest.approx(9 * day.pairs_B)
        assert night2.pairs_B == pytest.approx(2 * night1.pairs_B)
        assert day2.signals_N == pytest.approx(2 * day1.signals_N)
        assert night2.qber_Q == night1.qber_Q == night.qber_Q

    def test_rejects_zero_days(self, evaluation, reference_scenario):
        night = evaluation.contributions["night"][1]
        with pytest.raises(ValueError, match="k_days"):
            accumulate_days(night, night, reference_scenario, 0)


class TestOptimizeBlockwise:
    @pytest.mark.parametrize("k_days", [1, 20])
    def test_rescan_audit(
        self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings, evaluation, k_days
    ):
        result = optimize_blockwise(
            reference_scenario, optics, profiles, small_grid, sec, k_days, coarse_settings, evaluation
        )
        best = result.key.secret_bits
        assert best == pytest.approx(
            blockwise_bits(evaluation, result.per_block_pump, result.per_block_sampling, sec, k_days), rel=1e-9
        )
        rates = small_grid.sampling_rates(k_days)
        rng = np.random.default_rng(k_days)
        for _ in range(200):
            pumps = {label: float(rng.choice(small_grid.pump_values)) for label in ("night", "day")}
            sampling = {label: float(rng.choice(rates)) for label in ("night", "day")}
            assert blockwise_bits(evaluation, pumps, sampling, sec, k_days) <= best * (1 + 1e-12)

    def test_choices_are_grid_members(self, reference_scenario, optics, profiles, small_grid, sec, evaluation):
        result = optimize_blockwise(reference_scenario, optics, profiles, small_grid, sec, 1, evaluation=evaluation)
        rates = small_grid.sampling_rates(1)
        for label in ("night", "day"):
            assert result.per_block_pump[label] in small_grid.pump_values
            assert result.per_block_sampling[label] in rates
        assert result.evaluations == 2 * len(small_grid.pump_values) * len(rates)
        assert result.key.scheme is Scheme.BLOCKWISE

    def test_night_key_is_positive(self, reference_scenario, optics, profiles, small_grid, sec, evaluation):
        result = optimize_blockwise(reference_scenario, optics, profiles, small_grid, sec, 1, evaluation=evaluation)
        assert result.block("night").secret_bits > 0
        assert result.key.effective_rate == pytest.approx(result.key.secret_bits / result.signals_N)

    def test_noisy_day_is_switched_off(self, reference_scenario, optics, small_grid, sec, coarse_settings):
        profiles = (
            TimeProfile(label=TimeOfDay.NIGHT, dark_click_prob=3e-6),
            TimeProfile(label=TimeOfDay.DAY, dark_click_prob=0.2),
        )
        block = optimize_blockwise(reference_scenario, optics, profiles, small_grid, sec, 1, coarse_settings)
        nonblock = optimize_nonblockwise(reference_scenario, optics, profiles, small_grid, sec, 1, coarse_settings)
        assert block.per_block_pump["day"] == 0.0
        assert block.block("day").secret_bits == 0.0
        assert nonblock.per_block_pump["day"] == 0.0
        assert nonblock.block("day").stats.pairs_B == 0.0

    def test_single_point_grid(self, reference_scenario, optics, profiles, sec, coarse_settings):
        grid = SearchGrid(pump_values=(0.05,), base_sampling_rates=(0.01,))
        result = optimize_blockwise(reference_scenario, optics, profiles, grid, sec, 4, coarse_settings)
        assert result.per_block_pump == {"night": 0.05, "day": 0.05}
        assert result.per_block_sampling == {"night": 0.0025, "day": 0.0025}

    def test_reproducible(self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings):
        first = optimize_blockwise(reference_scenario, optics, profiles, small_grid, sec, 20, coarse_settings)
        second = optimize_blockwise(reference_scenario, optics, profiles, small_grid, sec, 20, coarse_settings)
        assert first.to_dict() == second.to_dict()

    def test_evaluation_grid_mismatch(self, reference_scenario, optics, profiles, sec, evaluation):
        with pytest.raises(ValueError, match="different pump grid"):
            optimize_blockwise(reference_scenario, optics, profiles, SearchGrid(), sec, 1, evaluation=evaluation)


class TestOptimizeNonBlockwise:
    @pytest.mark.parametrize("k_days", [1, 40])
    def test_rescan_audit(
        self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings, evaluation, k_days
    ):
        result = optimize_nonblockwise(
            reference_scenario, optics, profiles, small_grid, sec, k_days, coarse_settings, evaluation
        )
        best = result.key.secret_bits
        rate = result.per_block_sampling["night"]
        assert result.per_block_sampling["day"] == rate
        assert best == pytest.approx(nonblockwise_bits(evaluation, result.per_block_pump, rate, sec, k_days), rel=1e-9)
        rates = small_grid.sampling_rates(k_days)
        rng = np.random.default_rng(100 + k_days)
        for _ in range(200):
            pumps = {label: float(rng.choice(small_grid.pump_values)) for label in ("night", "day")}
            assert nonblockwise_bits(evaluation, pumps, float(rng.choice(rates)), sec, k_days) <= best * (1 + 1e-12)

    def test_search_size(self, reference_scenario, optics, profiles, small_grid, sec, evaluation):
        result = optimize_nonblockwise(reference_scenario, optics, profiles, small_grid, sec, 1, evaluation=evaluation)
        assert result.evaluations == len(small_grid.pump_values) ** 2 * len(small_grid.base_sampling_rates)
        assert result.key.scheme is Scheme.NONBLOCKWISE

    def test_blockwise_dominates_shared_configuration(
        self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings, evaluation
    ):
        for k_days in (1, 20, 80):
            block = optimize_blockwise(
                reference_scenario, optics, profiles, small_grid, sec, k_days, coarse_settings, evaluation
            )
            nonblock = optimize_nonblockwise(
                reference_scenario, optics, profiles, small_grid, sec, k_days, coarse_settings, evaluation
            )
            forced = blockwise_bits(evaluation, nonblock.per_block_pump, nonblock.per_block_sampling, sec, k_days)
            assert block.key.secret_bits >= forced * (1 - 1e-12)


class TestCompareSchemes:
    @pytest.fixture
    def rows(self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings, evaluation):
        return compare_schemes(
            reference_scenario, optics, profiles, small_grid, sec, (1, 20, 40, 60, 80), coarse_settings, evaluation
        )

    def test_one_row_per_period(self, rows):
        assert [row.k_days for row in rows] == [1, 20, 40, 60, 80]

    def test_finite_rates_below_asymptotic(self, rows):
        for row in rows:
            assert row.rate_block <= row.rate_block_asymptotic * (1 + 1e-12)
            assert row.rate_nonblock <= row.rate_nonblock_asymptotic * (1 + 1e-12)

    def test_rates_grow_with_days(self, rows):
        for name in ("rate_block", "rate_nonblock"):
            rates = [getattr(row, name) for row in rows]
            assert all(a <= b * (1 + 1e-12) for a, b in zip(rates, rates[1:]))

    def test_row_arithmetic(self, rows):
        for row in rows:
            assert row.bits_per_day_diff == pytest.approx((row.bits_block - row.bits_nonblock) / row.k_days)
            if row.relative_diff is not None:
                assert row.relative_diff == pytest.approx((row.rate_block - row.rate_nonblock) / row.rate_nonblock)

    def test_excluding_day_only_in_nonblockwise_favours_blockwise(self, rows):
        for row in rows:
            if row.nonblockwise.per_block_pump["day"] == 0.0 and row.blockwise.per_block_pump["day"] > 0.0:
                assert row.rate_block > row.rate_nonblock

    def test_gap_to_asymptotic_shrinks(self, reference_scenario, optics, profiles, sec, coarse_settings):
        """Both optima move with the days while the finite-key gap keeps closing."""
        grid = SearchGrid.logspaced(pump_points=20, rate_points=10)
        rows = compare_schemes(reference_scenario, optics, profiles, grid, sec, (1, 20, 40, 60, 80), coarse_settings)
        pairs = [("rate_block", "rate_block_asymptotic"), ("rate_nonblock", "rate_nonblock_asymptotic")]
        for finite, asymptotic in pairs:
            gaps = [getattr(row, asymptotic) - getattr(row, finite) for row in rows]
            assert all(a >= b - 1e-12 for a, b in zip(gaps, gaps[1:]))
            assert gaps[-1] < gaps[0] / 2

    def test_homogeneous_channel_favours_pooling(
        self, reference_scenario, optics, homogeneous_profiles, sec, coarse_settings
    ):
        grid = SearchGrid.logspaced(pump_points=20, rate_points=10)
        (row,) = compare_schemes(reference_scenario, optics, homogeneous_profiles, grid, sec, (1,), coarse_settings)
        assert row.rate_nonblock > 0
        assert row.relative_diff <= 0

    def test_empty_days_list(self, reference_scenario, optics, profiles, small_grid, sec):
        with pytest.raises(ValueError, match="days_list"):
            compare_schemes(reference_scenario, optics, profiles, small_grid, sec, ())


class TestIdealization:
    def test_two_photon_terms_barely_move_success_probability(
        self, reference_scenario, optics, profiles, small_grid, sec, coarse_settings
    ):
        rows = idealization_check(reference_scenario, optics, profiles, small_grid, sec, 1, coarse_settings)
        assert [row.label for row in rows] == ["night", "day"]
        for row in rows:
            assert row.pump_power in small_grid.pump_values
            assert row.p_succ_delta <= 0.005
            assert 0.0 <= row.fidelity_delta <= 0.75
