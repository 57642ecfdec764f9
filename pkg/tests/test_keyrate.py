"""Tests for finite-key and asymptotic key lengths."""

from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from satellite_qkd import (
    BlockStats,
    EmptyBlocksError,
    InvalidParameterError,
    KeyResult,
    Scheme,
    SecurityParams,
    UndefinedRelativeDifferenceError,
    asymptotic_bits_blockwise,
    asymptotic_bits_pooled,
    asymptotic_rate_block,
    asymptotic_rate_nonblock,
    entropy_ext,
    key_len_blockwise,
    key_len_nonblockwise,
    pooled_qber,
    relative_difference,
    sampling_deviation,
)
from satellite_qkd.keyrate import key_len_pooled


def _reference_entropy(x: Decimal) -> Decimal:
    if x <= 0 or x > Decimal("0.5"):
        return Decimal(0)
    return -(x * x.ln() + (1 - x) * (1 - x).ln()) / Decimal(2).ln()


def _reference_deviation(n: Decimal, m: Decimal, eps_sec: Decimal) -> Decimal:
    return ((n + m) * (m + 1) / (n * m * m) * (2 / eps_sec).ln()).sqrt()


def reference_entropy(x: float) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        return float(_reference_entropy(Decimal(x)))


def reference_deviation(n: float, m: float, sec: SecurityParams) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        return float(_reference_deviation(Decimal(n), Decimal(m), Decimal(sec.eps_sec)))


def reference_key_len(n: float, m: float, q: float, sec: SecurityParams) -> float:
    """Non-blockwise key length evaluated with 40 significant digits."""
    with localcontext() as ctx:
        ctx.prec = 40
        n_d, m_d, q_d = Decimal(n), Decimal(m), Decimal(q)
        eps_sec, eps_cor = Decimal(sec.eps_sec), Decimal(sec.eps_cor)
        estimated = q_d + _reference_deviation(n_d, m_d, eps_sec)
        if estimated >= Decimal("0.5"):
            return 0.0
        penalty = (2 / (eps_sec * eps_sec * eps_cor)).ln() / Decimal(2).ln()
        length = n_d * (1 - _reference_entropy(estimated)) - n_d * _reference_entropy(estimated) - penalty
        return float(max(length, Decimal(0)))


def random_key_inputs(seed: int = 2024, size: int = 1000) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw bits n, sample sizes m and QBERs spanning the regimes the optimizers visit."""
    rng = np.random.default_rng(seed)
    n = 10 ** rng.uniform(3, 12, size)
    m = n * 10 ** rng.uniform(-4, np.log10(0.5), size)
    q = rng.uniform(0.0, 0.2, size)
    return n, m, q


weights_and_qbers = st.lists(
    st.tuples(
        st.floats(min_value=0.01, max_value=1.0, allow_nan=False),
        st.floats(min_value=0.0, max_value=0.5, allow_nan=False),
    ),
    min_size=1,
    max_size=6,
)


class TestEntropy:
    @pytest.mark.parametrize("x,expected", [(0.0, 0.0), (0.5, 1.0), (-0.1, 0.0), (0.6, 0.0), (1.0, 0.0)])
    def test_edges(self, x, expected):
        assert entropy_ext(x) == pytest.approx(expected)

    def test_bb84_threshold(self):
        assert entropy_ext(0.11) == pytest.approx(0.49989, abs=1e-4)

    def test_array_input(self):
        values = entropy_ext(np.array([0.0, 0.11, 0.5, 0.7]))
        assert isinstance(values, np.ndarray)
        np.testing.assert_allclose(values, [0.0, 0.49992, 1.0, 0.0], atol=1e-4)

    def test_matches_high_precision_reference(self, sec):
        n, m, q = random_key_inputs()
        points = np.concatenate([q, q + np.asarray(sampling_deviation(n, m, sec)), np.linspace(-0.05, 0.6, 1000)])
        values = entropy_ext(points)
        for x, value in zip(points, values):
            assert value == pytest.approx(reference_entropy(float(x)), rel=1e-9, abs=1e-15)


class TestSamplingDeviation:
    def test_reference_value(self, sec):
        assert sampling_deviation(1e6, 1e6, sec) == pytest.approx(6.545e-3, abs=1e-6)

    def test_more_samples_smaller_deviation(self, sec):
        assert sampling_deviation(1e6, 1e9, sec) < sampling_deviation(1e6, 1e6, sec)

    def test_matches_high_precision_reference(self, sec):
        n, m, _ = random_key_inputs()
        deviations = sampling_deviation(n, m, sec)
        for i in range(len(n)):
            assert deviations[i] == pytest.approx(reference_deviation(float(n[i]), float(m[i]), sec), rel=1e-9)


class TestNonBlockwise:
    def test_zero_qber_reference(self, sec):
        # n(1 - 2h(mu)) - log2(2 / (eps_sec^2 eps_cor)) with mu = 6.545e-3.
        assert key_len_nonblockwise(1e6, 1e6, 0.0, sec) == pytest.approx(886_114, abs=2e3)

    def test_correctness_penalty(self, sec):
        assert sec.correctness_penalty_bits == pytest.approx(90.69, abs=0.01)

    def test_high_qber_gives_nothing(self, sec):
        assert key_len_nonblockwise(1e6, 1e5, 0.3, sec) == 0.0

    def test_estimated_qber_past_half_gives_nothing(self, sec):
        # Tiny sample: mu alone exceeds 1/2.
        assert key_len_nonblockwise(1e6, 5.0, 0.0, sec) == 0.0

    def test_small_block_below_penalty(self, sec):
        assert key_len_nonblockwise(50.0, 10.0, 0.0, sec) == 0.0

    @pytest.mark.parametrize("n,m", [(0.0, 10.0), (10.0, 0.0), (-5.0, 10.0)])
    def test_degenerate_sizes(self, sec, n, m):
        assert key_len_nonblockwise(n, m, 0.01, sec) == 0.0

    def test_scalar_returns_float(self, sec):
        assert isinstance(key_len_nonblockwise(1e8, 1e6, 0.02, sec), float)

    def test_leakage_without_deviation_is_smaller(self):
        strict = SecurityParams()
        loose = SecurityParams(ec_uses_deviation=False)
        assert key_len_nonblockwise(1e8, 1e6, 0.02, loose) > key_len_nonblockwise(1e8, 1e6, 0.02, strict)

    def test_ec_efficiency_costs_key(self):
        assert key_len_nonblockwise(1e8, 1e6, 0.02, SecurityParams(ec_efficiency=1.2)) < key_len_nonblockwise(
            1e8, 1e6, 0.02, SecurityParams()
        )

    def test_monotone_in_qber(self, sec):
        lengths = [key_len_nonblockwise(1e8, 1e6, q, sec) for q in (0.0, 0.01, 0.03, 0.06, 0.1)]
        assert lengths == sorted(lengths, reverse=True)

    def test_monotone_in_raw_bits(self, sec):
        lengths = [key_len_nonblockwise(n, 1e5, 0.02, sec) for n in (1e6, 1e7, 1e8, 1e9)]
        assert lengths == sorted(lengths)

    def test_converges_to_asymptotic_rate(self, sec):
        n, m, q = 2e10, 1e9, 0.02
        finite = key_len_nonblockwise(n, m, q, sec) / (n + m)
        limit = n / (n + m) * asymptotic_rate_nonblock(q)
        assert finite == pytest.approx(limit, rel=0.01)

    def test_matches_high_precision_reference(self, sec):
        n, m, q = random_key_inputs()
        lengths = key_len_nonblockwise(n, m, q, sec)
        for i in range(1000):
            expected = reference_key_len(float(n[i]), float(m[i]), float(q[i]), sec)
            assert lengths[i] == pytest.approx(expected, rel=1e-9, abs=1e-6 * max(1.0, n[i] * 1e-3))


class TestBlockwise:
    def test_single_block_equals_nonblockwise(self, sec):
        block = BlockStats(label="night", pairs_B=1e8, qber_Q=0.02, sample_m=1e6)
        assert key_len_blockwise([block], sec) == pytest.approx(key_len_nonblockwise(1e8 - 1e6, 1e6, 0.02, sec))

    def test_empty_block_adds_nothing(self, sec):
        night = BlockStats(label="night", pairs_B=1e8, qber_Q=0.02, sample_m=1e6)
        day = BlockStats(label="day", pairs_B=0.0, qber_Q=0.0)
        assert key_len_blockwise([night, day], sec) == key_len_blockwise([night], sec)

    def test_blocks_clamp_individually(self, sec):
        good = BlockStats(label="night", pairs_B=1e8, qber_Q=0.01, sample_m=1e6)
        bad = BlockStats(label="day", pairs_B=1e8, qber_Q=0.3, sample_m=1e6)
        assert key_len_blockwise([good, bad], sec) == pytest.approx(key_len_blockwise([good], sec))

    def test_identical_small_blocks_favour_pooling(self, sec):
        """Two (n=5e4, m=5e4, Q=0.02) blocks against one pooled (n=1e5, m=1e5) key."""
        blocks = [
            BlockStats(label="night", pairs_B=1e5, qber_Q=0.02, sample_m=5e4),
            BlockStats(label="day", pairs_B=1e5, qber_Q=0.02, sample_m=5e4),
        ]
        split = key_len_blockwise(blocks, sec)
        pooled = key_len_pooled(blocks, 1e5, sec)
        assert pooled == pytest.approx(key_len_nonblockwise(1e5, 1e5, 0.02, sec))
        assert 0 < split < pooled

    def test_noisy_day_poisons_pooled_key(self, sec):
        night = BlockStats(label="night", pairs_B=1e9, qber_Q=0.01, sample_m=1e7)
        day = BlockStats(label="day", pairs_B=1e9, qber_Q=0.2, sample_m=1e7)
        split = key_len_blockwise([night, day], sec)
        pooled = key_len_pooled([night, day], 2e7, sec)
        assert split == pytest.approx(key_len_blockwise([night], sec))
        assert split > pooled
        assert split > 10 * pooled

    def test_matches_high_precision_reference(self, sec):
        """Per-block clamped sums against the 40-digit evaluation."""
        n, m, q = random_key_inputs()
        for i in range(len(n)):
            j = (i + 1) % len(n)
            blocks = [
                BlockStats(label="night", pairs_B=n[i] + m[i], qber_Q=q[i], sample_m=m[i]),
                BlockStats(label="day", pairs_B=n[j] + m[j], qber_Q=q[j], sample_m=m[j]),
            ]
            expected = sum(
                reference_key_len(float(b.pairs_B - b.sample_m), float(b.sample_m), float(b.qber_Q), sec)
                for b in blocks
            )
            tolerance = 1e-6 * max(1.0, (n[i] + n[j]) * 1e-3)
            assert key_len_blockwise(blocks, sec) == pytest.approx(expected, rel=1e-9, abs=tolerance)

    def test_split_penalty_shrinks_with_size(self, sec):
        """Two equal homogeneous halves lose to pooling, by a shrinking margin."""
        gaps = []
        for total in (1e6, 1e7, 1e8, 1e9, 1e10):
            half = total / 2
            blocks = [
                BlockStats(label="night", pairs_B=half, qber_Q=0.02, sample_m=0.05 * half),
                BlockStats(label="day", pairs_B=half, qber_Q=0.02, sample_m=0.05 * half),
            ]
            split = key_len_blockwise(blocks, sec)
            pooled = key_len_pooled(blocks, 0.05 * total, sec)
            assert split < pooled
            gaps.append((pooled - split) / pooled)
        assert gaps == sorted(gaps, reverse=True)

    def test_block_validation(self):
        with pytest.raises(InvalidParameterError) as excinfo:
            BlockStats(label="day", pairs_B=10.0, qber_Q=0.4, sample_m=20.0)
        assert {v.split(":")[0] for v in excinfo.value.violations} == {"sample_m", "qber_Q"}


class TestPooledQber:
    def test_equal_weights(self):
        blocks = [BlockStats("night", 100.0, 0.0), BlockStats("day", 100.0, 0.1)]
        assert pooled_qber(blocks) == pytest.approx(0.05)

    def test_weighted(self):
        blocks = [BlockStats("night", 300.0, 0.01), BlockStats("day", 100.0, 0.05)]
        assert pooled_qber(blocks) == pytest.approx(0.02)

    def test_single_block(self):
        assert pooled_qber([BlockStats("night", 42.0, 0.03)]) == pytest.approx(0.03)

    def test_no_pairs(self):
        with pytest.raises(EmptyBlocksError):
            pooled_qber([BlockStats("night", 0.0, 0.0), BlockStats("day", 0.0, 0.0)])

    def test_pooled_key_without_pairs_is_zero(self, sec):
        assert key_len_pooled([BlockStats("night", 0.0, 0.0)], 0.0, sec) == 0.0


class TestAsymptotic:
    @pytest.mark.parametrize("q,expected", [(0.0, 1.0), (0.5, 0.0), (0.05, 0.42716), (0.2, 0.0), (0.7, 0.0)])
    def test_nonblock_rate(self, q, expected):
        assert asymptotic_rate_nonblock(q) == pytest.approx(expected, abs=1e-4)

    def test_dominance_instance(self):
        assert asymptotic_rate_block([0.5, 0.5], [0.01, 0.2]) == pytest.approx(0.4192, abs=1e-3)
        assert asymptotic_rate_nonblock(0.105) == pytest.approx(0.0307, abs=1e-3)

    def test_homogeneous_blocks(self):
        assert asymptotic_rate_block([0.3, 0.7], [0.04, 0.04]) == pytest.approx(asymptotic_rate_nonblock(0.04))

    def test_zero_weight_ignored(self):
        assert asymptotic_rate_block([1.0, 0.0], [0.03, 0.4]) == pytest.approx(asymptotic_rate_nonblock(0.03))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            asymptotic_rate_block([0.5, 0.4], [0.01, 0.02])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            asymptotic_rate_block([1.0], [0.01, 0.02])

    @given(weights_and_qbers)
    def test_blockwise_dominates_pooled(self, pairs):
        total = sum(w for w, _ in pairs)
        weights = [w / total for w, _ in pairs]
        qbers = [q for _, q in pairs]
        pooled = sum(w * q for w, q in zip(weights, qbers))
        assert asymptotic_rate_block(weights, qbers) >= asymptotic_rate_nonblock(pooled) - 1e-12

    def test_bits(self):
        blocks = [BlockStats("night", 100.0, 0.01), BlockStats("day", 100.0, 0.2)]
        assert asymptotic_bits_blockwise(blocks) == pytest.approx(200 * 0.4192, abs=0.2)
        assert asymptotic_bits_pooled(blocks) == pytest.approx(200 * 0.0307, abs=0.2)
        assert asymptotic_bits_pooled([BlockStats("night", 0.0, 0.0)]) == 0.0


class TestResults:
    def test_relative_difference(self):
        assert relative_difference(1.0, 1.0) == 0.0
        assert relative_difference(1.05, 1.0) == pytest.approx(0.05)

    def test_relative_difference_undefined(self):
        with pytest.raises(UndefinedRelativeDifferenceError):
            relative_difference(1e-6, 0.0)

    def test_key_result_rate(self):
        result = KeyResult.from_bits(500.0, 1e4, Scheme.BLOCKWISE)
        assert result.effective_rate == pytest.approx(0.05)
        assert KeyResult.from_bits(-3.0, 1e4, Scheme.BLOCKWISE).secret_bits == 0.0
        assert KeyResult.from_bits(10.0, 0.0, Scheme.NONBLOCKWISE).effective_rate == 0.0

    def test_security_validation(self):
        with pytest.raises(InvalidParameterError, match="ec_efficiency"):
            SecurityParams(ec_efficiency=0.9)
