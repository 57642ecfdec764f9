"""Finite-key and asymptotic secret-key lengths for blockwise and non-blockwise distillation.

Every function accepts numpy arrays as well as scalars so the optimizers can
evaluate whole search grids at once; scalar inputs return Python floats.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import raise_for_violations

ArrayLike = Union[float, np.ndarray]

MAX_QBER = 0.375


class EmptyBlocksError(Exception):
    """Raised when a pooled statistic is requested over blocks holding no pairs."""

    pass


class UndefinedRelativeDifferenceError(Exception):
    """Raised when the non-blockwise reference rate is zero."""

    pass


class Scheme(str, Enum):
    NONBLOCKWISE = "nonblockwise"
    BLOCKWISE = "blockwise"
    ASYMPTOTIC_NONBLOCK = "asymptotic_nonblock"
    ASYMPTOTIC_BLOCK = "asymptotic_block"


@dataclass(frozen=True)
class SecurityParams:
    """Security parameters and the error-correction leakage model.

    Leakage is ``ec_efficiency * n * h(Q + mu)``; with ``ec_uses_deviation``
    off it becomes ``ec_efficiency * n * h(Q)``.
    """

    eps_sec: float = 1e-9
    eps_cor: float = 1e-9
    ec_efficiency: float = 1.0
    ec_uses_deviation: bool = True

    def __post_init__(self) -> None:
        problems = []
        for name in ("eps_sec", "eps_cor"):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name}: must be in (0, 1), got {getattr(self, name)}")
        if not self.ec_efficiency >= 1.0:
            problems.append(f"ec_efficiency: must be >= 1, got {self.ec_efficiency}")
        raise_for_violations("SecurityParams", problems)

    @property
    def correctness_penalty_bits(self) -> float:
        """log2(2 / (eps_sec^2 * eps_cor)), paid once per distilled block."""
        return math.log2(2.0 / (self.eps_sec**2 * self.eps_cor))


@dataclass(frozen=True)
class BlockStats:
    """One post-processing block: delivered pairs, QBER, attempted signals and sample size."""

    label: str
    pairs_B: float
    qber_Q: float
    signals_N: float = 0.0
    sample_m: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        if not self.pairs_B >= 0:
            problems.append(f"pairs_B: must be >= 0, got {self.pairs_B}")
        if not self.signals_N >= 0:
            problems.append(f"signals_N: must be >= 0, got {self.signals_N}")
        if self.pairs_B > 0 and not 0 <= self.sample_m < self.pairs_B:
            problems.append(f"sample_m: must be in [0, pairs_B), got {self.sample_m}")
        if self.pairs_B == 0 and self.sample_m != 0:
            problems.append(f"sample_m: must be 0 for an empty block, got {self.sample_m}")
        if not 0 <= self.qber_Q <= MAX_QBER + 1e-12:
            problems.append(f"qber_Q: must be in [0, {MAX_QBER}], got {self.qber_Q}")
        raise_for_violations(f"BlockStats '{self.label}'", problems)


@dataclass(frozen=True)
class KeyResult:
    secret_bits: float
    effective_rate: float
    scheme: Scheme

    @classmethod
    def from_bits(cls, secret_bits: float, signals_N: float, scheme: Scheme) -> "KeyResult":
        """Build a result whose rate is bits per attempted signal."""
        bits = max(0.0, float(secret_bits))
        rate = bits / signals_N if signals_N > 0 else 0.0
        return cls(secret_bits=bits, effective_rate=rate, scheme=scheme)


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def entropy_ext(x: ArrayLike) -> ArrayLike:
    """Extended binary entropy: h(x) on [0, 1/2], zero everywhere else."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x <= 0.5)
    safe = np.where(inside, x, 0.5)
    h = -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe)
    return _scalar_or_array(np.where(inside, h, 0.0))


def sampling_deviation(n: ArrayLike, m: ArrayLike, sec: SecurityParams) -> ArrayLike:
    """Finite-sampling correction mu added to the observed QBER."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.sqrt((n + m) * (m + 1.0) / (n * m**2) * math.log(2.0 / sec.eps_sec))
    return _scalar_or_array(mu)


def key_len_nonblockwise(n: ArrayLike, m: ArrayLike, Q: ArrayLike, sec: SecurityParams) -> ArrayLike:
    """Secret bits distilled from n raw bits after testing m bits at observed QBER Q.

    Non-positive n or m yields zero (no estimate, no key). An estimated error
    rate Q + mu of 1/2 or more admits no key either, even though the extended
    entropy drops back to zero there. Negative lengths clamp to zero.
    """
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    Q = np.asarray(Q, dtype=float)
    valid = (n > 0) & (m > 0)
    n_safe = np.where(valid, n, 1.0)
    m_safe = np.where(valid, m, 1.0)
    estimated = Q + sampling_deviation(n_safe, m_safe, sec)
    valid &= estimated < 0.5
    leak_qber = estimated if sec.ec_uses_deviation else Q
    length = (
        n_safe * (1.0 - entropy_ext(estimated))
        - sec.ec_efficiency * n_safe * entropy_ext(leak_qber)
        - sec.correctness_penalty_bits
    )
    return _scalar_or_array(np.where(valid, np.maximum(length, 0.0), 0.0))


def key_len_blockwise(blocks: Sequence[BlockStats], sec: SecurityParams) -> float:
    """Sum of independently distilled, individually clamped block keys."""
    return float(
        sum(key_len_nonblockwise(block.pairs_B - block.sample_m, block.sample_m, block.qber_Q, sec) for block in blocks)
    )


def pooled_qber(blocks: Sequence[BlockStats]) -> float:
    """Pair-weighted mean QBER across blocks.

    Raises:
        EmptyBlocksError: If no block holds any pair
    """
    total = sum(block.pairs_B for block in blocks)
    if total <= 0:
        raise EmptyBlocksError("pooled QBER is undefined: no block holds any delivered pair")
    return sum(block.pairs_B * block.qber_Q for block in blocks) / total


def key_len_pooled(blocks: Sequence[BlockStats], sample_m: float, sec: SecurityParams) -> float:
    """Non-blockwise key over all blocks with a single sample of size ``sample_m``."""
    total = sum(block.pairs_B for block in blocks)
    if total <= 0:
        return 0.0
    return float(key_len_nonblockwise(total - sample_m, sample_m, pooled_qber(blocks), sec))


def asymptotic_rate_nonblock(Q: ArrayLike) -> ArrayLike:
    """Infinite-key rate per raw bit, max(0, 1 - 2h(Q)); zero from Q = 1/2 upwards."""
    Q = np.asarray(Q, dtype=float)
    rate = np.maximum(0.0, 1.0 - 2.0 * np.asarray(entropy_ext(Q)))
    return _scalar_or_array(np.where(Q < 0.5, rate, 0.0))


def asymptotic_rate_block(weights: Sequence[float], qbers: Sequence[float]) -> float:
    """Infinite-key rate per raw bit when each block is distilled on its own.

    Raises:
        ValueError: If the sequences differ in length or the weights do not sum to 1
    """
    if len(weights) != len(qbers):
        raise ValueError(f"weights and qbers differ in length ({len(weights)} != {len(qbers)})")
    if not math.isclose(sum(weights), 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise ValueError(f"weights must sum to 1, got {sum(weights)}")
    return float(sum(p * asymptotic_rate_nonblock(q) for p, q in zip(weights, qbers)))


def asymptotic_bits_blockwise(blocks: Sequence[BlockStats]) -> float:
    """Infinite-key bits from each block's own QBER."""
    return float(sum(block.pairs_B * asymptotic_rate_nonblock(block.qber_Q) for block in blocks))


def asymptotic_bits_pooled(blocks: Sequence[BlockStats]) -> float:
    """Infinite-key bits when all blocks share the pooled QBER."""
    total = sum(block.pairs_B for block in blocks)
    if total <= 0:
        return 0.0
    return float(total * asymptotic_rate_nonblock(pooled_qber(blocks)))


def relative_difference(rate_block: float, rate_nonblock: float) -> float:
    """(r_b - r_nb) / r_nb.

    Raises:
        UndefinedRelativeDifferenceError: If rate_nonblock is zero
    """
    if rate_nonblock == 0:
        raise UndefinedRelativeDifferenceError("relative difference is undefined when the non-blockwise rate is 0")
    return (rate_block - rate_nonblock) / rate_nonblock
