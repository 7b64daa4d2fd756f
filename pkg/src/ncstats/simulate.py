"""Multinomial block-production simulator with reproducible streams.

Every trial draws its own random stream from (seed, trial index), so a run
is bit-for-bit reproducible no matter how trials are scheduled. Streams are
Philox4x64 counter-based generators keyed through a SplitMix64 finalizer:

    key(seed, i) = splitmix64(splitmix64(seed) XOR splitmix64(i + 1))

with the standard SplitMix64 constants (increment 0x9E3779B97F4A7C15,
multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Categorical draws
use inverse-CDF lookup against the cumulative power vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .stats import TestConfig, majority_test, nc_range
from .windowing import WindowSample

POWER_SUM_TOL = 1e-12

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_stream(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent random stream for one (seed, trial) pair."""
    key = _splitmix64(_splitmix64(seed & _MASK64) ^ _splitmix64((trial + 1) & _MASK64))
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class PowerVector:
    """Ground-truth mining shares; entity names are auto-generated in order."""

    powers: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if not self.powers:
            raise ValueError("power vector must be non-empty")
        if any(p < 0 for p in self.powers):
            raise ValueError("powers must be non-negative")
        if abs(sum(self.powers) - 1.0) > POWER_SUM_TOL:
            raise ValueError(f"powers sum to {sum(self.powers)!r}, expected 1")

    def __len__(self) -> int:
        return len(self.powers)

    def entity_names(self) -> list[str]:
        return [f"entity_{i:03d}" for i in range(len(self.powers))]


def true_nc(powers: PowerVector, threshold: float = 0.5) -> int:
    """Coefficient of the ground-truth shares (same strict prefix rule as
    the count-based estimator)."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    running = 0.0
    for i, p in enumerate(sorted(powers.powers, reverse=True), start=1):
        running += p
        if running > threshold:
            return i
    return len(powers)


def sample_window(
    powers: PowerVector,
    n: int,
    stream: np.random.Generator,
    start_date: date = date(1970, 1, 1),
    length_days: int = 1,
) -> WindowSample:
    """Draw one window of `n` blocks, each assigned to entity i with
    probability powers[i]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cum = np.cumsum(powers.powers)
    cum[-1] = 1.0  # guard the last bin against float round-off
    draws = np.searchsorted(cum, stream.random(n), side="right")
    counts_arr = np.bincount(draws, minlength=len(powers))
    names = powers.entity_names()
    counts = {names[i]: int(c) for i, c in enumerate(counts_arr) if c > 0}
    return WindowSample(
        start_date=start_date, length_days=length_days, counts=counts, n=n
    )


@dataclass(frozen=True)
class SimConfig:
    """One calibration run: who mines, how fast, for how long, how often."""

    powers: PowerVector
    blocks_per_day: int
    days: int
    trials: int
    seed: int

    def __post_init__(self):
        if self.blocks_per_day < 1:
            raise ValueError("blocks_per_day must be >= 1")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class CalibrationReport:
    """Aggregates over all trials of one calibration run."""

    rejection_rate: float
    coverage_rate: float
    mean_range_width: float
    trials: int

    def __post_init__(self):
        if not 0 <= self.rejection_rate <= 1:
            raise ValueError("rejection_rate out of [0, 1]")
        if not 0 <= self.coverage_rate <= 1:
            raise ValueError("coverage_rate out of [0, 1]")


def calibrate(config: SimConfig, test: TestConfig) -> CalibrationReport:
    """Monte Carlo check of the majority test and the confidence range
    against known ground truth.

    Per trial: sample one window of blocks_per_day * days blocks, run the
    majority test at the true coefficient, and compute the confidence
    range. Reports the rejection rate, how often the true coefficient lay
    inside [lower, upper], and the mean range width (upper - lower + 1).
    """
    n = config.blocks_per_day * config.days
    c_true = true_nc(config.powers, test.threshold)
    rejected = covered = 0
    width_sum = 0
    for trial in range(config.trials):
        stream = trial_stream(config.seed, trial)
        window = sample_window(config.powers, n, stream)
        if majority_test(window, min(c_true, len(window.counts)), test).rejected:
            rejected += 1
        r = nc_range(window, test)
        if r.lower <= c_true <= r.upper:
            covered += 1
        width_sum += r.width
    return CalibrationReport(
        rejection_rate=rejected / config.trials,
        coverage_rate=covered / config.trials,
        mean_range_width=width_sum / config.trials,
        trials=config.trials,
    )
