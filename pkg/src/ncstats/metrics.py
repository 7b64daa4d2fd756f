"""Concentration metrics over block-production shares.

The Nakamoto coefficient is the number of top producers needed to take a
strict majority of the observed blocks. The companions quantify the same
distribution differently: HHI on the 0..10000 percentage scale, Shannon
entropy in bits, and the Gini coefficient in its standard discrete
mean-difference form (0 for perfect equality).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .windowing import WindowSample

SHARE_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ShareVector:
    """Fractional resource shares, non-negative and summing to one."""

    shares: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.shares, dtype=np.float64)
        object.__setattr__(self, "shares", arr)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("shares must be a non-empty 1-d vector")
        if (arr < 0).any():
            raise ValueError("shares must be non-negative")
        if abs(float(arr.sum()) - 1.0) > SHARE_SUM_TOL:
            raise ValueError(f"shares sum to {float(arr.sum())!r}, expected 1")

    def __len__(self) -> int:
        return len(self.shares)

    @classmethod
    def from_counts(cls, counts: Union[Mapping[str, int], Iterable[int]]) -> "ShareVector":
        values = np.asarray(
            list(counts.values()) if isinstance(counts, Mapping) else list(counts),
            dtype=np.float64,
        )
        total = values.sum()
        if total <= 0:
            raise ValueError("cannot form shares from an empty or all-zero count set")
        return cls(values / total)

    @classmethod
    def from_window(cls, window: WindowSample) -> "ShareVector":
        return cls.from_counts(window.counts)


def nakamoto_coefficient(
    counts: Union[Mapping[str, int], Iterable[int]],
    threshold: float = 0.5,
) -> int:
    """Smallest number of top producers whose joint share strictly exceeds
    `threshold`. Returns 0 for an empty or all-zero count set.

    A producer with exactly half the blocks is not a majority: the
    inequality is strict, so a 50/50 split has coefficient 2.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
    if any(v < 0 for v in values):
        raise ValueError("negative block count")
    total = sum(values)
    if total <= 0:
        return 0
    running = 0
    for i, v in enumerate(sorted(values, reverse=True), start=1):
        running += v
        if running > threshold * total:
            return i
    return len(values)


def hhi(shares: ShareVector) -> float:
    """Sum of squared percentage shares; (0, 10000], 10000 for a monopoly."""
    pct = 100.0 * shares.shares
    return float(np.dot(pct, pct))


def shannon_entropy(shares: ShareVector) -> float:
    """Entropy of the share distribution in bits; zero shares contribute 0."""
    s = shares.shares[shares.shares > 0]
    return float(-(s * np.log2(s)).sum())


def gini(shares: ShareVector) -> float:
    """Discrete mean-difference Gini: 0 for equal shares, -> 1 for a monopoly
    among many.

    With shares sorted ascending, G = sum_i (2i - n - 1) s_i / n.
    """
    s = np.sort(shares.shares)
    n = len(s)
    i = np.arange(1, n + 1, dtype=np.float64)
    g = float(((2.0 * i - n - 1.0) * s).sum() / n)
    # exact value is >= 0 for sorted non-negative shares; clip float noise
    return g if g > 0.0 else 0.0


def nc1_bounds(n: int) -> tuple[float, float]:
    """What HHI and Gini must look like when one entity holds a majority.

    For `n` participants with a top share above one half, HHI always exceeds
    2500, and the Gini of the one-dominant/rest-equal family is at least
    0.5 - 1/n (approaching 0.5 from below as n grows). Entropy carries no
    such bound: it can be made arbitrarily large at any fixed top share.
    """
    if n < 2:
        raise ValueError(f"need at least 2 entities, got {n}")
    return 2500.0, 0.5 - 1.0 / n


@dataclass(frozen=True)
class MetricValues:
    """All four concentration metrics for one window."""

    nc: int
    hhi: float
    entropy_bits: float
    gini: float

    def __post_init__(self):
        if self.nc < 0:
            raise ValueError("nakamoto coefficient must be >= 0")
        if not 0 < self.hhi <= 10000 + 1e-9:
            raise ValueError(f"hhi out of range: {self.hhi}")
        if self.entropy_bits < 0:
            raise ValueError("entropy must be >= 0")
        if not 0 <= self.gini < 1:
            raise ValueError(f"gini out of range: {self.gini}")


def window_metrics(window: WindowSample, threshold: float = 0.5) -> MetricValues:
    """Compute all metrics for one non-empty window."""
    if window.n == 0:
        raise ValueError("window has no blocks; metrics are undefined")
    shares = ShareVector.from_window(window)
    return MetricValues(
        nc=nakamoto_coefficient(window.counts, threshold),
        hhi=hhi(shares),
        entropy_bits=shannon_entropy(shares),
        gini=gini(shares),
    )
