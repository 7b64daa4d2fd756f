"""Exact binomial tests over window samples and the resulting coefficient
confidence ranges.

Whether the top C producers of a window jointly hold more than a threshold
share t of the capacity is tested against the block counts: with k blocks
by the top C out of n total, the one-sided p-value is the exact tail
P(X >= k) for X ~ Binomial(n, t). Small p means statistical support that
the top C really do exceed t, i.e. that the true coefficient is C or less.

The confidence range [lower, upper] collects every coefficient value the
two one-sided tails cannot rule out at significance alpha. Both scans
recompute the top-C block sum per candidate C; a `legacy_listing` switch
reproduces an older published scan that reused a stale sum across the two
branches, kept only for forensic comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betainc

from .metrics import nakamoto_coefficient
from .windowing import WindowSample


@dataclass(frozen=True)
class TestConfig:
    """Significance level and attack threshold for all tests."""

    alpha: float
    threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class TestResult:
    """Outcome of one majority test at top-miner count `c`."""

    c: int
    k: int
    n: int
    p_value: float
    rejected: bool


@dataclass(frozen=True)
class NcRange:
    """Direct coefficient plus the [lower, upper] values alpha cannot rule out."""

    direct: int
    lower: int
    upper: int
    alpha: float
    p_greater_at_direct: float

    @property
    def width(self) -> int:
        return self.upper - self.lower + 1


@lru_cache(maxsize=1 << 16)
def _tail_upper(k: int, n: int, t: float) -> float:
    if k <= 0:
        return 1.0
    # P(X >= k) is the regularized incomplete beta I_t(k, n - k + 1)
    return float(betainc(k, n - k + 1, t))


@lru_cache(maxsize=1 << 16)
def _tail_lower(k: int, n: int, t: float) -> float:
    if k >= n:
        return 1.0
    return float(betainc(n - k, k + 1, 1.0 - t))


def _check_tail_args(k: int, n: int, t: float) -> None:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, n={n}], got {k}")
    if not 0 < t < 1:
        raise ValueError(f"t must be in (0, 1), got {t}")


def binom_tail_upper(k: int, n: int, t: float) -> float:
    """Exact P(X >= k) for X ~ Binomial(n, t)."""
    _check_tail_args(k, n, t)
    return _tail_upper(int(k), int(n), float(t))


def binom_tail_lower(k: int, n: int, t: float) -> float:
    """Exact P(X <= k) for X ~ Binomial(n, t)."""
    _check_tail_args(k, n, t)
    return _tail_lower(int(k), int(n), float(t))


def ranked_counts(window: WindowSample) -> list[int]:
    """Window counts in test order: descending count, ties by ascending
    entity name. Zero-count entities are dropped."""
    items = [(e, c) for e, c in window.counts.items() if c > 0]
    items.sort(key=lambda ec: (-ec[1], ec[0]))
    return [c for _, c in items]


def _top_sums(window: WindowSample) -> np.ndarray:
    """prefix[c] = blocks mined by the top c entities (prefix[0] = 0)."""
    ranked = ranked_counts(window)
    prefix = np.zeros(len(ranked) + 1, dtype=np.int64)
    np.cumsum(ranked, out=prefix[1:])
    return prefix


def majority_test(window: WindowSample, c: int, config: TestConfig) -> TestResult:
    """One-sided exact test that the top `c` entities jointly exceed the
    threshold share.

    Rejection (p <= alpha) is statistical support that the true coefficient
    is `c` or less.
    """
    if window.n == 0:
        raise ValueError("window has no blocks")
    prefix = _top_sums(window)
    n_entities = len(prefix) - 1
    if not 1 <= c <= n_entities:
        raise ValueError(f"c must be in [1, {n_entities}], got {c}")
    k = int(prefix[c])
    p = binom_tail_upper(k, window.n, config.threshold)
    return TestResult(c=c, k=k, n=window.n, p_value=p, rejected=p <= config.alpha)


def nc_range(
    window: WindowSample, config: TestConfig, legacy_listing: bool = False
) -> NcRange:
    """Confidence range of coefficient values for one window.

    Let C0 be the direct coefficient and k_C the blocks of the top C
    entities, with p(C) = P(X >= k_C) and q(C) = P(X <= k_C) under
    Binomial(n, threshold).

    upper: C0 itself when p(C0) <= alpha; otherwise one below the smallest
    C > C0 with p(C) <= alpha, capped at the entity count.
    lower: C0 itself when q(C0) <= alpha; otherwise the smallest C with
    q(C) > alpha, probing down to C = 0 (k = 0) and floored at 1.
    """
    if window.n == 0:
        raise ValueError("window has no blocks")
    n = window.n
    t = config.threshold
    alpha = config.alpha
    prefix = _top_sums(window)
    n_entities = len(prefix) - 1
    direct = nakamoto_coefficient(window.counts, t)

    if legacy_listing:
        return _nc_range_legacy(prefix, n, direct, config)

    p_direct = binom_tail_upper(int(prefix[direct]), n, t)
    if p_direct <= alpha:
        upper = direct
    else:
        upper = n_entities
        for c in range(direct + 1, n_entities + 1):
            if binom_tail_upper(int(prefix[c]), n, t) <= alpha:
                upper = c - 1
                break

    if binom_tail_lower(int(prefix[direct]), n, t) <= alpha:
        lower = direct
    else:
        lower = 1
        for c in range(direct - 1, -1, -1):
            if binom_tail_lower(int(prefix[c]), n, t) <= alpha:
                lower = c + 1
                break

    return NcRange(
        direct=direct,
        lower=lower,
        upper=upper,
        alpha=alpha,
        p_greater_at_direct=p_direct,
    )


def _nc_range_legacy(
    prefix: np.ndarray, n: int, direct: int, config: TestConfig
) -> NcRange:
    """Literal re-implementation of the older published range scan.

    The lower branch starts from whatever top-C sum the upper branch last
    computed (one past the reported upper bound when that loop ran), rather
    than from the direct coefficient's own sum. Loops are additionally
    capped at the entity count and floored at zero so that they terminate;
    the original would spin when no candidate brings the tail under alpha.
    """
    t = config.threshold
    alpha = config.alpha
    n_entities = len(prefix) - 1
    coeffp = coeffq = direct

    def top(c: int) -> int:
        return int(prefix[min(max(c, 0), n_entities)])

    successes = top(direct)
    p_direct = binom_tail_upper(successes, n, t)
    p = p_direct
    if p > alpha:
        while p > alpha and coeffp < n_entities:
            coeffp += 1
            successes = top(coeffp)
            p = binom_tail_upper(successes, n, t)
        if p <= alpha:
            coeffp -= 1

    q = binom_tail_lower(successes, n, t)  # stale `successes`, as published
    if q > alpha:
        while q > alpha and coeffq > 0:
            coeffq -= 1
            q = binom_tail_lower(top(coeffq), n, t)
        if q <= alpha:
            coeffq += 1
        coeffq = max(coeffq, 1)

    return NcRange(
        direct=direct,
        lower=coeffq,
        upper=coeffp,
        alpha=alpha,
        p_greater_at_direct=p_direct,
    )


def pass_rate(windows: Iterable[WindowSample], config: TestConfig) -> float:
    """Fraction of non-empty windows whose direct coefficient passes the
    majority test. Empty windows are excluded from both sides of the ratio.
    """
    tested = passed = 0
    for window in windows:
        if window.n == 0:
            continue
        tested += 1
        c = nakamoto_coefficient(window.counts, config.threshold)
        if majority_test(window, c, config).rejected:
            passed += 1
    if tested == 0:
        raise ValueError("no non-empty windows to test")
    return passed / tested
