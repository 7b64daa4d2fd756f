"""Daily bucketing and sliding-window aggregation of attributed blocks.

Blocks are bucketed by the UTC calendar date of their timestamp. A window of
granularity ``w`` covers ``w`` consecutive days and slides by one day, so a
span of ``D`` days yields ``max(0, D - w + 1)`` windows. Trailing spans
shorter than ``w`` are dropped, never padded.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attribution import EntityId
from .ingest import BlockRecord


@dataclass(frozen=True)
class DailyMatrix:
    """Per-day block counts for every entity over a contiguous date range.

    `counts[d, e]` is the number of blocks the entity `entities[e]` produced
    on `dates[d]`. Days with no blocks at all are present as zero rows.
    """

    dates: tuple[date, ...]
    entities: tuple[str, ...]
    counts: np.ndarray  # shape (len(dates), len(entities)), dtype int64

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (len(self.dates), len(self.entities)):
            raise ValueError(
                f"counts shape {counts.shape} does not match "
                f"{len(self.dates)} dates x {len(self.entities)} entities"
            )
        if (counts < 0).any():
            raise ValueError("negative block count")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur != prev + timedelta(days=1):
                raise ValueError(f"dates not contiguous at {prev} -> {cur}")
        if len(set(self.entities)) != len(self.entities):
            raise ValueError("duplicate entity names")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def total_blocks(self) -> int:
        return int(self.counts.sum())

    def count(self, day: date, entity: str) -> int:
        d = (day - self.dates[0]).days if self.dates else -1
        if not 0 <= d < len(self.dates):
            raise KeyError(f"date {day} outside matrix range")
        try:
            e = self.entities.index(entity)
        except ValueError:
            raise KeyError(f"unknown entity {entity!r}") from None
        return int(self.counts[d, e])

    @classmethod
    def from_daily_counts(
        cls, start: date, daily: Sequence[Mapping[str, int]]
    ) -> "DailyMatrix":
        """Build a matrix from one counts mapping per consecutive day."""
        entities = sorted({e for day in daily for e in day})
        index = {e: i for i, e in enumerate(entities)}
        counts = np.zeros((len(daily), len(entities)), dtype=np.int64)
        for d, day_counts in enumerate(daily):
            for entity, c in day_counts.items():
                counts[d, index[entity]] = c
        dates = tuple(start + timedelta(days=d) for d in range(len(daily)))
        return cls(dates=dates, entities=tuple(entities), counts=counts)


@dataclass(frozen=True)
class WindowSample:
    """Blocks per entity over one w-day window starting at `start_date`."""

    start_date: date
    length_days: int
    counts: dict[str, int]
    n: int

    def __post_init__(self):
        if self.length_days < 1:
            raise ValueError(f"window length must be >= 1, got {self.length_days}")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("negative block count")
        if self.n != sum(self.counts.values()):
            raise ValueError("n does not equal the sum of counts")

    @classmethod
    def from_counts(
        cls,
        counts: Mapping[str, int],
        start_date: date = date(1970, 1, 1),
        length_days: int = 1,
    ) -> "WindowSample":
        counts = {e: int(c) for e, c in counts.items() if c != 0}
        return cls(
            start_date=start_date,
            length_days=length_days,
            counts=counts,
            n=sum(counts.values()),
        )


def build_daily_matrix(
    attributed: Iterable[tuple[BlockRecord, EntityId]],
) -> DailyMatrix:
    """Bucket attributed blocks by UTC calendar date, filling gap days."""
    per_day: dict[date, dict[str, int]] = {}
    for record, entity in attributed:
        day = record.timestamp.date()
        day_counts = per_day.setdefault(day, {})
        day_counts[entity.name] = day_counts.get(entity.name, 0) + 1
    if not per_day:
        return DailyMatrix(dates=(), entities=(), counts=np.zeros((0, 0), dtype=np.int64))
    first, last = min(per_day), max(per_day)
    span = (last - first).days + 1
    daily = [per_day.get(first + timedelta(days=d), {}) for d in range(span)]
    return DailyMatrix.from_daily_counts(first, daily)


def windows(matrix: DailyMatrix, w: int) -> list[WindowSample]:
    """All w-day sliding windows of `matrix`, in start-date order.

    Entities with a zero count in a window are omitted from its counts map.
    """
    if w < 1:
        raise ValueError(f"granularity must be >= 1, got {w}")
    n_windows = matrix.n_days - w + 1
    if n_windows <= 0:
        return []
    # prefix sums along the day axis give every window sum in one pass
    prefix = np.zeros((matrix.n_days + 1, len(matrix.entities)), dtype=np.int64)
    np.cumsum(matrix.counts, axis=0, out=prefix[1:])
    out = []
    for i in range(n_windows):
        sums = prefix[i + w] - prefix[i]
        counts = {
            matrix.entities[e]: int(sums[e]) for e in np.flatnonzero(sums)
        }
        out.append(
            WindowSample(
                start_date=matrix.dates[i],
                length_days=w,
                counts=counts,
                n=int(sums.sum()),
            )
        )
    return out
