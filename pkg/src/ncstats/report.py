"""Per-window analysis rows and granularity/alpha sweep tables.

Serialization helpers keep the CSV and JSON forms byte-stable: the same
inputs always produce the same bytes, so reruns can be diffed directly.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from typing import Optional, Sequence

from .metrics import window_metrics
from .stats import TestConfig, nc_range, pass_rate
from .windowing import DailyMatrix, WindowSample, windows

ANALYSIS_HEADER = (
    "start_date,n,direct_nc,lower,upper,p_greater,passes,indeterminate"
)
SWEEP_HEADER = "granularity_days,alpha,pass_fraction,window_count"
METRICS_HEADER = "start_date,n,nc,hhi,entropy_bits,gini"


@dataclass(frozen=True)
class AnalysisRow:
    """One window's direct coefficient, confidence range, and test verdict.

    An indeterminate row marks a window with no blocks at all; its numeric
    fields are zero and its p-value is absent.
    """

    start_date: date
    n: int
    direct_nc: int
    lower: int
    upper: int
    p_greater: Optional[float]
    passes: bool
    indeterminate: bool

    def __post_init__(self):
        if not self.indeterminate and not self.lower <= self.direct_nc <= self.upper:
            raise ValueError(
                f"range [{self.lower}, {self.upper}] does not contain "
                f"direct value {self.direct_nc}"
            )

    @property
    def possibly_lower(self) -> bool:
        """True when a smaller coefficient could not be ruled out: the
        window may be more centralized than its direct value suggests."""
        return not self.indeterminate and self.lower < self.direct_nc


@dataclass(frozen=True)
class SweepCell:
    """Pass rate for one (granularity, alpha) combination."""

    granularity_days: int
    alpha: float
    pass_fraction: float
    window_count: int

    def __post_init__(self):
        if not 0 <= self.pass_fraction <= 1:
            raise ValueError("pass_fraction out of [0, 1]")


def _window_row(window: WindowSample, config: TestConfig) -> AnalysisRow:
    if window.n == 0:
        return AnalysisRow(
            start_date=window.start_date,
            n=0,
            direct_nc=0,
            lower=0,
            upper=0,
            p_greater=None,
            passes=False,
            indeterminate=True,
        )
    r = nc_range(window, config)
    return AnalysisRow(
        start_date=window.start_date,
        n=window.n,
        direct_nc=r.direct,
        lower=r.lower,
        upper=r.upper,
        p_greater=r.p_greater_at_direct,
        passes=r.p_greater_at_direct <= config.alpha,
        indeterminate=False,
    )


def analyze(
    matrix: DailyMatrix, w: int, config: TestConfig, threads: int = 1
) -> list[AnalysisRow]:
    """One row per w-day window of the matrix, in date order.

    Window evaluations are independent; `threads` > 1 maps them over a
    thread pool with ordered collection, which never changes the result.
    """
    ws = windows(matrix, w)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: _window_row(s, config), ws))
    return [_window_row(s, config) for s in ws]


def sweep(
    matrix: DailyMatrix,
    granularities: Sequence[int],
    alphas: Sequence[float],
    config: TestConfig,
) -> list[SweepCell]:
    """Pass rate per (granularity, alpha) cell, granularity-major order.

    The threshold comes from `config`; each cell substitutes its own alpha.
    Empty windows never count toward a cell's denominator.
    """
    if not granularities or not alphas:
        raise ValueError("need at least one granularity and one alpha")
    cells = []
    for w in granularities:
        ws = windows(matrix, w)
        n_tested = sum(1 for s in ws if s.n > 0)
        for alpha in alphas:
            cell_config = TestConfig(alpha=alpha, threshold=config.threshold)
            cells.append(
                SweepCell(
                    granularity_days=w,
                    alpha=alpha,
                    pass_fraction=pass_rate(ws, cell_config),
                    window_count=n_tested,
                )
            )
    return cells


def _fmt_float(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def _fmt_bool(x: bool) -> str:
    return "true" if x else "false"


def analysis_to_csv(rows: Sequence[AnalysisRow]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANALYSIS_HEADER.split(","))
    for r in rows:
        writer.writerow(
            (
                r.start_date.isoformat(),
                r.n,
                r.direct_nc,
                r.lower,
                r.upper,
                _fmt_float(r.p_greater),
                _fmt_bool(r.passes),
                _fmt_bool(r.indeterminate),
            )
        )
    return buf.getvalue()


def analysis_to_json(rows: Sequence[AnalysisRow]) -> str:
    payload = [
        {
            "start_date": r.start_date.isoformat(),
            "n": r.n,
            "direct_nc": r.direct_nc,
            "lower": r.lower,
            "upper": r.upper,
            "p_greater": r.p_greater,
            "passes": r.passes,
            "indeterminate": r.indeterminate,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def sweep_to_csv(cells: Sequence[SweepCell]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER.split(","))
    for c in cells:
        writer.writerow(
            (c.granularity_days, _fmt_float(c.alpha), _fmt_float(c.pass_fraction), c.window_count)
        )
    return buf.getvalue()


def sweep_to_json(cells: Sequence[SweepCell]) -> str:
    payload = [
        {
            "granularity_days": c.granularity_days,
            "alpha": c.alpha,
            "pass_fraction": c.pass_fraction,
            "window_count": c.window_count,
        }
        for c in cells
    ]
    return json.dumps(payload, indent=2) + "\n"


def metrics_to_csv(samples: Sequence[WindowSample], threshold: float = 0.5) -> str:
    """Concentration metrics per window; empty windows get blank metric
    fields and a zero coefficient."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER.split(","))
    for s in samples:
        if s.n == 0:
            writer.writerow((s.start_date.isoformat(), 0, 0, "", "", ""))
            continue
        m = window_metrics(s, threshold)
        writer.writerow(
            (
                s.start_date.isoformat(),
                s.n,
                m.nc,
                _fmt_float(m.hhi),
                _fmt_float(m.entropy_bits),
                _fmt_float(m.gini),
            )
        )
    return buf.getvalue()


def metrics_to_json(samples: Sequence[WindowSample], threshold: float = 0.5) -> str:
    payload = []
    for s in samples:
        if s.n == 0:
            payload.append(
                {
                    "start_date": s.start_date.isoformat(),
                    "n": 0,
                    "nc": 0,
                    "hhi": None,
                    "entropy_bits": None,
                    "gini": None,
                }
            )
            continue
        m = window_metrics(s, threshold)
        payload.append(
            {
                "start_date": s.start_date.isoformat(),
                "n": s.n,
                "nc": m.nc,
                "hhi": m.hhi,
                "entropy_bits": m.entropy_bits,
                "gini": m.gini,
            }
        )
    return json.dumps(payload, indent=2) + "\n"
