"""Nakamoto coefficient estimation with statistical error bars.

Pipeline: parse block-production records (`ingest`), resolve producers
(`attribution`), bucket into sliding windows (`windowing`), then measure
concentration (`metrics`) and quantify the uncertainty of each estimate
with exact binomial tests (`stats`). `simulate` calibrates the tests
against known ground truth; `report` assembles rows and sweep tables;
`cli` wires it all to the `ncstats` command.
"""

from .attribution import (
    AttributionResult,
    AttributionRules,
    Cluster,
    EntityId,
    attribute_block,
    attribute_dataset,
    load_rules,
)
from .ingest import (
    BlockDataset,
    BlockRecord,
    parse_blocks,
    write_normalized,
)
from .metrics import (
    MetricValues,
    ShareVector,
    gini,
    hhi,
    nakamoto_coefficient,
    nc1_bounds,
    shannon_entropy,
    window_metrics,
)
from .report import AnalysisRow, SweepCell, analyze, sweep
from .simulate import (
    CalibrationReport,
    PowerVector,
    SimConfig,
    calibrate,
    sample_window,
    trial_stream,
    true_nc,
)
from .stats import (
    NcRange,
    TestConfig,
    TestResult,
    binom_tail_lower,
    binom_tail_upper,
    majority_test,
    nc_range,
    pass_rate,
)
from .windowing import DailyMatrix, WindowSample, build_daily_matrix, windows

__version__ = "0.1.0"

__all__ = [
    "AnalysisRow",
    "AttributionResult",
    "AttributionRules",
    "BlockDataset",
    "BlockRecord",
    "CalibrationReport",
    "Cluster",
    "DailyMatrix",
    "EntityId",
    "MetricValues",
    "NcRange",
    "PowerVector",
    "ShareVector",
    "SimConfig",
    "SweepCell",
    "TestConfig",
    "TestResult",
    "WindowSample",
    "analyze",
    "attribute_block",
    "attribute_dataset",
    "binom_tail_lower",
    "binom_tail_upper",
    "build_daily_matrix",
    "calibrate",
    "gini",
    "hhi",
    "load_rules",
    "majority_test",
    "nakamoto_coefficient",
    "nc1_bounds",
    "nc_range",
    "parse_blocks",
    "pass_rate",
    "sample_window",
    "shannon_entropy",
    "simulate",
    "sweep",
    "trial_stream",
    "true_nc",
    "window_metrics",
    "windows",
    "write_normalized",
]
