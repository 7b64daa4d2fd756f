"""Command-line entry point.

Subcommands: ingest, attribute, analyze, sweep, metrics, simulate. Exit
codes: 0 success, 1 usage error, 2 data error. Diagnostics go to stderr;
result data goes to --output (written atomically: temp file then rename)
or to stdout when no output path is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import attribution, ingest, report, simulate
from .stats import TestConfig
from .windowing import build_daily_matrix, windows

THREADS_ENV = "NCSTATS_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Fully validated settings for one invocation."""

    subcommand: str
    input_path: Optional[Path] = None
    input_format: str = "csv"
    tags_path: Optional[Path] = None
    addresses_path: Optional[Path] = None
    clusters_path: Optional[Path] = None
    granularities: tuple[int, ...] = ()
    alphas: tuple[float, ...] = ()
    threshold: float = 0.5
    powers: tuple[float, ...] = ()
    blocks_per_day: int = 0
    window_days: int = 0
    trials: int = 0
    seed: int = 0
    output_path: Optional[Path] = None
    output_format: str = "csv"
    threads: int = 1


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _add_input_args(p: _Parser) -> None:
    p.add_argument("--input", required=True, help="block records file")
    p.add_argument(
        "--input-format",
        choices=("csv", "jsonl"),
        default=None,
        help="input format (default: by file extension)",
    )


def _add_rules_args(p: _Parser) -> None:
    p.add_argument("--tags", help="JSON tag rules (optional)")
    p.add_argument("--addresses", help="JSON address book (optional)")
    p.add_argument("--clusters", help="JSON cluster groups (optional)")


def _add_test_args(p: _Parser) -> None:
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument(
        "--threshold",
        type=float,
        default=0.5,
        help="attack threshold share (default 0.5, a simple majority)",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="ncstats", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("ingest", help="normalize block records to canonical CSV")
    _add_input_args(p)
    p.add_argument("--output", help="output path (default stdout)")

    p = sub.add_parser("attribute", help="resolve the entity behind every block")
    _add_input_args(p)
    _add_rules_args(p)
    p.add_argument("--output", help="output path (default stdout)")

    p = sub.add_parser("analyze", help="confidence range per sliding window")
    _add_input_args(p)
    _add_rules_args(p)
    p.add_argument("--granularity", type=int, default=1, help="window length in days")
    _add_test_args(p)
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"worker threads (default ${THREADS_ENV} or 1); never changes results",
    )

    p = sub.add_parser("sweep", help="pass rates over granularity x alpha grids")
    _add_input_args(p)
    _add_rules_args(p)
    p.add_argument(
        "--granularities",
        type=_int_list,
        default=(1, 3, 7, 14, 30),
        help="comma-separated window lengths in days",
    )
    p.add_argument(
        "--alphas",
        type=_float_list,
        default=(0.05,),
        help="comma-separated significance levels",
    )
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("metrics", help="concentration metrics per window")
    _add_input_args(p)
    _add_rules_args(p)
    p.add_argument("--granularity", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="Monte Carlo calibration with known shares")
    p.add_argument(
        "--powers",
        type=_float_list,
        required=True,
        help="comma-separated ground-truth shares, summing to 1",
    )
    p.add_argument("--blocks-per-day", type=int, required=True)
    p.add_argument("--window-days", type=int, default=1)
    p.add_argument("--trials", type=int, required=True)
    _add_test_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="output path (default stdout)")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    sub = args.subcommand
    cfg = RunConfig(
        subcommand=sub,
        input_path=Path(args.input) if getattr(args, "input", None) else None,
        input_format=getattr(args, "input_format", None) or "",
        tags_path=Path(args.tags) if getattr(args, "tags", None) else None,
        addresses_path=Path(args.addresses) if getattr(args, "addresses", None) else None,
        clusters_path=Path(args.clusters) if getattr(args, "clusters", None) else None,
        granularities=(
            tuple(args.granularities)
            if hasattr(args, "granularities")
            else (args.granularity,) if hasattr(args, "granularity") else ()
        ),
        alphas=(
            tuple(args.alphas)
            if hasattr(args, "alphas")
            else (args.alpha,) if hasattr(args, "alpha") else ()
        ),
        threshold=getattr(args, "threshold", 0.5),
        powers=tuple(getattr(args, "powers", ()) or ()),
        blocks_per_day=getattr(args, "blocks_per_day", 0) or 0,
        window_days=getattr(args, "window_days", 0) or 0,
        trials=getattr(args, "trials", 0) or 0,
        seed=getattr(args, "seed", 0) or 0,
        output_path=Path(args.output) if getattr(args, "output", None) else None,
        output_format=getattr(args, "format", "csv"),
        threads=getattr(args, "threads", None) or _default_threads(),
    )
    if cfg.input_path is not None and not cfg.input_format:
        suffix = cfg.input_path.suffix.lower()
        fmt = "jsonl" if suffix in (".jsonl", ".json", ".ndjson") else "csv"
        cfg = dataclasses.replace(cfg, input_format=fmt)

    # flag-value validation is a usage problem, not a data problem
    for a in cfg.alphas:
        if not 0 < a < 1:
            raise UsageError(f"alpha must be in (0, 1), got {a}")
    if not 0 < cfg.threshold < 1:
        raise UsageError(f"threshold must be in (0, 1), got {cfg.threshold}")
    for g in cfg.granularities:
        if g < 1:
            raise UsageError(f"granularity must be >= 1, got {g}")
    if cfg.threads < 1:
        raise UsageError(f"threads must be >= 1, got {cfg.threads}")
    if sub == "simulate":
        if cfg.blocks_per_day < 1 or cfg.window_days < 1 or cfg.trials < 1:
            raise UsageError("blocks-per-day, window-days, and trials must be >= 1")
    return cfg


def _write_output(cfg: RunConfig, data: str) -> None:
    if cfg.output_path is None:
        sys.stdout.write(data)
        return
    target = cfg.output_path
    fd, tmp = tempfile.mkstemp(
        dir=str(target.parent) or ".", prefix=f".{target.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise ValueError(f"cannot read {path}: {e.strerror or e}") from None


def _load_dataset(cfg: RunConfig) -> ingest.BlockDataset:
    dataset = ingest.parse_blocks(_read_bytes(cfg.input_path), cfg.input_format)
    for w in dataset.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return dataset


def _load_rules(cfg: RunConfig) -> attribution.AttributionRules:
    def read(path: Optional[Path]) -> Optional[bytes]:
        return None if path is None else _read_bytes(path)

    return attribution.load_rules(
        read(cfg.tags_path), read(cfg.addresses_path), read(cfg.clusters_path)
    )


def _load_matrix(cfg: RunConfig):
    dataset = _load_dataset(cfg)
    result = attribution.attribute_dataset(dataset, _load_rules(cfg))
    return build_daily_matrix(result.pairs)


def _cmd_ingest(cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg)
    buf = io.BytesIO()
    count = ingest.write_normalized(dataset, buf)
    _write_output(cfg, buf.getvalue().decode("utf-8"))
    print(f"{count} records", file=sys.stderr)


def _cmd_attribute(cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg)
    result = attribution.attribute_dataset(dataset, _load_rules(cfg))
    lines = ["ledger,height,timestamp,entity,synthetic"]
    for record, entity in result.pairs:
        lines.append(
            ",".join(
                (
                    ingest.csv_field(record.ledger),
                    str(record.height),
                    ingest.format_timestamp(record.timestamp),
                    ingest.csv_field(entity.name),
                    "true" if entity.synthetic else "false",
                )
            )
        )
    _write_output(cfg, "\n".join(lines) + "\n")
    print(
        f"matched by tag: {result.matched_by_tag}, by address: "
        f"{result.matched_by_address}, cluster-merged: {result.cluster_merged}, "
        f"synthetic: {result.synthetic}",
        file=sys.stderr,
    )


def _cmd_analyze(cfg: RunConfig) -> None:
    matrix = _load_matrix(cfg)
    config = TestConfig(alpha=cfg.alphas[0], threshold=cfg.threshold)
    rows = report.analyze(matrix, cfg.granularities[0], config, threads=cfg.threads)
    data = (
        report.analysis_to_json(rows)
        if cfg.output_format == "json"
        else report.analysis_to_csv(rows)
    )
    _write_output(cfg, data)


def _cmd_sweep(cfg: RunConfig) -> None:
    matrix = _load_matrix(cfg)
    config = TestConfig(alpha=cfg.alphas[0], threshold=cfg.threshold)
    cells = report.sweep(matrix, cfg.granularities, cfg.alphas, config)
    data = (
        report.sweep_to_json(cells)
        if cfg.output_format == "json"
        else report.sweep_to_csv(cells)
    )
    _write_output(cfg, data)


def _cmd_metrics(cfg: RunConfig) -> None:
    matrix = _load_matrix(cfg)
    samples = windows(matrix, cfg.granularities[0])
    data = (
        report.metrics_to_json(samples, cfg.threshold)
        if cfg.output_format == "json"
        else report.metrics_to_csv(samples, cfg.threshold)
    )
    _write_output(cfg, data)


def _cmd_simulate(cfg: RunConfig) -> None:
    sim_config = simulate.SimConfig(
        powers=simulate.PowerVector(cfg.powers),
        blocks_per_day=cfg.blocks_per_day,
        days=cfg.window_days,
        trials=cfg.trials,
        seed=cfg.seed,
    )
    test = TestConfig(alpha=cfg.alphas[0], threshold=cfg.threshold)
    rep = simulate.calibrate(sim_config, test)
    payload = dataclasses.asdict(rep)
    payload["seed"] = cfg.seed
    payload["alpha"] = test.alpha
    payload["threshold"] = test.threshold
    _write_output(cfg, json.dumps(payload, indent=2) + "\n")


_COMMANDS = {
    "ingest": _cmd_ingest,
    "attribute": _cmd_attribute,
    "analyze": _cmd_analyze,
    "sweep": _cmd_sweep,
    "metrics": _cmd_metrics,
    "simulate": _cmd_simulate,
}


def run(argv: Sequence[str]) -> int:
    """Parse argv and execute one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            raise UsageError("a subcommand is required")
        cfg = _config_from_args(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)

    try:
        _COMMANDS[cfg.subcommand](cfg)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
