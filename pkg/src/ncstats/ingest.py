"""Parsing and normalization of exported block-production records.

Input files are one-ledger exports with one row per mined block. Two wire
formats are accepted (CSV and JSON lines, see `COLUMNS`); the canonical
on-disk form is CSV with LF line endings and RFC-4180 quoting.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Iterable, Union

COLUMNS = ("ledger", "height", "timestamp", "reward_address", "tag")

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant into a UTC datetime truncated to seconds.

    Accepts a trailing 'Z' or an explicit offset; a naive timestamp is taken
    as UTC. Fractional seconds are dropped.
    """
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"unparseable timestamp {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class BlockRecord:
    """One mined block: where it sits in the chain and who may have made it.

    `reward_address` and `tag` may be empty; such blocks still attribute to a
    synthetic per-height entity downstream.
    """

    ledger: str
    height: int
    timestamp: datetime
    reward_address: str = ""
    tag: str = ""

    def __post_init__(self):
        if self.height < 0:
            raise ValueError(f"height must be >= 0, got {self.height}")
        for name in ("ledger", "reward_address", "tag"):
            if "\x00" in getattr(self, name):
                raise ValueError(f"{name} contains a NUL character (escape it first)")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware (UTC)")
        if self.timestamp.utcoffset().total_seconds() != 0:
            object.__setattr__(
                self, "timestamp", self.timestamp.astimezone(timezone.utc)
            )
        if self.timestamp.microsecond:
            object.__setattr__(
                self, "timestamp", self.timestamp.replace(microsecond=0)
            )


@dataclass(frozen=True)
class BlockDataset:
    """An immutable, height-deduplicated, time-sorted set of blocks.

    `source_digest` fingerprints the exact input bytes and is deliberately
    excluded from equality, so that a dataset compares equal to its
    re-parsed canonical serialization. `warnings` records dedup notices.
    """

    ledger: str
    records: tuple[BlockRecord, ...]
    source_digest: str = field(compare=False, default="")
    warnings: tuple[str, ...] = field(compare=False, default=())

    def __post_init__(self):
        heights = [r.height for r in self.records]
        if len(set(heights)) != len(heights):
            raise ValueError("records contain duplicate heights")
        keys = [(r.timestamp, r.height) for r in self.records]
        if keys != sorted(keys):
            raise ValueError("records must be sorted by (timestamp, height)")

    def __len__(self) -> int:
        return len(self.records)


def _rows_from_csv(text: str) -> Iterable[tuple[int, dict]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty input: missing CSV header") from None
    if tuple(h.strip() for h in header) != COLUMNS:
        raise ValueError(
            f"bad CSV header {header!r}, expected {','.join(COLUMNS)}"
        )
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise ValueError(
                f"line {lineno}: expected {len(COLUMNS)} fields, got {len(row)}"
            )
        yield lineno, dict(zip(COLUMNS, row))


def _rows_from_jsonl(text: str) -> Iterable[tuple[int, dict]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"line {lineno}: invalid JSON: {e.msg}") from None
        if not isinstance(obj, dict):
            raise ValueError(f"line {lineno}: expected a JSON object")
        missing = [c for c in COLUMNS if c not in obj]
        if missing:
            raise ValueError(f"line {lineno}: missing field {missing[0]!r}")
        yield lineno, {c: obj[c] for c in COLUMNS}


def _record_from_row(lineno: int, row: dict) -> BlockRecord:
    try:
        height = int(row["height"])
    except (TypeError, ValueError):
        raise ValueError(
            f"line {lineno}: field 'height': not an integer: {row['height']!r}"
        ) from None
    if height < 0:
        raise ValueError(f"line {lineno}: field 'height': negative value {height}")
    try:
        ts = parse_timestamp(str(row["timestamp"]))
    except ValueError as e:
        raise ValueError(f"line {lineno}: field 'timestamp': {e}") from None
    return BlockRecord(
        ledger=str(row["ledger"]),
        height=height,
        timestamp=ts,
        reward_address=str(row["reward_address"]),
        tag=str(row["tag"]),
    )


def parse_blocks(source: Union[bytes, BinaryIO], fmt: str = "csv") -> BlockDataset:
    """Parse exported block records into a canonical `BlockDataset`.

    `source` is raw bytes or a binary stream; `fmt` is "csv" or "jsonl".
    Rows are sorted by (timestamp, height). Duplicate heights are resolved
    last-row-wins; a conflicting duplicate adds a warning to the dataset.
    Non-UTF-8 bytes (stray coinbase tags) are hex-escaped, not rejected.
    """
    data = source if isinstance(source, bytes) else source.read()
    if not isinstance(data, bytes):
        raise TypeError("source must be bytes or a binary stream")
    digest = hashlib.sha256(data).hexdigest()
    # non-UTF-8 bytes become \xNN escapes; NUL gets the same treatment
    # because the csv module cannot carry it at all
    text = data.decode("utf-8", errors="backslashreplace").replace("\x00", "\\x00")

    if fmt == "csv":
        rows = _rows_from_csv(text)
    elif fmt == "jsonl":
        rows = _rows_from_jsonl(text)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected 'csv' or 'jsonl'")

    by_height: dict[int, BlockRecord] = {}
    warnings: list[str] = []
    ledgers: set[str] = set()
    for lineno, row in rows:
        rec = _record_from_row(lineno, row)
        ledgers.add(rec.ledger)
        if len(ledgers) > 1:
            raise ValueError(
                f"line {lineno}: multiple ledgers in one file: {sorted(ledgers)}"
            )
        prev = by_height.get(rec.height)
        if prev is not None:
            kind = "conflicting" if prev != rec else "identical"
            warnings.append(
                f"line {lineno}: duplicate height {rec.height} with {kind}"
                " payload, keeping the later row"
            )
        by_height[rec.height] = rec

    records = tuple(sorted(by_height.values(), key=lambda r: (r.timestamp, r.height)))
    ledger = records[0].ledger if records else ""
    return BlockDataset(
        ledger=ledger,
        records=records,
        source_digest=digest,
        warnings=tuple(warnings),
    )


def csv_field(value: str) -> str:
    """RFC-4180 quoting: wrap and double-quote only when the field needs it.

    Unlike csv.writer with a bare-LF terminator, a lone CR also triggers
    quoting, so canonical files survive fields with embedded line endings.
    """
    if any(ch in value for ch in ',"\r\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def write_normalized(dataset: BlockDataset, sink: BinaryIO) -> int:
    """Write the canonical CSV form of `dataset` to a binary sink.

    Returns the number of data rows written. Re-parsing the output yields a
    dataset equal to the input.
    """
    lines = [",".join(COLUMNS)]
    for r in dataset.records:
        lines.append(
            ",".join(
                (
                    csv_field(r.ledger),
                    str(r.height),
                    format_timestamp(r.timestamp),
                    csv_field(r.reward_address),
                    csv_field(r.tag),
                )
            )
        )
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))
    return len(dataset.records)
