"""Parsers that turn public spot-availability datasets into canonical traces.

The canonical trace file is a deliberately tiny CSV so that real, synthetic,
and adversary-generated traces are interchangeable everywhere downstream:

    # spotsched-trace v1
    # step_seconds=600
    # origin.provider=aws
    index,available
    0,1
    1,0

Header lines are `# key=value`; `origin.*` keys populate the provenance
record. Row indices must be contiguous from zero.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

from .core import SpotTrace

logger = logging.getLogger(__name__)

CANONICAL_MAGIC = "# spotsched-trace v1"


class TraceFormatError(ValueError):
    pass


def write_canonical(trace: SpotTrace, path) -> None:
    lines = [CANONICAL_MAGIC, f"# step_seconds={trace.step_seconds!r}"]
    for key in sorted(trace.origin_meta):
        lines.append(f"# origin.{key}={trace.origin_meta[key]}")
    lines.append("index,available")
    for i, bit in enumerate(trace.availability):
        lines.append(f"{i},{int(bit)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_canonical(path) -> SpotTrace:
    step_seconds = None
    meta: dict = {}
    bits: list[bool] = []
    expected = 0
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CANONICAL_MAGIC:
        raise TraceFormatError(f"{path}: missing '{CANONICAL_MAGIC}' header")
    body_started = False
    for ln in lines[1:]:
        if not ln:
            continue
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            key = key.strip()
            if key == "step_seconds":
                step_seconds = float(value)
            elif key.startswith("origin."):
                meta[key[len("origin."):]] = value
            continue
        if not body_started:
            if ln != "index,available":
                raise TraceFormatError(f"{path}: expected 'index,available', got {ln!r}")
            body_started = True
            continue
        idx_s, _, avail_s = ln.partition(",")
        if int(idx_s) != expected:
            raise TraceFormatError(f"{path}: non-contiguous index {idx_s}, expected {expected}")
        if avail_s not in ("0", "1"):
            raise TraceFormatError(f"{path}: available must be 0 or 1, got {avail_s!r}")
        bits.append(avail_s == "1")
        expected += 1
    if step_seconds is None:
        raise TraceFormatError(f"{path}: header missing step_seconds")
    if not bits:
        raise TraceFormatError(f"{path}: no rows")
    return SpotTrace(step_seconds=step_seconds, availability=tuple(bits), origin_meta=meta)


@dataclass(frozen=True, slots=True)
class SpotlakeSchema:
    """Column names for the archive CSV; the dataset's exact header drifts,
    so it is mapped here instead of hardcoded."""

    timestamp: str = "timestamp"
    label: str = "availability"
    provider: str = "provider"
    region: str = "region"
    zone: str = "az"
    instance: str = "instance_type"


@dataclass(frozen=True, slots=True)
class SpotlakeSelector:
    provider: str | None = None
    region: str | None = None
    zone: str | None = None
    instance: str | None = None

    def matches(self, row: dict, schema: SpotlakeSchema) -> bool:
        pairs = (
            (self.provider, schema.provider),
            (self.region, schema.region),
            (self.zone, schema.zone),
            (self.instance, schema.instance),
        )
        return all(want is None or row.get(col) == want for want, col in pairs)


_LABELS = {"low", "medium", "high"}


def _parse_ts(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        from datetime import datetime
        return datetime.fromisoformat(value).timestamp()


def parse_spotlake(path, selector: SpotlakeSelector, schema: SpotlakeSchema | None = None,
                   step_seconds: float | None = None) -> SpotTrace:
    """Archive rows -> availability: a VM counts available only while its
    qualitative label is 'high'. Irregular sampling is resampled onto a
    uniform grid with the last observed label carried forward."""
    schema = schema or SpotlakeSchema()
    samples: list[tuple[float, bool]] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if not selector.matches(row, schema):
                continue
            label = (row.get(schema.label) or "").strip().lower()
            if label not in _LABELS:
                raise TraceFormatError(f"{path}: unknown availability label {label!r}")
            samples.append((_parse_ts(row[schema.timestamp]), label == "high"))
    if not samples:
        raise TraceFormatError(f"{path}: selector {selector} matched no rows")
    times = [t for t, _ in samples]
    if any(b < a for a, b in zip(times, times[1:])):
        raise TraceFormatError(f"{path}: timestamps are not non-decreasing")

    if step_seconds is None:
        diffs = [b - a for a, b in zip(times, times[1:]) if b > a]
        step_seconds = min(diffs) if diffs else 1.0
    t0, t_end = times[0], times[-1]
    steps = max(1, math.floor((t_end - t0) / step_seconds) + 1)
    bits: list[bool] = []
    cursor = 0
    current = samples[0][1]
    filled = False
    for i in range(steps):
        grid_t = t0 + i * step_seconds
        while cursor + 1 < len(samples) and samples[cursor + 1][0] <= grid_t:
            cursor += 1
            current = samples[cursor][1]
        if cursor + 1 < len(samples) and samples[cursor + 1][0] > grid_t + step_seconds:
            filled = True
        bits.append(current)
    meta = {"source": str(path), "dataset": "spotlake",
            "resampled_forward_fill": str(filled).lower()}
    for name in ("provider", "region", "zone", "instance"):
        value = getattr(selector, name)
        if value is not None:
            meta[name] = value
    return SpotTrace(step_seconds=step_seconds, availability=tuple(bits), origin_meta=meta)


def parse_skypilot_availability(path) -> SpotTrace:
    """Ping-style logs: one row per 10-minute probe, `timestamp,up`."""
    rows: list[tuple[float, bool]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "timestamp":
                continue
            if len(row) != 2:
                raise TraceFormatError(f"{path}: malformed row {row!r}")
            status = row[1].strip().lower()
            if status in ("up", "1", "true"):
                up = True
            elif status in ("down", "0", "false"):
                up = False
            else:
                raise TraceFormatError(f"{path}: unknown ping outcome {row[1]!r}")
            rows.append((_parse_ts(row[0]), up))
    if not rows:
        raise TraceFormatError(f"{path}: no ping rows")
    step = 600.0
    seen = set()
    for ts, _ in rows:
        if ts in seen:
            raise TraceFormatError(f"{path}: duplicate timestamp {ts}")
        seen.add(ts)
    rows.sort()
    t0 = rows[0][0]
    gaps = False
    by_index: dict[int, bool] = {}
    for ts, up in rows:
        offset = (ts - t0) / step
        if abs(offset - round(offset)) > 1e-6:
            raise TraceFormatError(f"{path}: timestamp {ts} is off the 10-minute grid")
        by_index[round(offset)] = up
    steps = max(by_index) + 1
    bits = []
    for i in range(steps):
        if i not in by_index:
            gaps = True
            bits.append(False)  # missing ping treated as unavailable, conservatively
        else:
            bits.append(by_index[i])
    meta = {"source": str(path), "dataset": "skypilot-availability",
            "missing_pings_filled_unavailable": str(gaps).lower()}
    return SpotTrace(step_seconds=step, availability=tuple(bits), origin_meta=meta)


def parse_skypilot_preemption(path, step_seconds: float = 600.0) -> SpotTrace:
    """Lifetime records `start_seconds,lifetime_seconds`: available during each
    recorded lifetime, unavailable in between. Intervals are rasterized inward
    so the trace never claims spot time that did not exist."""
    intervals: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "start":
                continue
            if len(row) != 2:
                raise TraceFormatError(f"{path}: malformed row {row!r}")
            start, lifetime = float(row[0]), float(row[1])
            if lifetime <= 0:
                logger.warning("%s: skipping zero-length lifetime at %s", path, start)
                continue
            intervals.append((start, start + lifetime))
    if not intervals:
        raise TraceFormatError(f"{path}: no usable lifetime records")
    intervals.sort()
    for (_, end_a), (start_b, _) in zip(intervals, intervals[1:]):
        if start_b < end_a:
            raise TraceFormatError(f"{path}: overlapping lifetimes (single-VM trace expected)")

    steps = max(1, math.ceil(intervals[-1][1] / step_seconds))
    bits = [False] * steps
    for start, end in intervals:
        first = math.ceil(start / step_seconds)
        last = math.floor(end / step_seconds)  # step i available iff fully inside
        for i in range(first, last):
            bits[i] = True
    meta = {"source": str(path), "dataset": "skypilot-preemption"}
    return SpotTrace(step_seconds=step_seconds, availability=tuple(bits), origin_meta=meta)


@dataclass(frozen=True, slots=True)
class TraceStats:
    fraction_available: float
    segment_count: int
    segment_mean: float
    segment_max: int
    gap_count: int
    gap_mean: float
    horizon_steps: int


def trace_stats(trace: SpotTrace) -> TraceStats:
    segments: list[int] = []
    gaps: list[int] = []
    run_len = 0
    run_state: bool | None = None
    for bit in trace.availability:
        if bit == run_state:
            run_len += 1
            continue
        if run_state is not None:
            (segments if run_state else gaps).append(run_len)
        run_state, run_len = bit, 1
    if run_state is not None:
        (segments if run_state else gaps).append(run_len)
    n = len(trace.availability)
    return TraceStats(
        fraction_available=sum(trace.availability) / n,
        segment_count=len(segments),
        segment_mean=sum(segments) / len(segments) if segments else 0.0,
        segment_max=max(segments) if segments else 0,
        gap_count=len(gaps),
        gap_mean=sum(gaps) / len(gaps) if gaps else 0.0,
        horizon_steps=n,
    )
