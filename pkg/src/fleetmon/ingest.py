"""CSV ingestion of raw fleet signals.

Format (one row per sample instant):
    t,<id1>,<id2>,...[,rpm]              single-channel streams
    t,<id1>:X,<id1>:Y,<id1>:Z,...[,rpm]  three-axis vibration streams
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ParseError, RaggedColumns, RateMismatch
from .signals import Series
from .streams import FleetData, GroundTruth

AXIS_NAMES = ("X", "Y", "Z")

# Relative tolerance on sample spacing before the file counts as non-uniform.
RATE_TOLERANCE = 1e-6


def _diagnose_rows(path: Path, n_columns: int) -> None:
    """Slow re-scan after a failed bulk parse to name the offending line."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != n_columns:
                raise RaggedColumns(
                    f"{path.name} line {lineno}: {len(row)} columns, header has {n_columns}"
                )
            for name_idx, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path.name} line {lineno}, column {name_idx + 1}: "
                        f"cannot parse {cell!r}"
                    ) from None
    raise ParseError(f"{path.name}: malformed numeric data")


def _parse_header(path: Path) -> list[str]:
    with open(path, newline="") as handle:
        header = handle.readline().strip()
    if not header:
        raise ParseError(f"{path.name} line 1: empty header")
    names = [c.strip() for c in header.split(",")]
    if names[0] != "t":
        raise ParseError(f"{path.name} line 1: first column must be 't', got {names[0]!r}")
    return names


def _group_channels(names: list[str]) -> dict[str, list[str]]:
    """Machine id -> ordered channel column names."""
    groups: dict[str, dict[str, str]] = {}
    plain = any(":" not in c for c in names)
    triaxial = any(":" in c for c in names)
    if plain and triaxial:
        raise ParseError("header mixes plain and axis-suffixed machine columns")
    if plain:
        if len(set(names)) != len(names):
            raise ParseError("duplicate machine columns in header")
        return {c: [c] for c in names}
    for c in names:
        mid, _, axis = c.partition(":")
        if axis not in AXIS_NAMES:
            raise ParseError(f"column {c!r}: axis must be one of {AXIS_NAMES}")
        groups.setdefault(mid, {})
        if axis in groups[mid]:
            raise ParseError(f"duplicate column {c!r}")
        groups[mid][axis] = c
    out = {}
    for mid, axes in groups.items():
        missing = [a for a in AXIS_NAMES if a not in axes]
        if missing:
            raise ParseError(f"machine {mid!r} is missing axes {missing}")
        out[mid] = [f"{mid}:{a}" for a in AXIS_NAMES]
    return out


def ingest_csv(path: str | Path) -> FleetData:
    """Parse a fleet CSV into aligned per-machine streams.

    Raises ``ParseError`` (with the line number) for malformed values,
    ``RaggedColumns`` for inconsistent row widths, and ``RateMismatch`` when
    the time column is not uniformly sampled.
    """
    path = Path(path)
    names = _parse_header(path)
    has_rpm = names[-1] == "rpm"
    machine_cols = names[1:-1] if has_rpm else names[1:]
    if not machine_cols:
        raise ParseError(f"{path.name}: no machine columns in header")
    groups = _group_channels(machine_cols)
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        _diagnose_rows(path, len(names))
        raise  # pragma: no cover
    if table.shape[0] < 2:
        raise ParseError(f"{path.name}: need at least two sample rows")
    if table.shape[1] != len(names):
        raise RaggedColumns(
            f"{path.name}: rows have {table.shape[1]} columns, header has {len(names)}"
        )
    if not np.all(np.isfinite(table)):
        bad = int(np.argwhere(~np.isfinite(table))[0][0]) + 2
        raise ParseError(f"{path.name} line {bad}: non-finite value")
    t = table[:, 0]
    dt = np.diff(t)
    med = float(np.median(dt))
    if med <= 0:
        raise RateMismatch(f"{path.name}: time column is not increasing")
    if float(np.abs(dt - med).max()) > RATE_TOLERANCE * med:
        raise RateMismatch(f"{path.name}: non-uniform sample spacing")
    fs = 1.0 / med
    col_index = {name: i for i, name in enumerate(names)}
    series = {}
    for mid, cols in groups.items():
        block = table[:, [col_index[c] for c in cols]]
        series[mid] = Series(block, sample_rate=fs)
    rpm = table[:, col_index["rpm"]] if has_rpm else None
    return FleetData(series, rpm=rpm)


def load_data_dir(data_dir: str | Path) -> tuple[FleetData, dict | None, str]:
    """Load a simulated scenario directory: the CSV stream file plus the
    optional ``scenario.json`` sidecar carrying config and ground truth.

    Returns (data, sidecar config dict or None, signal kind).
    """
    data_dir = Path(data_dir)
    candidates = sorted(p for p in data_dir.glob("*.csv"))
    if not candidates:
        raise ParseError(f"no CSV stream file found in {data_dir}")
    if len(candidates) > 1:
        raise ParseError(f"multiple CSV files in {data_dir}: {[p.name for p in candidates]}")
    data = ingest_csv(candidates[0])
    sidecar_path = data_dir / "scenario.json"
    config_dict = None
    kind = "vibration" if next(iter(data.series_by_machine.values())).dim == 3 else "current"
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        config_dict = sidecar.get("config")
        kind = sidecar.get("kind", kind)
        gt = sidecar.get("ground_truth")
        if gt:
            truth = GroundTruth(tuple(gt["machine_ids"]), frozenset(gt["faulty_ids"]))
            data = FleetData(data.series_by_machine, rpm=data.rpm, ground_truth=truth)
    return data, config_dict, kind
