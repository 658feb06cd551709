"""Aligned fleet streams and their windowing into analysis windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .signals import FleetWindow, Series, split_windows


@dataclass(frozen=True)
class GroundTruth:
    """Per-machine health labels, constant over a scenario."""

    machine_ids: tuple[str, ...]
    faulty_ids: frozenset[str]

    def __post_init__(self) -> None:
        ids = tuple(self.machine_ids)
        faulty = frozenset(self.faulty_ids)
        if not faulty <= set(ids):
            raise ValueError(f"faulty ids {sorted(faulty - set(ids))} are not in the fleet")
        object.__setattr__(self, "machine_ids", ids)
        object.__setattr__(self, "faulty_ids", faulty)

    def labels(self) -> dict[str, bool]:
        return {mid: mid in self.faulty_ids for mid in self.machine_ids}


@dataclass(frozen=True, eq=False)
class FleetData:
    """Full-duration aligned streams for every machine, plus optional shaft
    speed channel and ground truth."""

    series_by_machine: Mapping[str, Series]
    rpm: np.ndarray | None = None
    ground_truth: GroundTruth | None = None

    def __post_init__(self) -> None:
        series = dict(self.series_by_machine)
        if not series:
            raise ValueError("fleet data needs at least one machine")
        shapes = {(s.n, s.dim, s.sample_rate) for s in series.values()}
        if len(shapes) != 1:
            raise ValueError(f"machines disagree on (n, dim, sample_rate): {sorted(shapes)}")
        if self.rpm is not None:
            rpm = np.ascontiguousarray(np.asarray(self.rpm, dtype=np.float64))
            if rpm.shape != (next(iter(series.values())).n,):
                raise ValueError("rpm channel length does not match the streams")
            rpm.setflags(write=False)
            object.__setattr__(self, "rpm", rpm)
        object.__setattr__(self, "series_by_machine", series)

    @property
    def machine_ids(self) -> tuple[str, ...]:
        return tuple(self.series_by_machine)

    @property
    def sample_rate(self) -> float:
        return next(iter(self.series_by_machine.values())).sample_rate

    @property
    def n(self) -> int:
        return next(iter(self.series_by_machine.values())).n

    @property
    def duration_s(self) -> float:
        return self.n / self.sample_rate


def fleet_windows(data: FleetData, window_s: float) -> list[FleetWindow]:
    """Cut aligned streams into non-overlapping fleet windows.

    The per-window speed is the mean of the rpm channel over the window,
    when that channel is present.
    """
    per_machine = {mid: split_windows(s, window_s) for mid, s in data.series_by_machine.items()}
    count = min(len(w) for w in per_machine.values())
    win_n = next(iter(per_machine.values()))[0].n if count else 0
    windows = []
    for k in range(count):
        speed = None
        if data.rpm is not None:
            speed = float(data.rpm[k * win_n:(k + 1) * win_n].mean())
        windows.append(
            FleetWindow(
                window_index=k,
                series_by_machine={mid: per_machine[mid][k] for mid in data.series_by_machine},
                speed_rpm=speed,
            )
        )
    return windows
