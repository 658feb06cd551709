"""Synthetic fleet generator with injectable voltage-unbalance signatures.

Replaces a physical test rig: current streams carry a third-harmonic
increase on faulty machines, vibration streams amplify a random subset of
harmonics 3-6 per faulty machine. All amplitudes, gains and spreads are
invented defaults chosen to reproduce the qualitative regime of a real fleet
(per-machine amplitude variance larger than the fault's amplitude delta,
third harmonic separable below the flux-weakening speed); every one of them
is configurable and none is a measured value.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InvalidConfig
from .signals import Series
from .streams import FleetData, GroundTruth

CURRENT_SAMPLE_RATE = 25600.0
VIBRATION_SAMPLE_RATE = 12800.0

VIB_HARMONICS = (1, 2, 3, 4, 5, 6)
FAULT_HARMONICS = (3, 4, 5, 6)


@dataclass(frozen=True)
class Stationary:
    rpm: float = 820.0


@dataclass(frozen=True)
class RunUp:
    rpm_start: float = 0.0
    rpm_end: float = 1200.0


SpeedProfile = Stationary | RunUp


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesize one deterministic fleet scenario.

    ``sample_rate`` defaults per signal kind (current 25600 Hz, vibration
    12800 Hz) when left as None. ``amp_overrides`` pins per-machine amplitude
    factors (otherwise drawn from ``amp_jitter``); ``speed_offset_rpm``
    reproduces a drivetrain with mis-set speed parameters.
    """

    machine_count: int = 10
    faulty_ids: tuple[str, ...] | None = None
    speed_profile: SpeedProfile = field(default_factory=Stationary)
    load: bool = True
    pole_pairs: int = 2
    sample_rate: float | None = None
    duration_s: float = 30.0
    noise_level: float = 0.01
    fault_gain: float = 0.15
    fault_amp_delta: float = 0.05
    residual_h3: float = 0.02
    residual_h3_spread: tuple[float, float] = (1.0, 1.0)
    amp_jitter: tuple[float, float] = (0.8, 1.2)
    amp_overrides: Mapping[str, float] = field(default_factory=dict)
    speed_offset_rpm: Mapping[str, float] = field(default_factory=dict)
    flux_onset_rpm: float = 1385.0
    flux_zero_rpm: float = 1420.0
    vib_base_amplitudes: tuple[float, ...] = (1.0, 0.6, 0.4, 0.3, 0.25, 0.2)
    vib_gain_range: tuple[float, float] = (1.5, 3.0)
    vib_jitter: tuple[float, float] = (0.8, 1.2)
    vib_unloaded_noise_mult: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "amp_overrides", dict(self.amp_overrides))
        object.__setattr__(self, "speed_offset_rpm", dict(self.speed_offset_rpm))
        self.validate()

    def validate(self) -> None:
        if self.machine_count < 2:
            raise InvalidConfig("machine_count must be at least 2")
        if self.duration_s <= 0:
            raise InvalidConfig("duration_s must be positive")
        if self.pole_pairs < 1:
            raise InvalidConfig("pole_pairs must be at least 1")
        if self.sample_rate is not None and self.sample_rate <= 0:
            raise InvalidConfig("sample_rate must be positive")
        if not self.flux_onset_rpm < self.flux_zero_rpm:
            raise InvalidConfig("flux_onset_rpm must be below flux_zero_rpm")
        if self.noise_level < 0 or self.fault_gain < 0 or self.residual_h3 < 0:
            raise InvalidConfig("noise_level, fault_gain and residual_h3 must be non-negative")
        if len(self.vib_base_amplitudes) != len(VIB_HARMONICS):
            raise InvalidConfig(f"vib_base_amplitudes needs {len(VIB_HARMONICS)} entries")
        ids = set(self.machine_ids)
        faulty = set(self.resolved_faulty_ids)
        if not faulty <= ids:
            raise InvalidConfig(f"faulty ids {sorted(faulty - ids)} are not in the fleet")
        if len(faulty) >= self.machine_count / 2:
            raise InvalidConfig(
                f"{len(faulty)} faulty of {self.machine_count} violates the majority-healthy assumption"
            )
        unknown = set(self.amp_overrides) - ids
        if unknown:
            raise InvalidConfig(f"amp_overrides for unknown machines {sorted(unknown)}")
        unknown = set(self.speed_offset_rpm) - ids
        if unknown:
            raise InvalidConfig(f"speed_offset_rpm for unknown machines {sorted(unknown)}")

    @property
    def machine_ids(self) -> tuple[str, ...]:
        """D1_* for the first half of the fleet, D2_* for the second."""
        half = (self.machine_count + 1) // 2
        return tuple(
            f"D1_{i + 1}" if i < half else f"D2_{i + 1}" for i in range(self.machine_count)
        )

    @property
    def resolved_faulty_ids(self) -> tuple[str, ...]:
        if self.faulty_ids is not None:
            return tuple(self.faulty_ids)
        ids = self.machine_ids
        if self.machine_count >= 5:
            return (ids[1], ids[-1])
        return (ids[1],)

    def ground_truth(self) -> GroundTruth:
        return GroundTruth(self.machine_ids, frozenset(self.resolved_faulty_ids))

    def rpm_at(self, t: np.ndarray) -> np.ndarray:
        if isinstance(self.speed_profile, Stationary):
            return np.full_like(t, self.speed_profile.rpm)
        ramp = self.speed_profile
        frac = np.clip(t / self.duration_s, 0.0, 1.0)
        return ramp.rpm_start + (ramp.rpm_end - ramp.rpm_start) * frac

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.speed_profile, Stationary):
            d["speed_profile"] = {"kind": "stationary", "rpm": self.speed_profile.rpm}
        else:
            d["speed_profile"] = {
                "kind": "runup",
                "rpm_start": self.speed_profile.rpm_start,
                "rpm_end": self.speed_profile.rpm_end,
            }
        if self.faulty_ids is not None:
            d["faulty_ids"] = list(self.faulty_ids)
        return d

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = dict(raw)
        profile = kwargs.get("speed_profile")
        if isinstance(profile, Mapping):
            kind = profile.get("kind")
            if kind == "stationary":
                kwargs["speed_profile"] = Stationary(float(profile.get("rpm", 820.0)))
            elif kind == "runup":
                kwargs["speed_profile"] = RunUp(
                    float(profile.get("rpm_start", 0.0)),
                    float(profile.get("rpm_end", 1200.0)),
                )
            else:
                raise InvalidConfig(f"unknown speed profile kind {kind!r}")
        if kwargs.get("faulty_ids") is not None:
            kwargs["faulty_ids"] = tuple(kwargs["faulty_ids"])
        for key in ("residual_h3_spread", "amp_jitter", "vib_gain_range", "vib_jitter",
                    "vib_base_amplitudes"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None


def speed_to_fundamental(rpm: float, pole_pairs: int) -> float:
    """Electrical supply frequency of a synchronous reference at a shaft speed."""
    if rpm < 0:
        raise ValueError(f"rpm must be non-negative, got {rpm}")
    return pole_pairs * rpm / 60.0


def flux_taper(rpm: np.ndarray, onset_rpm: float, zero_rpm: float) -> np.ndarray:
    """Fault-signature attenuation: 1 below onset, linear to 0 at zero_rpm."""
    return np.clip((zero_rpm - rpm) / (zero_rpm - onset_rpm), 0.0, 1.0)


def _machine_rng(config: ScenarioConfig, kind: int, index: int) -> np.random.Generator:
    # Independent substreams per machine so parallel generation would match.
    return np.random.default_rng((config.seed, kind, index))


def _phase(config: ScenarioConfig, machine_id: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-machine integrated phase and rpm track over the scenario."""
    fs = config.sample_rate or CURRENT_SAMPLE_RATE
    n = int(round(config.duration_s * fs))
    t = np.arange(n) / fs
    rpm = config.rpm_at(t) + config.speed_offset_rpm.get(machine_id, 0.0)
    freq = config.pole_pairs * np.maximum(rpm, 0.0) / 60.0
    theta = 2.0 * np.pi * np.cumsum(freq) / fs
    return theta, rpm


def generate_current(config: ScenarioConfig) -> FleetData:
    """Single-phase current streams with a third-harmonic unbalance signature.

    Machine i emits ``A_i sin(theta + phi_i) + g_i(t) A_i sin(3(theta + phi_i))``
    plus white noise, where theta integrates the per-sample fundamental so
    run-ups stay phase continuous. The third-harmonic gain g is a small
    residual on healthy machines and ``residual + fault_gain`` on faulty
    ones, with the fault contribution tapered to zero across the
    flux-weakening band. Faulty machines also get a slight overall amplitude
    increase that stays well below the fleet's amplitude spread.
    """
    fs = config.sample_rate or CURRENT_SAMPLE_RATE
    config = replace(config, sample_rate=fs)
    truth = config.ground_truth()
    base_amp = 1.25 if config.load else 1.0
    series = {}
    rpm_track = None
    for idx, mid in enumerate(config.machine_ids):
        rng = _machine_rng(config, 0, idx)
        amp_factor = rng.uniform(*config.amp_jitter)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        residual = config.residual_h3 * rng.uniform(*config.residual_h3_spread)
        theta, rpm = _phase(config, mid)
        if rpm_track is None:
            rpm_track = config.rpm_at(np.arange(theta.size) / fs)
        faulty = mid in truth.faulty_ids
        amp = base_amp * config.amp_overrides.get(mid, amp_factor)
        if faulty:
            amp *= 1.0 + config.fault_amp_delta
        gain = residual + (
            config.fault_gain * flux_taper(rpm, config.flux_onset_rpm, config.flux_zero_rpm)
            if faulty
            else 0.0
        )
        x = amp * (np.sin(theta + phi) + gain * np.sin(3.0 * (theta + phi)))
        if config.noise_level > 0:
            x = x + base_amp * config.noise_level * rng.standard_normal(theta.size)
        series[mid] = Series(x, sample_rate=fs)
    return FleetData(series, rpm=rpm_track, ground_truth=truth)


def generate_vibration(config: ScenarioConfig) -> FleetData:
    """Three-axis vibration streams where the fault amplifies a per-machine
    random subset (at least two) of harmonics 3-6.

    Per axis the signal is a sum of harmonics 1-6 of the fundamental with
    per-machine amplitude jitter; fault gains are tapered by the same
    flux-weakening rule as the current signature. Unloaded operation scales
    amplitudes down and noise up.
    """
    fs = config.sample_rate or VIBRATION_SAMPLE_RATE
    config = replace(config, sample_rate=fs)
    truth = config.ground_truth()
    load_scale = 1.25 if config.load else 1.0
    noise_scale = config.noise_level * config.vib_base_amplitudes[0] * load_scale
    if not config.load:
        noise_scale *= config.vib_unloaded_noise_mult
    series = {}
    rpm_track = None
    for idx, mid in enumerate(config.machine_ids):
        rng = _machine_rng(config, 1, idx)
        jitter = rng.uniform(*config.vib_jitter, size=(3, len(VIB_HARMONICS)))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, len(VIB_HARMONICS)))
        n_amplified = int(rng.integers(2, len(FAULT_HARMONICS) + 1))
        amplified = set(rng.choice(FAULT_HARMONICS, size=n_amplified, replace=False).tolist())
        gains = {k: float(rng.uniform(*config.vib_gain_range)) for k in sorted(amplified)}
        theta, rpm = _phase(config, mid)
        if rpm_track is None:
            rpm_track = config.rpm_at(np.arange(theta.size) / fs)
        faulty = mid in truth.faulty_ids
        taper = flux_taper(rpm, config.flux_onset_rpm, config.flux_zero_rpm)
        axes = np.zeros((theta.size, 3))
        for a in range(3):
            x = np.zeros(theta.size)
            for h, k in enumerate(VIB_HARMONICS):
                b = load_scale * config.vib_base_amplitudes[h] * jitter[a, h]
                mult = 1.0
                if faulty and k in gains:
                    mult = 1.0 + (gains[k] - 1.0) * taper
                x = x + b * mult * np.sin(k * theta + phases[a, h])
            axes[:, a] = x
        if config.noise_level > 0:
            axes = axes + noise_scale * rng.standard_normal(axes.shape)
        series[mid] = Series(axes, sample_rate=fs)
    return FleetData(series, rpm=rpm_track, ground_truth=truth)


AXIS_NAMES = ("X", "Y", "Z")


def export_csv(data: FleetData, path: str | Path) -> Path:
    """Write aligned streams in the pipeline CSV format.

    Header: ``t,<id1>,<id2>,...[,rpm]`` for single-channel streams, or
    ``t,<id>:X,<id>:Y,<id>:Z,...[,rpm]`` for three-axis vibration. Values are
    printed with 17 significant digits so ingestion round-trips bit exactly.
    """
    path = Path(path)
    columns = []
    names = ["t"]
    t = np.arange(data.n) / data.sample_rate
    columns.append(t)
    for mid, s in data.series_by_machine.items():
        if s.dim == 1:
            names.append(mid)
            columns.append(s.values[:, 0])
        elif s.dim == len(AXIS_NAMES):
            for a, axis in enumerate(AXIS_NAMES):
                names.append(f"{mid}:{axis}")
                columns.append(s.values[:, a])
        else:
            raise ValueError(f"cannot export {s.dim}-dimensional streams")
    if data.rpm is not None:
        names.append("rpm")
        columns.append(data.rpm)
    table = np.column_stack(columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, table, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    return path


def write_scenario(
    data: FleetData,
    config: ScenarioConfig,
    out_dir: str | Path,
    kind: str,
) -> tuple[Path, Path]:
    """Write the CSV stream file plus a JSON sidecar holding the scenario
    config and ground truth for the evaluation harness."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = export_csv(data, out_dir / f"{kind}.csv")
    sidecar = {
        "schema": "fleetmon/scenario-v1",
        "kind": kind,
        "sample_rate": data.sample_rate,
        "config": config.to_dict(),
        "ground_truth": {
            "machine_ids": list(data.ground_truth.machine_ids),
            "faulty_ids": sorted(data.ground_truth.faulty_ids),
        },
    }
    sidecar_path = out_dir / "scenario.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return csv_path, sidecar_path
