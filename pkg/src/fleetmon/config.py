"""Variant configuration and the JSON config-file schema."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .errors import InvalidConfig

VARIANTS = ("waveform", "harmonic", "spectrogram", "vibration_features")

THR_CC_GRID = (0.5, 0.7, 0.8, 0.85, 0.9, 0.95)
SIGMA_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


@dataclass(frozen=True)
class VariantConfig:
    """Analysis recipe: which comparison measure to run and its knobs.

    ``psi`` defaults to half a period worth of samples for the waveform
    variant (samples_per_period // 2) and 0 elsewhere. ``normalization``
    of None selects the variant's default (minmax for waveforms, percentile
    for vibration features).
    """

    variant: str = "waveform"
    thr_cc: float = 0.9
    thr_ad: float = 2.0 / 3.0
    debounce_n: int = 5
    window_s: float = 0.5
    pole_pairs: int = 2
    psi: int | None = None
    samples_per_period: int = 50
    harmonic_k: int = 3
    half_window_hz: float = 5.0
    frame_s: float = 0.05
    lowpass_hz: float = 200.0
    harmonics: tuple[int, ...] = (3, 4, 5, 6)
    log_floor: float = 1e-12
    min_fundamental_hz: float = 5.0
    cost_mode: str = "diff_norm"
    normalization: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 <= self.thr_cc <= 1.0:
            raise InvalidConfig(f"thr_cc must be in [0, 1], got {self.thr_cc}")
        if not 0.0 <= self.thr_ad < 1.0:
            raise InvalidConfig(f"thr_ad must be in [0, 1), got {self.thr_ad}")
        if self.debounce_n < 1:
            raise InvalidConfig(f"debounce_n must be >= 1, got {self.debounce_n}")
        if self.window_s <= 0 or self.frame_s <= 0:
            raise InvalidConfig("window_s and frame_s must be positive")
        if self.samples_per_period < 2:
            raise InvalidConfig("samples_per_period must be >= 2")
        if self.psi is not None and self.psi < 0:
            raise InvalidConfig("psi must be non-negative")
        if self.harmonic_k < 1 or any(k < 1 for k in self.harmonics):
            raise InvalidConfig("harmonic orders must be positive")
        if self.log_floor <= 0:
            raise InvalidConfig("log_floor must be positive")

    @property
    def effective_psi(self) -> int:
        if self.psi is not None:
            return self.psi
        return self.samples_per_period // 2 if self.variant == "waveform" else 0

    @property
    def effective_normalization(self) -> str:
        if self.normalization is not None:
            return self.normalization
        return "percentile" if self.variant == "vibration_features" else "minmax"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["harmonics"] = list(self.harmonics)
        return d

    @classmethod
    def from_dict(cls, raw: Mapping) -> "VariantConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown variant keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "harmonics" in kwargs and kwargs["harmonics"] is not None:
            kwargs["harmonics"] = tuple(kwargs["harmonics"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None

    def override(self, **kwargs) -> "VariantConfig":
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self


# Top-level structure of the JSON config file consumed by the CLI. Section
# contents are the dataclass fields of ScenarioConfig / VariantConfig.
CONFIG_FILE_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"type": "object", "description": "fleetsim.ScenarioConfig fields"},
        "variant": {"type": "object", "description": "config.VariantConfig fields"},
        "kind": {"enum": ["current", "vibration"]},
        "sigma_grid": {"type": "array", "items": {"type": "number"}},
        "thr_cc_grid": {"type": "array", "items": {"type": "number"}},
    },
    "additionalProperties": False,
}


def load_config_file(path: str | Path | None) -> dict:
    """Read and structurally validate the JSON config file."""
    if path is None:
        return {}
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidConfig(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig("config file must hold a JSON object")
    allowed = set(CONFIG_FILE_SCHEMA["properties"])
    unknown = set(raw) - allowed
    if unknown:
        raise InvalidConfig(f"unknown config sections: {sorted(unknown)} (allowed: {sorted(allowed)})")
    for key in ("sigma_grid", "thr_cc_grid"):
        if key in raw and not (
            isinstance(raw[key], list) and all(isinstance(v, (int, float)) for v in raw[key])
        ):
            raise InvalidConfig(f"{key} must be a list of numbers")
    if "kind" in raw and raw["kind"] not in ("current", "vibration"):
        raise InvalidConfig(f"kind must be 'current' or 'vibration', got {raw['kind']!r}")
    for key in ("scenario", "variant"):
        if key in raw and not isinstance(raw[key], dict):
            raise InvalidConfig(f"{key} section must be a JSON object")
    return raw
