"""Signal containers, normalization, windowing, and spectral transforms.

Everything here is a pure function of its inputs. `Series` values are frozen
after construction, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    CutoffBelowResolution,
    DegenerateScale,
    FlatSpectrum,
    HarmonicOutOfRange,
    NonFiniteInput,
    UpsamplingRequested,
    WindowTooShort,
)

NORMALIZATION_MODES = ("minmax", "zscore", "percentile")

# Denominators below this are treated as degenerate (constant data).
SCALE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Series:
    """A uniformly sampled signal segment.

    ``values`` has shape (n, m): n samples of m-dimensional data points.
    1-D input is accepted and stored as shape (n, 1). ``bin_hz`` is only set
    for spectrogram-style series whose dimensions are frequency bins.
    """

    values: np.ndarray
    sample_rate: float
    bin_hz: float | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"series values must be 1-D or 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"series must have n >= 1 and dim >= 1, got shape {arr.shape}")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("series contains NaN or infinite values")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n / self.sample_rate

    def as_1d(self) -> np.ndarray:
        """The single channel of a 1-D series."""
        if self.dim != 1:
            raise ValueError(f"expected a 1-dimensional series, got dim={self.dim}")
        return self.values[:, 0]


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum with uniform bin spacing.

    Amplitudes from :func:`fft_magnitude` are scaled so that a pure tone of
    amplitude ``a`` lands in a bin of height ``~a``. Log-scaled spectra may
    hold negative values, so only finiteness is enforced here.
    """

    amplitudes: np.ndarray
    bin_hz: float

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("spectrum amplitudes must be a non-empty 1-D array")
        if not self.bin_hz > 0:
            raise ValueError(f"bin_hz must be positive, got {self.bin_hz}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("spectrum contains NaN or infinite values")
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    @property
    def n_bins(self) -> int:
        return self.amplitudes.size

    @property
    def max_hz(self) -> float:
        """Frequency of the highest bin (approximately Nyquist)."""
        return (self.n_bins - 1) * self.bin_hz

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz


@dataclass(frozen=True)
class FleetWindow:
    """One analysis window with an aligned series for every machine."""

    window_index: int
    series_by_machine: Mapping[str, Series]
    speed_rpm: float | None = None

    def __post_init__(self) -> None:
        series = dict(self.series_by_machine)
        if len(series) < 2:
            raise ValueError("a fleet window needs at least two machines")
        shapes = {(s.n, s.dim, s.sample_rate) for s in series.values()}
        if len(shapes) != 1:
            raise ValueError(f"machines disagree on (n, dim, sample_rate): {sorted(shapes)}")
        object.__setattr__(self, "series_by_machine", series)

    @property
    def machine_ids(self) -> tuple[str, ...]:
        return tuple(self.series_by_machine)

    @property
    def duration_s(self) -> float:
        return next(iter(self.series_by_machine.values())).duration_s


def normalize(series: Series, mode: str) -> Series:
    """Scale each dimension of a series independently.

    minmax maps to [0, 1], zscore to zero mean / unit standard deviation,
    percentile to (x - median) / (75th - 25th percentile).

    Raises ``DegenerateScale`` when the denominator of any dimension falls
    below 1e-12; callers decide whether to substitute a constant-zero series.
    """
    values = series.values
    if mode == "minmax":
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        denom = hi - lo
        center = lo
    elif mode == "zscore":
        center = values.mean(axis=0)
        denom = values.std(axis=0)
    elif mode == "percentile":
        center = np.median(values, axis=0)
        q75, q25 = np.percentile(values, [75, 25], axis=0)
        denom = q75 - q25
    else:
        raise ValueError(f"unknown normalization mode {mode!r}; expected one of {NORMALIZATION_MODES}")
    if np.any(denom < SCALE_EPS):
        bad = int(np.argmax(denom < SCALE_EPS))
        raise DegenerateScale(f"{mode} denominator below {SCALE_EPS} in dimension {bad}")
    return Series((values - center) / denom, series.sample_rate, bin_hz=series.bin_hz)


def split_windows(stream: Series, duration_s: float) -> list[Series]:
    """Cut a stream into consecutive non-overlapping windows.

    The trailing partial window is discarded. Raises ``WindowTooShort`` when
    the requested duration holds fewer than two samples.
    """
    win_n = int(duration_s * stream.sample_rate + 1e-9)
    if win_n < 2:
        raise WindowTooShort(
            f"window of {duration_s} s at {stream.sample_rate} Hz holds {win_n} samples"
        )
    count = stream.n // win_n
    return [
        Series(stream.values[k * win_n:(k + 1) * win_n], stream.sample_rate, bin_hz=stream.bin_hz)
        for k in range(count)
    ]


def fft_magnitude(series: Series) -> Spectrum:
    """One-sided amplitude spectrum of a 1-D series.

    Rectangular window, any-n transform, no zero padding. Scaling is such
    that a sine of amplitude ``a`` at an exact bin frequency produces a bin
    of height ``a`` (DC and Nyquist bins carry their one-sided weight).
    """
    x = series.as_1d()
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("fft input contains NaN or infinite values")
    n = x.size
    raw = np.abs(np.fft.rfft(x))
    amp = raw * (2.0 / n)
    amp[0] = raw[0] / n
    if n % 2 == 0:
        amp[-1] = raw[-1] / n
    return Spectrum(amp, bin_hz=series.sample_rate / n)


def log_scale(spectrum: Spectrum, floor: float) -> Spectrum:
    """Replace amplitudes by log10(max(amplitude, floor))."""
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor}")
    return Spectrum(np.log10(np.maximum(spectrum.amplitudes, floor)), spectrum.bin_hz)


def spectrogram(series: Series, frame_s: float) -> Series:
    """Series of per-frame amplitude spectra from non-overlapping frames.

    Frame f of the output equals ``fft_magnitude`` of the f-th raw segment.
    The output sample rate is the frame rate and ``bin_hz`` is set.
    """
    frames = split_windows(series, frame_s)
    if not frames:
        raise WindowTooShort(
            f"stream of {series.duration_s} s holds no full {frame_s} s frame"
        )
    spectra = [fft_magnitude(f) for f in frames]
    frame_n = frames[0].n
    return Series(
        np.stack([s.amplitudes for s in spectra]),
        sample_rate=series.sample_rate / frame_n,
        bin_hz=spectra[0].bin_hz,
    )


def lowpass_truncate(spec_series: Series, cutoff_hz: float) -> Series:
    """Drop spectrogram dimensions above the cutoff frequency, order preserved."""
    if spec_series.bin_hz is None:
        raise ValueError("input has no bin_hz; not a spectrogram-style series")
    if cutoff_hz < spec_series.bin_hz:
        raise CutoffBelowResolution(
            f"cutoff {cutoff_hz} Hz is below the bin resolution {spec_series.bin_hz} Hz"
        )
    keep = int(cutoff_hz / spec_series.bin_hz + 1e-9) + 1
    if keep >= spec_series.dim:
        return spec_series
    return Series(
        spec_series.values[:, :keep],
        spec_series.sample_rate,
        bin_hz=spec_series.bin_hz,
    )


def estimate_fundamental(spectrum: Spectrum) -> float:
    """Frequency of the highest non-DC peak."""
    amps = spectrum.amplitudes
    if amps.size < 2:
        raise FlatSpectrum("spectrum has no non-DC bins")
    body = amps[1:]
    if np.all(body == body[0]):
        raise FlatSpectrum("all non-DC bins are equal; no dominant peak")
    return float((1 + np.argmax(body)) * spectrum.bin_hz)


def harmonic_amplitude(
    spectrum: Spectrum,
    fundamental_hz: float,
    k: int,
    half_window_hz: float = 5.0,
) -> float:
    """Maximum amplitude within +/- half_window_hz of the k-th harmonic."""
    if k < 1:
        raise ValueError(f"harmonic order must be positive, got {k}")
    target = k * fundamental_hz
    if target + half_window_hz > spectrum.max_hz:
        raise HarmonicOutOfRange(
            f"harmonic {k} at {target} Hz (+{half_window_hz} Hz) exceeds {spectrum.max_hz} Hz"
        )
    lo = int(np.ceil((target - half_window_hz) / spectrum.bin_hz - 1e-9))
    hi = int(np.floor((target + half_window_hz) / spectrum.bin_hz + 1e-9))
    lo = max(lo, 0)
    if hi < lo:
        # Band narrower than the bin spacing: fall back to the nearest bin.
        lo = hi = int(round(target / spectrum.bin_hz))
    return float(spectrum.amplitudes[lo:hi + 1].max())


def downsample_per_period(
    series: Series,
    fundamental_hz: float,
    samples_per_period: int = 50,
) -> Series:
    """Linear-interpolation resampling to a fixed count of samples per period.

    No anti-aliasing filter is applied; this is plain decimation onto a
    period-locked grid.
    """
    if not fundamental_hz > 0:
        raise ValueError(f"fundamental must be positive, got {fundamental_hz}")
    target_rate = samples_per_period * fundamental_hz
    if series.sample_rate <= target_rate:
        raise UpsamplingRequested(
            f"sample rate {series.sample_rate} Hz cannot be downsampled to {target_rate} Hz"
        )
    x = series.as_1d()
    t_last = (series.n - 1) / series.sample_rate
    step = 1.0 / target_rate
    m = int(t_last / step + 1e-9) + 1
    t_new = np.arange(m) * step
    t_old = np.arange(series.n) / series.sample_rate
    return Series(np.interp(t_new, t_old, x), sample_rate=target_rate)
