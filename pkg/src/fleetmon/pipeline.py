"""Variant orchestration: per-window preprocessing, clustering, scoring,
debouncing, evaluation, and the sigma-band baseline runner."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .clustering import Dendrogram, Partition, agglomerate, partition
from .config import SIGMA_GRID, THR_CC_GRID, VariantConfig
from .detection import (
    ConfusionCounts,
    Metrics,
    SweepTable,
    WindowVerdict,
    classify,
    confusion,
    debounce,
    metrics,
    score,
    sigma_band_baseline,
    sweep,
)
from .dissimilarity import DissimilarityMatrix, build_matrix, dtw, feature_euclidean, warping_amount
from .errors import (
    DegenerateScale,
    FlatSpectrum,
    HarmonicOutOfRange,
    InvalidConfig,
    UpsamplingRequested,
)
from .fleetsim import speed_to_fundamental
from .signals import (
    FleetWindow,
    Series,
    Spectrum,
    downsample_per_period,
    estimate_fundamental,
    fft_magnitude,
    harmonic_amplitude,
    log_scale,
    normalize,
)
from .streams import FleetData, GroundTruth, fleet_windows

logger = logging.getLogger(__name__)

_PREP_ERRORS = (DegenerateScale, FlatSpectrum, HarmonicOutOfRange, UpsamplingRequested)


@dataclass(frozen=True)
class WindowAnalysis:
    """Retained per-window artifacts: the matrix, the merge tree, and the
    preprocessed per-machine data shown in reports."""

    index: int
    skipped: bool
    excluded: tuple[str, ...]
    matrix: DissimilarityMatrix | None
    dendrogram: Dendrogram | None
    display: Mapping[str, np.ndarray]
    display_x: np.ndarray | None
    display_label: str
    speed_rpm: float | None


@dataclass(frozen=True)
class RunResult:
    """Full output of one variant run over a stream."""

    config: VariantConfig
    machine_ids: tuple[str, ...]
    analyses: tuple[WindowAnalysis, ...]
    partitions: tuple[Partition | None, ...]
    verdicts: tuple[WindowVerdict, ...]
    debounced: Mapping[str, tuple[bool, ...]]
    truth: GroundTruth | None = None
    counts: ConfusionCounts | None = None
    metrics: Metrics | None = None

    @property
    def n_windows(self) -> int:
        return len(self.analyses)


def _norm_spectrum(spectrum: Spectrum, log_floor: float) -> Spectrum:
    """Log scale then min/max normalize a spectrum (order as applied per machine)."""
    logged = log_scale(spectrum, log_floor)
    amps = logged.amplitudes
    lo, hi = float(amps.min()), float(amps.max())
    if hi - lo < 1e-12:
        raise DegenerateScale("spectrum is flat after log scaling")
    return Spectrum((amps - lo) / (hi - lo), logged.bin_hz)


def _window_fundamental(window: FleetWindow, cfg: VariantConfig) -> float:
    """Common fundamental for a window: from the speed channel when present,
    otherwise the fleet median of per-machine spectral estimates."""
    if window.speed_rpm is not None:
        return speed_to_fundamental(window.speed_rpm, cfg.pole_pairs)
    estimates = []
    for s in window.series_by_machine.values():
        try:
            chan = s if s.dim == 1 else Series(s.values[:, 0], s.sample_rate)
            estimates.append(estimate_fundamental(fft_magnitude(chan)))
        except FlatSpectrum:
            continue
    if not estimates:
        return 0.0
    return float(np.median(estimates))


@dataclass(frozen=True)
class _Prepared:
    reps: dict
    display: dict
    display_x: np.ndarray | None
    display_label: str
    excluded: dict
    measure: Callable
    tag: str


def _prepare_waveform(window: FleetWindow, cfg: VariantConfig) -> _Prepared:
    reps: dict[str, Series] = {}
    display: dict[str, np.ndarray] = {}
    excluded: dict[str, str] = {}
    f0 = _window_fundamental(window, cfg)
    if f0 < cfg.min_fundamental_hz:
        excluded = {mid: f"fundamental {f0:.2f} Hz below minimum" for mid in window.machine_ids}
        return _Prepared({}, {}, None, "normalized waveform", excluded, None, "warping_amount")
    psi = cfg.effective_psi
    for mid, s in window.series_by_machine.items():
        try:
            prepped = downsample_per_period(
                normalize(s, cfg.effective_normalization), f0, cfg.samples_per_period
            )
        except _PREP_ERRORS as exc:
            excluded[mid] = str(exc)
            continue
        reps[mid] = prepped
        display[mid] = prepped.values[:, 0]
    x_axis = None
    if reps:
        n_out = next(iter(reps.values())).n
        x_axis = np.arange(n_out) / (cfg.samples_per_period * f0)

    def measure(a: Series, b: Series) -> float:
        _, path = dtw(a, b, psi=psi, mode=cfg.cost_mode)
        return warping_amount(path, normalized=True)

    return _Prepared(reps, display, x_axis, "normalized waveform", excluded, measure, "warping_amount")


def _prepare_harmonic(window: FleetWindow, cfg: VariantConfig) -> _Prepared:
    reps: dict[str, float] = {}
    display: dict[str, np.ndarray] = {}
    excluded: dict[str, str] = {}
    bin_hz = None
    for mid, s in window.series_by_machine.items():
        try:
            spec = _norm_spectrum(fft_magnitude(s), cfg.log_floor)
            f0 = estimate_fundamental(spec)
            amp = harmonic_amplitude(spec, f0, cfg.harmonic_k, cfg.half_window_hz)
        except _PREP_ERRORS as exc:
            excluded[mid] = str(exc)
            continue
        reps[mid] = amp
        display[mid] = spec.amplitudes
        bin_hz = spec.bin_hz
    x_axis = None
    if bin_hz is not None and display:
        x_axis = np.arange(next(iter(display.values())).size) * bin_hz

    def measure(a: float, b: float) -> float:
        return abs(a - b)

    return _Prepared(reps, display, x_axis, "normalized log spectrum", excluded, measure,
                     f"harmonic_{cfg.harmonic_k}_diff")


def _prepare_spectrogram(window: FleetWindow, cfg: VariantConfig) -> _Prepared:
    from .signals import lowpass_truncate, spectrogram

    reps: dict[str, Series] = {}
    display: dict[str, np.ndarray] = {}
    excluded: dict[str, str] = {}
    x_axis = None
    for mid, s in window.series_by_machine.items():
        try:
            spect = spectrogram(s, cfg.frame_s)
            vals = np.log10(np.maximum(spect.values, cfg.log_floor))
            lo, hi = float(vals.min()), float(vals.max())
            if hi - lo < 1e-12:
                raise DegenerateScale("spectrogram is flat after log scaling")
            spect = Series((vals - lo) / (hi - lo), spect.sample_rate, bin_hz=spect.bin_hz)
            spect = lowpass_truncate(spect, cfg.lowpass_hz)
        except _PREP_ERRORS as exc:
            excluded[mid] = str(exc)
            continue
        reps[mid] = spect
        display[mid] = spect.values.mean(axis=0)
        x_axis = np.arange(spect.dim) * spect.bin_hz

    def measure(a: Series, b: Series) -> float:
        value, _ = dtw(a, b, psi=cfg.effective_psi, mode=cfg.cost_mode)
        return value

    return _Prepared(reps, display, x_axis, "mean log spectrum per bin", excluded, measure,
                     "spectrogram_dtw")


def _prepare_vibration(window: FleetWindow, cfg: VariantConfig) -> _Prepared:
    raw: dict[str, np.ndarray] = {}
    excluded: dict[str, str] = {}
    common_f0 = None
    if window.speed_rpm is not None:
        common_f0 = speed_to_fundamental(window.speed_rpm, cfg.pole_pairs)
        if common_f0 < cfg.min_fundamental_hz:
            excluded = {mid: f"fundamental {common_f0:.2f} Hz below minimum"
                        for mid in window.machine_ids}
            return _Prepared({}, {}, None, "scaled harmonic features", excluded, None,
                             "feature_euclidean")
    for mid, s in window.series_by_machine.items():
        try:
            feats = []
            f0 = common_f0
            for axis in range(s.dim):
                spec = fft_magnitude(Series(s.values[:, axis], s.sample_rate))
                if f0 is None:
                    f0 = estimate_fundamental(spec)
                for k in cfg.harmonics:
                    feats.append(harmonic_amplitude(spec, f0, k, cfg.half_window_hz))
        except _PREP_ERRORS as exc:
            excluded[mid] = str(exc)
            continue
        raw[mid] = np.asarray(feats)
    reps: dict[str, np.ndarray] = {}
    if len(raw) >= 2:
        table = np.stack([raw[mid] for mid in raw])
        scaled = _fleet_scale(table, cfg.effective_normalization)
        reps = {mid: scaled[i] for i, mid in enumerate(raw)}
    elif raw:
        reps = dict(raw)
    n_feats = len(cfg.harmonics) * 3
    return _Prepared(reps, {mid: reps[mid] for mid in reps}, np.arange(n_feats, dtype=float),
                     "scaled harmonic features", excluded, feature_euclidean, "feature_euclidean")


def _fleet_scale(table: np.ndarray, mode: str) -> np.ndarray:
    """Normalize each feature dimension across the fleet within one window.

    Degenerate dimensions (no spread across machines) carry no information
    and are zeroed rather than failing the whole window.
    """
    if mode == "percentile":
        center = np.median(table, axis=0)
        q75, q25 = np.percentile(table, [75, 25], axis=0)
        denom = q75 - q25
    elif mode == "minmax":
        center = table.min(axis=0)
        denom = table.max(axis=0) - center
    elif mode == "zscore":
        center = table.mean(axis=0)
        denom = table.std(axis=0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    out = np.zeros_like(table)
    ok = denom >= 1e-12
    if not np.all(ok):
        logger.warning("fleet scaling: %d degenerate feature dimensions zeroed", (~ok).sum())
    out[:, ok] = (table[:, ok] - center[ok]) / denom[ok]
    return out


_PREPARERS = {
    "waveform": _prepare_waveform,
    "harmonic": _prepare_harmonic,
    "spectrogram": _prepare_spectrogram,
    "vibration_features": _prepare_vibration,
}


def analyze_window(window: FleetWindow, cfg: VariantConfig) -> WindowAnalysis:
    """Preprocess one window and build its dissimilarity matrix and dendrogram.

    The window is skipped (no matrix) when more than half the machines fail
    preprocessing or fewer than two remain.
    """
    prepared = _PREPARERS[cfg.variant](window, cfg)
    n_total = len(window.machine_ids)
    for mid, reason in prepared.excluded.items():
        logger.warning("window %d: machine %s excluded (%s)", window.window_index, mid, reason)
    skipped = len(prepared.excluded) > n_total / 2 or len(prepared.reps) < 2
    matrix = None
    dendrogram = None
    if not skipped:
        matrix = build_matrix(prepared.reps, prepared.measure, prepared.tag)
        dendrogram = agglomerate(matrix, "single")
    else:
        logger.warning("window %d skipped (%d/%d machines usable)",
                       window.window_index, len(prepared.reps), n_total)
    return WindowAnalysis(
        index=window.window_index,
        skipped=skipped,
        excluded=tuple(sorted(prepared.excluded)),
        matrix=matrix,
        dendrogram=dendrogram,
        display=prepared.display,
        display_x=prepared.display_x,
        display_label=prepared.display_label,
        speed_rpm=window.speed_rpm,
    )


def analyze_stream(data: FleetData, cfg: VariantConfig) -> tuple[WindowAnalysis, ...]:
    return tuple(analyze_window(w, cfg) for w in fleet_windows(data, cfg.window_s))


def verdicts_from_analyses(
    analyses: Sequence[WindowAnalysis],
    machine_ids: Sequence[str],
    cfg: VariantConfig,
) -> tuple[tuple[Partition | None, ...], tuple[WindowVerdict, ...], dict[str, tuple[bool, ...]]]:
    """Partition, score, classify and debounce every analyzed window.

    Cheap relative to the matrix computation, so threshold sweeps reuse the
    same analyses with different ``cfg`` thresholds.
    """
    machine_ids = tuple(machine_ids)
    partitions: list[Partition | None] = []
    instant_hist: dict[str, list[bool | None]] = {mid: [] for mid in machine_ids}
    per_window: list[dict] = []
    for analysis in analyses:
        if analysis.skipped or analysis.matrix is None:
            partitions.append(None)
            for mid in machine_ids:
                instant_hist[mid].append(None)
            per_window.append({"scores": {}, "clusters": {}, "instant": {}})
            continue
        part = partition(analysis.dendrogram, analysis.matrix, cfg.thr_cc)
        partitions.append(part)
        scores = score(part, len(analysis.matrix.machine_ids))
        flags = classify(scores, cfg.thr_ad)
        clusters = {mid: part.cluster_of(mid) for mid in analysis.matrix.machine_ids}
        for mid in machine_ids:
            instant_hist[mid].append(flags.get(mid))
        per_window.append({"scores": scores, "clusters": clusters, "instant": flags})
    debounced = {
        mid: tuple(debounce(instant_hist[mid], cfg.debounce_n)) for mid in machine_ids
    }
    verdicts = []
    for w, analysis in enumerate(analyses):
        row = per_window[w]
        verdicts.append(
            WindowVerdict(
                window_index=analysis.index,
                scores={mid: row["scores"].get(mid) for mid in machine_ids},
                cluster_ids={mid: row["clusters"].get(mid) for mid in machine_ids},
                instant_anomalous={mid: row["instant"].get(mid) for mid in machine_ids},
                debounced_faulty={mid: debounced[mid][w] for mid in machine_ids},
            )
        )
    return tuple(partitions), tuple(verdicts), debounced


def evaluate_predictions(
    debounced: Mapping[str, Sequence[bool]],
    truth: GroundTruth | Mapping[str, bool],
    warmup: int,
) -> ConfusionCounts:
    """Confusion counts over every (machine, window) pair past the warm-up."""
    labels = truth.labels() if isinstance(truth, GroundTruth) else dict(truth)
    preds: list[bool] = []
    truths: list[bool] = []
    for mid, stream in debounced.items():
        for value in stream[warmup:]:
            preds.append(bool(value))
            truths.append(labels[mid])
    return confusion(preds, truths)


def run_variant(
    data: FleetData,
    cfg: VariantConfig,
    truth: GroundTruth | None = None,
    analyses: Sequence[WindowAnalysis] | None = None,
) -> RunResult:
    """End-to-end variant run over a fleet stream.

    Ground truth defaults to the one attached to the data; metrics are
    computed only when truth is available. Precomputed ``analyses`` may be
    passed to sweep thresholds without redoing the pairwise comparisons.
    """
    if len(data.machine_ids) < 3:
        raise InvalidConfig("need at least three machines for a meaningful majority")
    truth = truth if truth is not None else data.ground_truth
    if analyses is None:
        analyses = analyze_stream(data, cfg)
    partitions, verdicts, debounced = verdicts_from_analyses(analyses, data.machine_ids, cfg)
    counts = None
    mets = None
    if truth is not None:
        counts = evaluate_predictions(debounced, truth, cfg.debounce_n - 1)
        mets = metrics(counts)
    return RunResult(
        config=cfg,
        machine_ids=data.machine_ids,
        analyses=tuple(analyses),
        partitions=partitions,
        verdicts=verdicts,
        debounced=debounced,
        truth=truth,
        counts=counts,
        metrics=mets,
    )


def run_thr_cc_sweep(
    data: FleetData,
    cfg: VariantConfig,
    thr_values: Sequence[float] = THR_CC_GRID,
    truth: GroundTruth | None = None,
) -> tuple[SweepTable, dict[float, RunResult]]:
    """Evaluate one variant across a grid of cophenetic-correlation thresholds."""
    truth = truth if truth is not None else data.ground_truth
    if truth is None:
        raise ValueError("a threshold sweep needs ground truth")
    analyses = analyze_stream(data, cfg)
    results: dict[float, RunResult] = {}
    rows = []
    for thr in thr_values:
        run = run_variant(data, cfg.override(thr_cc=thr), truth=truth, analyses=analyses)
        results[thr] = run
        rows.append((thr, run.counts))
    return sweep("thr_cc", rows), results


def baseline_indicators(
    data: FleetData,
    cfg: VariantConfig,
) -> tuple[list[dict[str, np.ndarray]], list[int]]:
    """Per-window raw harmonic indicator vectors for the sigma-band baseline.

    Current streams yield the k-th (default third) harmonic amplitude;
    three-axis vibration streams yield harmonics 3-6 per axis.
    """
    windows = fleet_windows(data, cfg.window_s)
    rows: list[dict[str, np.ndarray]] = []
    indices: list[int] = []
    for window in windows:
        indicators: dict[str, np.ndarray] = {}
        for mid, s in window.series_by_machine.items():
            try:
                if s.dim == 1:
                    spec = fft_magnitude(s)
                    f0 = estimate_fundamental(spec)
                    vec = [harmonic_amplitude(spec, f0, cfg.harmonic_k, cfg.half_window_hz)]
                else:
                    vec = []
                    f0 = None
                    if window.speed_rpm is not None:
                        f0 = speed_to_fundamental(window.speed_rpm, cfg.pole_pairs)
                        if f0 < cfg.min_fundamental_hz:
                            raise FlatSpectrum("fundamental below minimum")
                    for axis in range(s.dim):
                        spec = fft_magnitude(Series(s.values[:, axis], s.sample_rate))
                        if f0 is None:
                            f0 = estimate_fundamental(spec)
                        for k in cfg.harmonics:
                            vec.append(harmonic_amplitude(spec, f0, k, cfg.half_window_hz))
            except _PREP_ERRORS as exc:
                logger.warning("baseline window %d: machine %s excluded (%s)",
                               window.window_index, mid, exc)
                continue
            indicators[mid] = np.asarray(vec)
        rows.append(indicators)
        indices.append(window.window_index)
    return rows, indices


def run_baseline(
    data: FleetData,
    cfg: VariantConfig,
    sigma_grid: Sequence[float] = SIGMA_GRID,
    truth: GroundTruth | None = None,
) -> tuple[SweepTable, dict[float, dict[str, tuple[bool, ...]]]]:
    """Sigma-band benchmark across a grid of band widths.

    Applies the same debouncing and warm-up evaluation as the framework so
    the comparison is like-for-like.
    """
    truth = truth if truth is not None else data.ground_truth
    rows, _ = baseline_indicators(data, cfg)
    machine_ids = data.machine_ids
    debounced_by_sigma: dict[float, dict[str, tuple[bool, ...]]] = {}
    table_rows = []
    for sigma in sigma_grid:
        instant: dict[str, list[bool | None]] = {mid: [] for mid in machine_ids}
        for indicators in rows:
            if len(indicators) >= 2:
                verdict = sigma_band_baseline(indicators, sigma)
            else:
                verdict = {}
            for mid in machine_ids:
                instant[mid].append(verdict.get(mid))
        debounced = {
            mid: tuple(debounce(instant[mid], cfg.debounce_n)) for mid in machine_ids
        }
        debounced_by_sigma[sigma] = debounced
        if truth is not None:
            table_rows.append(
                (sigma, evaluate_predictions(debounced, truth, cfg.debounce_n - 1))
            )
    table = sweep("sigma", table_rows) if truth is not None else sweep("sigma", [])
    return table, debounced_by_sigma


def result_to_json_obj(
    result: RunResult,
    include_matrices: bool = False,
    include_dendrograms: bool = False,
) -> dict:
    """JSON-ready dict of a run; per-window matrices and dendrograms are
    included only on request to keep files small."""
    windows = []
    for w, verdict in enumerate(result.verdicts):
        analysis = result.analyses[w]
        part = result.partitions[w]
        entry: dict = {
            "index": verdict.window_index,
            "skipped": analysis.skipped,
            "excluded": list(analysis.excluded),
            "speed_rpm": analysis.speed_rpm,
            "scores": dict(verdict.scores),
            "cluster_ids": dict(verdict.cluster_ids),
            "instant_anomalous": dict(verdict.instant_anomalous),
            "debounced_faulty": dict(verdict.debounced_faulty),
            "clusters": [sorted(c) for c in part.clusters] if part is not None else None,
        }
        if include_matrices and analysis.matrix is not None:
            entry["matrix"] = {
                "machine_ids": list(analysis.matrix.machine_ids),
                "values": analysis.matrix.values.tolist(),
                "measure": analysis.matrix.measure_tag,
            }
        if include_dendrograms and analysis.dendrogram is not None:
            entry["dendrogram"] = analysis.dendrogram.to_nested()
        windows.append(entry)
    obj: dict = {
        "schema": "fleetmon/results-v1",
        "config": result.config.to_dict(),
        "machine_ids": list(result.machine_ids),
        "truth": (
            {mid: bool(v) for mid, v in result.truth.labels().items()}
            if result.truth is not None
            else None
        ),
        "windows": windows,
    }
    if result.metrics is not None and result.counts is not None:
        obj["metrics"] = {
            "precision": result.metrics.precision,
            "recall": result.metrics.recall,
            "f1": result.metrics.f1,
            "degenerate": result.metrics.degenerate,
            "counts": {
                "tp": result.counts.tp,
                "fp": result.counts.fp,
                "fn": result.counts.fn,
                "tn": result.counts.tn,
            },
        }
    else:
        obj["metrics"] = None
    return obj


def result_to_json(result: RunResult, **kwargs) -> str:
    return json.dumps(result_to_json_obj(result, **kwargs), indent=2)
