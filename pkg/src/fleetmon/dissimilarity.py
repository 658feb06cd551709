"""Pairwise machine-comparison measures and the fleet-wide matrix builder.

The central measure is boundary-relaxed dynamic time warping: the warping
path may skip up to ``psi`` samples at the start and end of either sequence,
which absorbs phase offsets between periodic signals. ``psi=0`` reproduces
classic DTW. The amount of warping along the optimal path (count of
non-diagonal steps) is itself a dissimilarity measure for waveform-shape
deviations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, PsiTooLarge
from .signals import (
    Series,
    Spectrum,
    estimate_fundamental,
    fft_magnitude,
    harmonic_amplitude,
    log_scale,
)

COST_MODES = ("diff_norm", "norm_diff")


def _as_points(x) -> np.ndarray:
    arr = x.values if isinstance(x, Series) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if isinstance(x, Series) else arr.reshape(1, -1)
    return arr


def pointwise_cost(x, y, mode: str = "diff_norm") -> float:
    """Cost between two m-dimensional data points.

    diff_norm is ||x - y||2; norm_diff is ||x||2 - ||y||2 (signed). Callers
    square the cost inside the sequence measures, so the sign is immaterial
    there.
    """
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.size != yv.size:
        raise DimensionMismatch(f"points have dimensions {xv.size} and {yv.size}")
    if mode == "diff_norm":
        return float(np.linalg.norm(xv - yv))
    if mode == "norm_diff":
        return float(np.linalg.norm(xv) - np.linalg.norm(yv))
    raise ValueError(f"unknown cost mode {mode!r}; expected one of {COST_MODES}")


def _cost_sq_matrix(xs: np.ndarray, ys: np.ndarray, mode: str) -> np.ndarray:
    """Squared pointwise costs for all (i, j) pairs, shape (n_x, n_y)."""
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatch(f"sequences have dimensions {xs.shape[1]} and {ys.shape[1]}")
    if mode == "diff_norm":
        # ||x-y||^2 = ||x||^2 + ||y||^2 - 2 x.y
        sq = (
            (xs * xs).sum(axis=1)[:, None]
            + (ys * ys).sum(axis=1)[None, :]
            - 2.0 * (xs @ ys.T)
        )
        return np.maximum(sq, 0.0)
    if mode == "norm_diff":
        diff = np.linalg.norm(xs, axis=1)[:, None] - np.linalg.norm(ys, axis=1)[None, :]
        return diff * diff
    raise ValueError(f"unknown cost mode {mode!r}; expected one of {COST_MODES}")


def euclidean(x: Series, y: Series, mode: str = "diff_norm") -> float:
    """Straight-line distance between two equal-length sequences."""
    xs, ys = _as_points(x), _as_points(y)
    if xs.shape[0] != ys.shape[0]:
        raise LengthMismatch(f"sequences have lengths {xs.shape[0]} and {ys.shape[0]}")
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatch(f"sequences have dimensions {xs.shape[1]} and {ys.shape[1]}")
    if mode == "diff_norm":
        return float(np.sqrt(((xs - ys) ** 2).sum()))
    if mode == "norm_diff":
        diff = np.linalg.norm(xs, axis=1) - np.linalg.norm(ys, axis=1)
        return float(np.sqrt((diff * diff).sum()))
    raise ValueError(f"unknown cost mode {mode!r}; expected one of {COST_MODES}")


@dataclass(frozen=True)
class WarpingPath:
    """Optimal alignment between two sequences, 1-based index pairs."""

    steps: tuple[tuple[int, int], ...]
    psi: int
    n_x: int
    n_y: int

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("a warping path needs at least one step")
        self.validate()

    @property
    def length(self) -> int:
        return len(self.steps)

    def validate(self) -> None:
        """Check the boundary, monotonicity, and step-size conditions."""
        first, last = self.steps[0], self.steps[-1]
        start_ok = (first[1] == 1 and 1 <= first[0] <= self.psi + 1) or (
            first[0] == 1 and 1 <= first[1] <= self.psi + 1
        )
        end_ok = (last[1] == self.n_y and last[0] >= self.n_x - self.psi) or (
            last[0] == self.n_x and last[1] >= self.n_y - self.psi
        )
        if not start_ok:
            raise ValueError(f"path start {first} violates the psi={self.psi} boundary condition")
        if not end_ok:
            raise ValueError(f"path end {last} violates the psi={self.psi} boundary condition")
        for (i0, j0), (i1, j1) in zip(self.steps, self.steps[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ValueError(f"illegal step from ({i0},{j0}) to ({i1},{j1})")
        for i, j in self.steps:
            if not (1 <= i <= self.n_x and 1 <= j <= self.n_y):
                raise ValueError(f"step ({i},{j}) outside the [1,{self.n_x}]x[1,{self.n_y}] grid")


def warping_amount(path: WarpingPath, normalized: bool = False) -> float:
    """Count of non-diagonal steps along a path, optionally divided by L."""
    count = sum(
        1
        for (i0, j0), (i1, j1) in zip(path.steps, path.steps[1:])
        if (i1 - i0, j1 - j0) != (1, 1)
    )
    return count / path.length if normalized else float(count)


def _accumulate_py(cost_sq: np.ndarray, psi: int) -> np.ndarray:
    n, m = cost_sq.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0:psi + 1] = 0.0
    acc[0:psi + 1, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost_sq[i - 1, j - 1] + best
    return acc


try:  # JIT makes the O(n*m) recurrence usable on multi-thousand-sample pairs
    from numba import njit

    _accumulate = njit(cache=True)(_accumulate_py)
except ImportError:  # pragma: no cover
    _accumulate = _accumulate_py


def _pick_end(acc: np.ndarray, psi: int) -> tuple[int, int]:
    """End cell with minimal accumulated cost; ties prefer the smaller skip,
    then the end on the last row (full x, skipped y)."""
    n = acc.shape[0] - 1
    m = acc.shape[1] - 1
    best_i, best_j = n, m
    best = acc[n, m]
    for d in range(1, psi + 1):
        for i, j in ((n, m - d), (n - d, m)):
            if i < 1 or j < 1:
                continue
            if acc[i, j] < best:
                best, best_i, best_j = acc[i, j], i, j
    return best_i, best_j


def _backtrack(acc: np.ndarray, end: tuple[int, int]) -> list[tuple[int, int]]:
    i, j = end
    steps = [(i, j)]
    while True:
        # The predecessor is whichever neighbour minimizes the accumulated
        # cost (acc[i,j] = cost + min of the three by construction). Ties
        # prefer the diagonal, then the (0,1) step, then (1,0).
        diag = acc[i - 1, j - 1]
        left = acc[i, j - 1]
        up = acc[i - 1, j]
        best = min(diag, left, up)
        if diag == best:
            i, j = i - 1, j - 1
        elif left == best:
            j = j - 1
        else:
            i = i - 1
        if i == 0 or j == 0:
            break
        steps.append((i, j))
    steps.reverse()
    return steps


def dtw(
    x: Series,
    y: Series,
    psi: int = 0,
    mode: str = "diff_norm",
) -> tuple[float, WarpingPath]:
    """Boundary-relaxed DTW dissimilarity and its optimal warping path.

    Returns ``sqrt(sum of squared pointwise costs)`` minimised over all
    admissible paths. Among equally cheap backtracking choices the diagonal
    step is preferred, then (0,1), then (1,0), which keeps the reported
    warping amount deterministic.
    """
    xs, ys = _as_points(x), _as_points(y)
    n, m = xs.shape[0], ys.shape[0]
    if psi < 0:
        raise PsiTooLarge(f"psi must be non-negative, got {psi}")
    if psi >= min(n, m):
        raise PsiTooLarge(f"psi={psi} must be smaller than both lengths ({n}, {m})")
    cost_sq = _cost_sq_matrix(xs, ys, mode)
    acc = _accumulate(cost_sq, psi)
    end = _pick_end(acc, psi)
    steps = _backtrack(acc, end)
    value = float(np.sqrt(acc[end]))
    return value, WarpingPath(tuple(steps), psi=psi, n_x=n, n_y=m)


def harmonic_feature(
    series: Series,
    k: int = 3,
    half_window_hz: float = 5.0,
    fundamental_hz: float | None = None,
    log_floor: float | None = None,
) -> float:
    """Amplitude of the k-th harmonic of a single machine's signal.

    The fundamental defaults to the highest spectral peak. With ``log_floor``
    set, the spectrum is log-scaled and min/max normalized before the peak
    search, which removes per-machine amplitude scaling.
    """
    spectrum = fft_magnitude(series)
    if log_floor is not None:
        spectrum = log_scale(spectrum, log_floor)
        amps = spectrum.amplitudes
        lo, hi = amps.min(), amps.max()
        if hi - lo > 0:
            spectrum = Spectrum((amps - lo) / (hi - lo), spectrum.bin_hz)
    if fundamental_hz is None:
        fundamental_hz = estimate_fundamental(spectrum)
    return harmonic_amplitude(spectrum, fundamental_hz, k, half_window_hz)


def harmonic_diff(
    x: Series,
    y: Series,
    k: int = 3,
    half_window_hz: float = 5.0,
    log_floor: float | None = None,
) -> float:
    """Absolute difference of the two machines' k-th harmonic amplitudes.

    Each machine's fundamental is estimated from its own spectrum.
    """
    ax = harmonic_feature(x, k, half_window_hz, log_floor=log_floor)
    ay = harmonic_feature(y, k, half_window_hz, log_floor=log_floor)
    return abs(ax - ay)


def feature_euclidean(x, y) -> float:
    """Euclidean distance between two feature vectors (n=1 sequences)."""
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.size != yv.size:
        raise DimensionMismatch(f"feature vectors have lengths {xv.size} and {yv.size}")
    return float(np.linalg.norm(xv - yv))


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric pairwise dissimilarities for one analysis window."""

    machine_ids: tuple[str, ...]
    values: np.ndarray
    measure_tag: str = ""

    def __post_init__(self) -> None:
        ids = tuple(self.machine_ids)
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        n = len(ids)
        if len(set(ids)) != n:
            raise ValueError("machine ids must be unique")
        if arr.shape != (n, n):
            raise ValueError(f"matrix shape {arr.shape} does not match {n} machines")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix contains NaN or infinite values")
        if not np.allclose(arr, arr.T, rtol=0, atol=0):
            raise ValueError("matrix is not symmetric")
        if np.any(np.diagonal(arr) != 0):
            raise ValueError("matrix diagonal must be zero")
        if np.any(arr < 0):
            raise ValueError("matrix values must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "machine_ids", ids)
        object.__setattr__(self, "values", arr)

    @property
    def size(self) -> int:
        return len(self.machine_ids)

    def value(self, a: str, b: str) -> float:
        i, j = self.machine_ids.index(a), self.machine_ids.index(b)
        return float(self.values[i, j])

    def restrict(self, ids) -> "DissimilarityMatrix":
        """Submatrix over a subset of machines, original order preserved."""
        keep = [i for i, mid in enumerate(self.machine_ids) if mid in set(ids)]
        sub_ids = tuple(self.machine_ids[i] for i in keep)
        return DissimilarityMatrix(sub_ids, self.values[np.ix_(keep, keep)], self.measure_tag)

    def condensed(self) -> np.ndarray:
        """Upper-triangle values in row-major pair order."""
        iu = np.triu_indices(self.size, k=1)
        return self.values[iu]


def build_matrix(
    window,
    measure: Callable[[object, object], float],
    measure_tag: str = "",
) -> DissimilarityMatrix:
    """Evaluate the measure once per machine pair and assemble the matrix.

    Accepts a ``FleetWindow`` or any mapping machine-id -> representation.
    Pair evaluations are independent, so callers may parallelize them; the
    sequential result is the contract.
    """
    items: Mapping[str, object] = getattr(window, "series_by_machine", window)
    ids = tuple(items)
    if len(ids) < 2:
        raise ValueError("need at least two machines to build a matrix")
    n = len(ids)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(measure(items[ids[i]], items[ids[j]]))
            values[i, j] = values[j, i] = d
    return DissimilarityMatrix(ids, values, measure_tag)
