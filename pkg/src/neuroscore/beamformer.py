"""LDA beamformer: minimum-variance spatial filter with unit gain on a pattern.

For a difference pattern ``p`` and covariance ``sigma`` the filter solves

    minimise  w' sigma w   subject to  w' p = 1

whose closed form is ``w = sigma^-1 p / (p' sigma^-1 p)``. The latency
search refits ``p`` at every sample of a window and keeps the latency with
the smallest objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .core import EpochSet
from .errors import (
    DegeneratePattern,
    EmptyGroup,
    FormatError,
    ShapeMismatch,
    SingularCovariance,
    TimeOutOfEpoch,
)

RIDGE = 1e-6
DEFAULT_SEARCH_MS = (400.0, 600.0)


@dataclass(frozen=True)
class SpatialFilter:
    w: np.ndarray
    pattern: np.ndarray
    objective: float
    t_optimal_ms: float = float("nan")
    sigma: np.ndarray = field(default=None, repr=False)
    channel_names: tuple = ()

    @property
    def gain(self):
        return float(self.w @ self.pattern)

    def to_dict(self):
        return {
            "weights": self.w.tolist(),
            "pattern": self.pattern.tolist(),
            "t_optimal_ms": self.t_optimal_ms,
            "objective": self.objective,
            "channel_names": list(self.channel_names),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.asarray(d["weights"], float), np.asarray(d["pattern"], float),
                       float(d["objective"]), float(d["t_optimal_ms"]),
                       channel_names=tuple(d.get("channel_names", ())))
        except KeyError as exc:
            raise FormatError(f"spatial filter JSON lacks field {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SourceSignal:
    values: np.ndarray
    rate_hz: float
    label: str
    times_ms: np.ndarray = field(default=None, repr=False)


def _as_array(x):
    return x.data if isinstance(x, EpochSet) else np.asarray(x, dtype=float)


def pooled_covariance(targets, standards, ridge=RIDGE):
    """Mean target second moment plus mean standard second moment, ridged.

    Outer products are not mean-removed. A ridge of ``ridge * trace / C``
    on the diagonal keeps the matrix invertible after re-referencing.
    """
    X, K = _as_array(targets), _as_array(standards)
    if X.shape[0] == 0 or K.shape[0] == 0:
        raise EmptyGroup(f"need >=1 target and >=1 standard epoch, got "
                         f"{X.shape[0]} and {K.shape[0]}")
    if X.shape[1:] != K.shape[1:]:
        raise ShapeMismatch(f"target shape {X.shape[1:]} != standard shape {K.shape[1:]}")
    sigma = (np.tensordot(X, X, axes=([0, 2], [0, 2])) / X.shape[0]
             + np.tensordot(K, K, axes=([0, 2], [0, 2])) / K.shape[0])
    sigma = 0.5 * (sigma + sigma.T)
    c = sigma.shape[0]
    sigma[np.diag_indices(c)] += ridge * np.trace(sigma) / c
    return sigma


def difference_pattern(targets, standards, t_ms=None, column=None):
    """Mean target column minus mean standard column at one latency."""
    if column is None:
        if not isinstance(targets, EpochSet):
            raise TypeError("t_ms needs an EpochSet; pass column= for raw arrays")
        column = targets.column(t_ms)
    X, K = _as_array(targets), _as_array(standards)
    if not 0 <= column < X.shape[2]:
        raise TimeOutOfEpoch(f"column {column} outside epoch of length {X.shape[2]}")
    return X[:, :, column].mean(axis=0) - K[:, :, column].mean(axis=0)


def _factor(sigma):
    try:
        return linalg.cho_factor(sigma, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance is not positive definite: {exc}") from exc


def _channel_scale(sigma):
    return np.sqrt(max(np.trace(sigma) / sigma.shape[0], np.finfo(float).tiny))


def _solve(sigma, factor, pattern):
    if np.linalg.norm(pattern) <= 1e-9 * _channel_scale(sigma):
        raise DegeneratePattern(
            "difference pattern is numerically zero; targets and standards do not separate")
    z = linalg.cho_solve(factor, pattern)
    q = pattern @ z
    if not np.isfinite(q) or q <= 0:
        raise SingularCovariance(f"p' inv(sigma) p = {q} is not positive")
    w = z / q
    return w, float(w @ sigma @ w)


def solve_filter(sigma, pattern):
    """Closed-form minimum-variance unit-gain filter."""
    sigma = np.asarray(sigma, dtype=float)
    pattern = np.asarray(pattern, dtype=float)
    if sigma.shape != (pattern.size, pattern.size):
        raise ShapeMismatch(f"sigma {sigma.shape} does not match pattern length {pattern.size}")
    w, j = _solve(sigma, _factor(sigma), pattern)
    return SpatialFilter(w, pattern.copy(), j, sigma=sigma)


def optimal_latency_search(targets: EpochSet, standards: EpochSet,
                           search_ms=DEFAULT_SEARCH_MS, sigma=None):
    """Fit a filter at every sample in ``search_ms`` and keep the minimum objective.

    Ties go to the earliest latency. Latencies with a degenerate pattern are
    skipped; if every latency degenerates the error propagates.
    """
    lo, hi = search_ms
    if lo > hi:
        raise ValueError(f"empty search interval {search_ms}")
    times = targets.times_ms
    cols = np.flatnonzero((times >= lo - 1e-9) & (times <= hi + 1e-9))
    if cols.size == 0 or lo < targets.window_ms[0] or hi > targets.window_ms[1]:
        raise TimeOutOfEpoch(f"search interval {search_ms} outside epoch {targets.window_ms}")
    if sigma is None:
        sigma = pooled_covariance(targets, standards)
    factor = _factor(sigma)

    mean_t = targets.data[:, :, cols].mean(axis=0)
    mean_s = standards.data[:, :, cols].mean(axis=0)
    best = None
    for j, col in enumerate(cols):
        p = mean_t[:, j] - mean_s[:, j]
        try:
            w, obj = _solve(sigma, factor, p)
        except DegeneratePattern:
            continue
        if best is None or obj < best[2]:
            best = (col, w, obj, p)
    if best is None:
        raise DegeneratePattern(
            f"difference pattern is zero at every latency in {search_ms} ms")
    col, w, obj, p = best
    return SpatialFilter(w, p, obj, float(times[col]), sigma=sigma,
                         channel_names=targets.channel_names)


def latency_objectives(targets: EpochSet, standards: EpochSet, search_ms=DEFAULT_SEARCH_MS):
    """Objective at every searched latency, as (times_ms, J); NaN where degenerate."""
    sigma = pooled_covariance(targets, standards)
    factor = _factor(sigma)
    times = targets.times_ms
    cols = np.flatnonzero((times >= search_ms[0] - 1e-9) & (times <= search_ms[1] + 1e-9))
    out = np.full(cols.size, np.nan)
    for j, col in enumerate(cols):
        try:
            out[j] = _solve(sigma, factor, difference_pattern(targets, standards, column=col))[1]
        except DegeneratePattern:
            pass
    return times[cols], out


def project_data(X, w):
    """``w' X`` over the channel axis of a (..., channels, time) array."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(getattr(w, "w", w), dtype=float)
    if X.ndim < 2 or X.shape[-2] != w.size:
        raise ShapeMismatch(f"filter has {w.size} weights, epoch shape {X.shape}")
    return np.einsum("c,...ct->...t", w, X)


def project(epoch, filt: SpatialFilter, rate_hz=float("nan"), label=""):
    """Reconstructed source signal of a single epoch.

    ``epoch`` may be an :class:`~neuroscore.core.Epoch` or a channels x time
    array.
    """
    label = getattr(epoch, "label", label)
    values = project_data(getattr(epoch, "data", epoch), filt)
    if values.ndim != 1:
        raise ShapeMismatch(f"expected one epoch, got data of shape {np.shape(epoch)}")
    times = None
    if hasattr(epoch, "onset_offset_ms") and np.isfinite(rate_hz):
        times = epoch.onset_offset_ms + 1000.0 * np.arange(values.size) / rate_hz
    return SourceSignal(values, rate_hz, label, times)
