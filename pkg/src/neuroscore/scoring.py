"""Neuroscore: beamformed single-trial P300 amplitudes averaged per category."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .beamformer import (
    DEFAULT_SEARCH_MS,
    SourceSignal,
    SpatialFilter,
    optimal_latency_search,
    project_data,
)
from .core import STANDARD, EpochSet, ScoreTable
from .errors import EmptyGroup, InsufficientTrials, ShapeMismatch, WindowClipped

HALF_WINDOW_MS = 100.0


@dataclass(frozen=True)
class NeuroscoreResult:
    per_category: dict
    per_trial_amplitudes: dict = field(repr=False)
    t_p300_ms: tuple
    filter_ref: object = field(repr=False)

    def to_dict(self):
        if isinstance(self.filter_ref, SpatialFilter):
            filt = self.filter_ref.to_dict()
        else:
            filt = {c: f.to_dict() for c, f in self.filter_ref.items()}
        return {
            "per_category": {c: float(v) for c, v in self.per_category.items()},
            "per_trial_amplitudes": {c: np.asarray(v).tolist()
                                     for c, v in self.per_trial_amplitudes.items()},
            "t_p300_ms": list(self.t_p300_ms),
            "filter": filt,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))
        return path


def p300_window(t_optimal_ms, epoch_window_ms, half_width_ms=HALF_WINDOW_MS):
    """The 200 ms detection window centred on the optimal latency.

    Truncated to the epoch with a :class:`WindowClipped` warning.
    """
    lo, hi = t_optimal_ms - half_width_ms, t_optimal_ms + half_width_ms
    clo, chi = max(lo, epoch_window_ms[0]), min(hi, epoch_window_ms[1])
    if (clo, chi) != (lo, hi):
        warnings.warn(f"P300 window [{lo}, {hi}] ms clipped to epoch: [{clo}, {chi}] ms",
                      WindowClipped, stacklevel=2)
    return clo, chi


def _window_columns(times_ms, window_ms):
    cols = np.flatnonzero((times_ms >= window_ms[0] - 1e-9) & (times_ms <= window_ms[1] + 1e-9))
    if cols.size == 0:
        raise ShapeMismatch(f"window {window_ms} contains no samples")
    return cols


def single_trial_amplitude(epoch, filt: SpatialFilter, window_ms, rate_hz, onset_ms=None):
    """Maximum of the projected source inside ``window_ms``."""
    data = np.asarray(getattr(epoch, "data", epoch), dtype=float)
    if onset_ms is None:
        onset_ms = getattr(epoch, "onset_offset_ms", 0.0)
    times = onset_ms + 1000.0 * np.arange(data.shape[-1]) / rate_hz
    if window_ms[0] < times[0] - 1e-9 or window_ms[1] > times[-1] + 1000.0 / rate_hz:
        raise ShapeMismatch(f"window {window_ms} is outside the epoch")
    s = project_data(data, filt)
    return float(s[_window_columns(times, window_ms)].max())


def _trial_amplitudes(data, filt, times, window):
    s = project_data(data, filt)
    return s[:, _window_columns(times, window)].max(axis=1)


def _target_categories(es, categories, standard):
    present = [c for c in es.categories if c != standard]
    if categories is None:
        return present
    missing = [c for c in categories if c not in present]
    if missing:
        warnings.warn(f"no target epochs for categories {missing}; omitted",
                      InsufficientTrials, stacklevel=3)
    return [c for c in categories if c in present]


def compute_neuroscore(es: EpochSet, categories: Sequence[str] = None, standard=STANDARD,
                       search_ms=DEFAULT_SEARCH_MS, half_width_ms=HALF_WINDOW_MS,
                       filt: SpatialFilter = None, per_category_filter=False):
    """Run the full scoring algorithm on one participant's epochs.

    One filter is fitted on all target categories pooled against the
    standards, unless ``per_category_filter`` asks for a refit per category
    or a precomputed ``filt`` is supplied.
    """
    cats = _target_categories(es, categories, standard)
    standards = es.select(es.mask(standard))
    if not cats or len(standards) == 0:
        raise EmptyGroup(
            f"need >=1 target and >=1 {standard} epoch (targets {cats}, "
            f"{len(standards)} standards)")
    times = es.times_ms

    if per_category_filter and filt is None:
        filters, windows, amps = {}, {}, {}
        for c in cats:
            targ = es.select(es.mask(c))
            f = optimal_latency_search(targ, standards, search_ms)
            win = p300_window(f.t_optimal_ms, es.window_ms, half_width_ms)
            filters[c], windows[c] = f, win
            amps[c] = _trial_amplitudes(targ.data, f, times, win)
        scores = {c: float(np.mean(a)) for c, a in amps.items()}
        return NeuroscoreResult(scores, amps, windows, filters)

    if filt is None:
        filt = optimal_latency_search(es.select(es.mask(cats)), standards, search_ms)
    elif filt.w.size != es.n_channels:
        raise ShapeMismatch(f"filter has {filt.w.size} weights for {es.n_channels} channels")
    window = p300_window(filt.t_optimal_ms, es.window_ms, half_width_ms)
    amps = {c: _trial_amplitudes(es.data[es.mask(c)], filt, times, window) for c in cats}
    scores = {c: float(np.mean(a)) for c, a in amps.items()}
    return NeuroscoreResult(scores, amps, window, filt)


def reconstructed_averaged_signal(es: EpochSet, filt: SpatialFilter, standard=STANDARD,
                                  categories=None):
    """Per-category mean projected target minus mean projected standard.

    The standard entry holds the plain mean projected standard signal.
    """
    cats = _target_categories(es, categories, standard)
    smask = es.mask(standard)
    if not smask.any():
        raise EmptyGroup(f"no {standard} epochs")
    std_mean = project_data(es.data[smask], filt).mean(axis=0)
    out = {}
    for c in cats:
        diff = project_data(es.data[es.mask(c)], filt).mean(axis=0) - std_mean
        out[c] = SourceSignal(diff, es.rate_hz, c, es.times_ms)
    out[standard] = SourceSignal(std_mean, es.rate_hz, standard, es.times_ms)
    return out


def write_signals_csv(signals: Mapping[str, SourceSignal], path, standard=STANDARD):
    cats = [c for c in signals if c != standard]
    times = signals[cats[0]].times_ms
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ms"] + cats)
        for k, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(signals[c].values[k])) for c in cats])
    return path


def category_channel_values(es: EpochSet, t_ms, standard=STANDARD, categories=None):
    """Per-trial channel values at one latency, grouped by target category.

    Feeds the per-channel ANOVA topography.
    """
    col = es.column(t_ms)
    cats = _target_categories(es, categories, standard)
    return {c: es.data[es.mask(c), :, col] for c in cats}


def averaged_topography(es: EpochSet, t_ms, standard=STANDARD):
    """Mean target minus mean standard scalp map at one latency, per category."""
    col = es.column(t_ms)
    std = es.data[es.mask(standard), :, col].mean(axis=0)
    return {c: es.data[es.mask(c), :, col].mean(axis=0) - std
            for c in _target_categories(es, None, standard)}


@dataclass(frozen=True)
class ScoreSummary:
    table: ScoreTable
    means: dict
    reciprocal_means: dict
    medians: dict


def summarize_table(table: ScoreTable):
    means = table.column_means()
    return ScoreSummary(table, means, {c: 1.0 / m for c, m in means.items()},
                        table.column_medians())


def aggregate_scores(per_participant):
    """Participant x category table with column means and reciprocal means.

    Accepts a mapping ``participant -> NeuroscoreResult`` or a sequence
    (participants numbered from 1).
    """
    if not isinstance(per_participant, Mapping):
        per_participant = {str(i + 1): r for i, r in enumerate(per_participant)}
    rows = {p: r.per_category for p, r in per_participant.items()}
    return summarize_table(ScoreTable.from_mapping(rows))
