"""Re-referencing, filtering, decimation and peak-to-peak trial rejection.

The chain runs in a fixed order: common average reference and bandpass on
the continuous signal, then downsampling, epoching and rejection.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, asdict, field

import numpy as np
from scipy import signal

from .core import (
    DEFAULT_WINDOW_MS,
    EpochSet,
    EventMarker,
    Recording,
    extract_epochs,
    load_mapping,
    window_samples,
)
from .errors import (
    AllRejected,
    ConfigError,
    NonIntegerFactor,
    SingleChannel,
    UnstableDesign,
)


@dataclass(frozen=True)
class PreprocessConfig:
    band_hz: tuple = (0.5, 20.0)
    target_rate_hz: float = 250.0
    p2p_reject_uv: float = 100.0
    filter_order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "band_hz", tuple(float(b) for b in self.band_hz))
        low, high = self.band_hz
        if not 0 < low < high:
            raise ConfigError(f"passband edges must satisfy 0 < low < high, got {self.band_hz}")
        if high >= self.target_rate_hz / 2:
            raise UnstableDesign(
                f"high edge {high} Hz is at or above the output Nyquist "
                f"frequency {self.target_rate_hz / 2} Hz")
        if self.p2p_reject_uv <= 0:
            raise ConfigError(f"p2p_reject_uv must be positive, got {self.p2p_reject_uv}")
        if self.filter_order < 2 or self.filter_order % 2:
            raise ConfigError(f"filter_order must be even and >= 2, got {self.filter_order}")

    @classmethod
    def from_mapping(cls, mapping):
        known = {k: v for k, v in mapping.items() if k in cls.__dataclass_fields__}
        unknown = set(mapping) - set(known)
        if unknown:
            raise ConfigError(f"unknown preprocess config keys: {sorted(unknown)}")
        return cls(**known)

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(load_mapping(path))

    def to_dict(self):
        d = asdict(self)
        d["band_hz"] = list(self.band_hz)
        return d


def _channel_axis(x):
    return 0 if isinstance(x, Recording) else 1


def common_average_reference(x):
    """Subtract the instantaneous mean over channels (Recording or EpochSet)."""
    axis = _channel_axis(x)
    data = x.data
    if data.shape[axis] < 2:
        raise SingleChannel("common average reference needs at least two channels")
    return x.with_data(data - data.mean(axis=axis, keepdims=True))


def design_bandpass(band_hz, rate_hz, order=4):
    """Butterworth bandpass as second-order sections.

    ``order`` is the order of the lowpass prototype, as in
    ``scipy.signal.butter(order, band, "bandpass")``.
    """
    low, high = band_hz
    nyq = rate_hz / 2.0
    if not 0 < low < high < nyq:
        raise UnstableDesign(
            f"band {band_hz} Hz not strictly inside (0, {nyq}) Hz at {rate_hz} Hz")
    sos = signal.butter(order, [low, high], btype="bandpass", fs=rate_hz, output="sos")
    _, poles, _ = signal.sos2zpk(sos)
    if not np.all(np.abs(poles) < 1.0 - 1e-12) or not np.isfinite(sos).all():
        raise UnstableDesign(f"bandpass {band_hz} Hz at {rate_hz} Hz is numerically unstable")
    return sos


def bandpass(x, cfg: PreprocessConfig = PreprocessConfig()):
    """Zero-phase (forward-backward) Butterworth bandpass along time."""
    if x.rate_hz <= 2 * cfg.band_hz[1]:
        raise UnstableDesign(
            f"input rate {x.rate_hz} Hz too low for a {cfg.band_hz[1]} Hz high edge")
    sos = design_bandpass(cfg.band_hz, x.rate_hz, cfg.filter_order)
    n_t = x.data.shape[-1]
    # odd reflection padding; shorter signals get the longest pad they allow
    padlen = min(3 * (2 * len(sos) + 1), n_t - 1)
    out = signal.sosfiltfilt(sos, x.data, axis=-1, padtype="odd", padlen=padlen)
    return x.with_data(out)


def decimation_factor(rate_hz, target_rate_hz):
    ratio = rate_hz / target_rate_hz
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise NonIntegerFactor(
            f"{rate_hz} Hz is not an integer multiple of {target_rate_hz} Hz")
    return k


def downsample(x, target_rate_hz):
    """Keep every k-th sample, k = rate / target rate.

    No anti-alias filter is applied here; the bandpass step must already
    have removed content above the target Nyquist frequency.
    """
    k = decimation_factor(x.rate_hz, target_rate_hz)
    if k == 1:
        return x
    if isinstance(x, Recording):
        data = x.data[:, ::k]
        n = data.shape[1]
        events = tuple(EventMarker(min(int(round(e.sample_index / k)), n - 1), e.label)
                       for e in x.events)
        return x.with_data(data, rate_hz=x.rate_hz / k, events=events)
    rate = x.rate_hz / k
    data = x.data[:, :, ::k][:, :, :window_samples(x.window_ms, rate)]
    return x.with_data(data, rate_hz=rate)


@dataclass
class RejectionReport:
    threshold_uv: float
    retained: dict = field(default_factory=dict)
    rejected: dict = field(default_factory=dict)
    rejected_indices: list = field(default_factory=list)

    @property
    def total_retained(self):
        return sum(self.retained.values())

    @property
    def total_rejected(self):
        return sum(self.rejected.values())

    def rows(self):
        cats = list(dict.fromkeys(list(self.retained) + list(self.rejected)))
        return [(c, self.retained.get(c, 0), self.rejected.get(c, 0)) for c in cats]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["category", "retained", "rejected"])
            w.writerows(self.rows())
        return path

    def to_dict(self):
        return {"threshold_uv": self.threshold_uv, "retained": dict(self.retained),
                "rejected": dict(self.rejected),
                "rejected_indices": list(self.rejected_indices)}


def peak_to_peak(es: EpochSet):
    """Largest over channels of (max - min over time), one value per epoch."""
    if len(es) == 0:
        return np.zeros(0)
    return np.ptp(es.data, axis=2).max(axis=1)


def reject_artifacts(es: EpochSet, p2p_reject_uv=100.0):
    """Drop every epoch whose peak-to-peak amplitude exceeds the threshold."""
    if p2p_reject_uv <= 0:
        raise ConfigError(f"threshold must be positive, got {p2p_reject_uv}")
    bad = peak_to_peak(es) > p2p_reject_uv
    report = RejectionReport(float(p2p_reject_uv))
    for lab, b in zip(es.labels, bad):
        report.retained.setdefault(lab, 0)
        report.rejected.setdefault(lab, 0)
        if b:
            report.rejected[lab] += 1
        else:
            report.retained[lab] += 1
    report.rejected_indices = np.flatnonzero(bad).tolist()
    if len(es) and bad.all():
        warnings.warn(f"all {len(es)} epochs exceed {p2p_reject_uv} uV peak-to-peak",
                      AllRejected, stacklevel=2)
    return (es if not bad.any() else es.select(~bad)), report


def preprocess_recording(rec: Recording, cfg: PreprocessConfig = PreprocessConfig(),
                         window_ms=DEFAULT_WINDOW_MS, baseline_ms=None):
    """CAR -> bandpass -> downsample -> epoch -> reject on continuous data."""
    x = common_average_reference(rec)
    x = bandpass(x, cfg)
    x = downsample(x, cfg.target_rate_hz)
    es = extract_epochs(x, window_ms, baseline_ms=baseline_ms)
    return reject_artifacts(es, cfg.p2p_reject_uv)


def preprocess_epochs(es: EpochSet, cfg: PreprocessConfig = PreprocessConfig()):
    """Same chain applied epoch by epoch, for data only available pre-cut.

    Filtering short epochs is less accurate than filtering the continuous
    signal; prefer :func:`preprocess_recording` when a recording exists.
    """
    x = common_average_reference(es)
    x = bandpass(x, cfg)
    x = downsample(x, cfg.target_rate_hz)
    return reject_artifacts(x, cfg.p2p_reject_uv)


def rejection_table(reports, categories=None, standard="STANDARD"):
    """Participant x category retained-trial counts, standards last."""
    if categories is None:
        seen = {}
        for rep in reports.values():
            for c in rep.retained:
                if c != standard:
                    seen.setdefault(c, None)
        categories = list(seen) + [standard]
    rows = [["participant"] + list(categories)]
    for pid, rep in reports.items():
        rows.append([pid] + [rep.retained.get(c, 0) for c in categories])
    return rows
