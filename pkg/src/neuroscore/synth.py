"""Synthetic RSVP EEG with category-dependent P300 amplitudes.

Forward model: each target trial adds ``amplitude * pattern * template(t)``
to the scalp signal, where ``template`` is a unit Gaussian bump and
``pattern`` a spatial map concentrated on posterior channels. Standards
carry amplitude 0. Background activity is spatially mixed pink noise, a
10 Hz rhythm with a random phase per channel, and white sensor noise.

Every random draw comes from a substream of ``SeedSequence([seed,
participant])``, so a spec plus participant index fixes the output exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from .core import (
    STANDARD,
    EpochSet,
    EventMarker,
    Recording,
    load_mapping,
    window_samples,
)
from .errors import InvalidSpec

CHANNELS_32 = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6",
    "T7", "C3", "Cz", "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10",
    "P7", "P3", "Pz", "P4", "P8", "PO9", "O1", "Oz", "O2", "PO10",
)
POSTERIOR_32 = ("CP1", "CP2", "P7", "P3", "Pz", "P4", "P8", "PO9", "O1", "Oz", "O2", "PO10")
CENTRAL_32 = ("CP5", "CP6", "C3", "Cz", "C4")
FRONTAL_32 = ("Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8")
EYE_32 = ("Fp1", "Fp2")

# Neuroscore means per category from the reference study's participant table
TABLE3_AMPLITUDES = {"DCGAN": 0.583, "BEGAN": 0.676, "PROGAN": 0.837, "RFACE": 0.757}

_STREAMS = ("pattern", "mixing", "schedule", "jitter", "pink", "rhythm")


@dataclass(frozen=True)
class SynthSpec:
    n_channels: int = 32
    channel_names: tuple = CHANNELS_32
    posterior_channels: tuple = POSTERIOR_32
    frontal_channels: tuple = FRONTAL_32
    rate_hz: float = 500.0
    window_ms: tuple = (0.0, 1000.0)
    template_latency_ms: float = 450.0
    template_fwhm_ms: float = 150.0
    latency_jitter_ms: float = 0.0
    pattern: tuple = None
    pattern_scale_uv: float = 10.0
    category_amplitudes: dict = field(default_factory=lambda: dict(TABLE3_AMPLITUDES))
    amplitude_jitter: float = 0.2
    pink_exponent: float = 1.0
    pink_uv: float = 8.0
    mixing: tuple = None
    mixing_floor: float = 0.05
    alpha_uv: float = 3.0
    alpha_hz: float = 10.0
    white_uv: float = 1.0
    n_blocks: int = 20
    targets_per_category: int = 6
    standards_per_block: int = 216
    presentation_hz: float = 4.0
    lead_ms: float = 1000.0
    tail_ms: float = 1500.0
    n_participants: int = 12
    seed: int = 0

    def __post_init__(self):
        names = tuple(self.channel_names) if self.channel_names else ()
        if self.n_channels < 2:
            raise InvalidSpec("need at least two channels")
        if len(names) != self.n_channels:
            if not names or self.channel_names == CHANNELS_32:
                names = tuple(f"E{i + 1}" for i in range(self.n_channels))
            else:
                raise InvalidSpec(f"{len(names)} channel names for {self.n_channels} channels")
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "window_ms", tuple(float(w) for w in self.window_ms))
        object.__setattr__(self, "category_amplitudes",
                           {str(k): float(v) for k, v in self.category_amplitudes.items()})
        for attr in ("posterior_channels", "frontal_channels"):
            object.__setattr__(self, attr, tuple(getattr(self, attr) or ()))
        if self.pattern is not None:
            object.__setattr__(self, "pattern", tuple(float(v) for v in self.pattern))
        if self.mixing is not None:
            object.__setattr__(self, "mixing", tuple(tuple(float(v) for v in row)
                                                     for row in self.mixing))
        self.validate()

    def validate(self):
        if self.rate_hz <= 0 or self.presentation_hz <= 0:
            raise InvalidSpec("rates must be positive")
        if self.presentation_hz > self.rate_hz:
            raise InvalidSpec("presentation rate exceeds the sampling rate")
        if not self.window_ms[0] < self.window_ms[1]:
            raise InvalidSpec(f"empty epoch window {self.window_ms}")
        if not self.window_ms[0] <= self.template_latency_ms <= self.window_ms[1]:
            raise InvalidSpec("template peak latency lies outside the epoch window")
        if self.template_fwhm_ms <= 0:
            raise InvalidSpec("template width must be positive")
        if any(a < 0 for a in self.category_amplitudes.values()):
            raise InvalidSpec("category amplitudes must be >= 0")
        if STANDARD in self.category_amplitudes:
            raise InvalidSpec(f"{STANDARD} is reserved for non-target trials")
        if self.pattern is not None and len(self.pattern) != self.n_channels:
            raise InvalidSpec("pattern length differs from channel count")
        for name in ("pattern_scale_uv", "amplitude_jitter", "pink_uv", "alpha_uv",
                     "white_uv", "latency_jitter_ms", "mixing_floor"):
            if getattr(self, name) < 0:
                raise InvalidSpec(f"{name} must be >= 0")
        if not 0 < self.mixing_floor <= 1:
            raise InvalidSpec("mixing_floor must be in (0, 1]")
        if self.mixing is not None:
            m = np.asarray(self.mixing)
            if m.shape[0] != self.n_channels or np.linalg.matrix_rank(m) < min(m.shape):
                raise InvalidSpec("mixing matrix must be n_channels x sources and full rank")
        for name in ("n_blocks", "n_participants"):
            if getattr(self, name) < 1:
                raise InvalidSpec(f"{name} must be >= 1")
        if self.targets_per_category < 0 or self.standards_per_block < 0:
            raise InvalidSpec("trial counts must be >= 0")

    # -- (de)serialisation

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(r) if isinstance(r, tuple) else r for r in v]
        return d

    @classmethod
    def from_mapping(cls, mapping):
        unknown = set(mapping) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown SynthSpec keys: {sorted(unknown)}")
        kw = dict(mapping)
        for k in ("channel_names", "posterior_channels", "frontal_channels", "window_ms",
                  "pattern"):
            if kw.get(k) is not None:
                kw[k] = tuple(kw[k])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(load_mapping(path))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))
        return path

    # -- derived quantities

    @property
    def categories(self):
        return tuple(self.category_amplitudes)

    @property
    def soa_samples(self):
        return int(round(self.rate_hz / self.presentation_hz))

    def template(self, t_ms):
        """Unit-peak Gaussian bump at the template latency."""
        sd = self.template_fwhm_ms / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        return np.exp(-0.5 * ((np.asarray(t_ms) - self.template_latency_ms) / sd) ** 2)


@dataclass
class GroundTruth:
    labels: tuple
    true_amplitude: np.ndarray
    latency_ms: np.ndarray
    contaminated: np.ndarray
    pattern: np.ndarray
    participant: int = 0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "label", "true_amplitude", "contaminated"])
            for i, (lab, a, c) in enumerate(zip(self.labels, self.true_amplitude,
                                                self.contaminated)):
                w.writerow([i, lab, repr(float(a)), int(bool(c))])
        return path

    @classmethod
    def from_csv(cls, path, pattern=None):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(r["label"] for r in rows),
                   np.array([float(r["true_amplitude"]) for r in rows]),
                   np.full(len(rows), np.nan),
                   np.array([r["contaminated"] in ("1", "True", "true") for r in rows]),
                   np.asarray(pattern) if pattern is not None else None)


def _streams(spec, participant):
    seqs = np.random.SeedSequence([int(spec.seed), int(participant)]).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, seqs)}


def spatial_pattern(spec: SynthSpec, rng=None, participant=0):
    """Scalp map of the P300 source in microvolts per unit amplitude."""
    if spec.pattern is not None:
        return np.asarray(spec.pattern, dtype=float) * spec.pattern_scale_uv
    rng = rng or _streams(spec, participant)["pattern"]
    names = spec.channel_names
    post = set(spec.posterior_channels) & set(names)
    if not post:
        post = set(names[-max(1, len(names) // 3):])
    central = set(CENTRAL_32) & set(names)
    shape = np.empty(spec.n_channels)
    for i, ch in enumerate(names):
        if ch in post:
            shape[i] = rng.uniform(0.4, 1.0)
        elif ch in central:
            shape[i] = rng.uniform(0.0, 0.3)
        else:
            shape[i] = rng.uniform(-0.1, 0.1)
    return spec.pattern_scale_uv * shape / np.abs(shape).max()


def mixing_matrix(spec: SynthSpec, rng=None, participant=0):
    """Full-rank channel x source mixing with a geometrically decaying spectrum."""
    if spec.mixing is not None:
        return np.asarray(spec.mixing, dtype=float)
    rng = rng or _streams(spec, participant)["mixing"]
    c = spec.n_channels
    u, _ = np.linalg.qr(rng.standard_normal((c, c)))
    v, _ = np.linalg.qr(rng.standard_normal((c, c)))
    s = np.geomspace(1.0, spec.mixing_floor, c)
    m = (u * s) @ v.T
    # unit mean per-channel variance
    return m / np.sqrt((m ** 2).sum(axis=1).mean())


def _spectral_shape(n_samples, rate_hz, exponent):
    f = np.fft.rfftfreq(n_samples, d=1.0 / rate_hz)
    h = np.zeros_like(f)
    h[1:] = f[1:] ** (-exponent / 2.0)
    return h


def _unit_variance(h, n_samples):
    # time-domain variance of irfft(h * (a + ib)) with a, b ~ N(0, 1)
    var = (4.0 * (h[1:] ** 2).sum() + h[0] ** 2) / n_samples ** 2
    return h / np.sqrt(var) if var > 0 else h


def _complex_normal(rng, shape):
    z = np.empty(shape, dtype=np.complex64)
    z.real = rng.standard_normal(shape, dtype=np.float32)
    z.imag = rng.standard_normal(shape, dtype=np.float32)
    return z


def pink_noise(rng, n_series, n_samples, exponent=1.0, rate_hz=1.0):
    """Unit-variance 1/f^exponent noise, one row per series.

    Drawn as random Fourier coefficients with a power-law amplitude, so the
    series are circular over ``n_samples``.
    """
    h = _unit_variance(_spectral_shape(n_samples, rate_hz, exponent), n_samples)
    z = _complex_normal(rng, (n_series, h.size)) * h.astype(np.float32)
    return sp_fft.irfft(z, n=n_samples, axis=-1).astype(float)


def _schedule(spec, rng):
    labels = []
    block = []
    for c in spec.categories:
        block += [c] * spec.targets_per_category
    block += [STANDARD] * spec.standards_per_block
    for _ in range(spec.n_blocks):
        order = list(block)
        rng.shuffle(order)
        labels += order
    return labels


def _amplitudes(spec, labels, rng):
    z = rng.standard_normal(len(labels))
    s = spec.amplitude_jitter
    factor = np.exp(s * z - 0.5 * s * s)
    base = np.array([spec.category_amplitudes.get(lab, 0.0) for lab in labels])
    return base * factor


def _pink_amplitude(spec, n_fft, n_ref):
    """Per-bin pink amplitude for an ``n_fft``-point draw.

    The spectral density is fixed so that a series of ``n_ref`` samples has
    variance ``pink_uv**2``; shorter draws then behave like crops of that
    series rather than carrying its whole variance in their few bins.
    """
    if n_ref <= n_fft:
        return spec.pink_uv * _unit_variance(
            _spectral_shape(n_fft, spec.rate_hz, spec.pink_exponent), n_fft)
    ref = _spectral_shape(n_ref, spec.rate_hz, spec.pink_exponent)
    k = _unit_variance(ref, n_ref)[1] / ref[1]
    return (spec.pink_uv * k * np.sqrt(n_fft / n_ref)
            * _spectral_shape(n_fft, spec.rate_hz, spec.pink_exponent))


def _background(spec, streams, n_samples, epochs=None, n_ref=0):
    """Pink + rhythm + white background, shape (channels, samples) or
    (epochs, channels, samples) when ``epochs`` is given.

    ``n_ref`` is the length at which the pink part has its nominal variance.
    """
    c = spec.n_channels
    lead = () if epochs is None else (epochs,)
    n_fft = sp_fft.next_fast_len(n_samples, real=True)
    n_freq = n_fft // 2 + 1
    # Mixed pink sources plus white noise have, per frequency, covariance
    # U diag(h^2 s^2 + w^2) U' where M = U S V'; so one draw of C complex
    # normals shaped by U diag(sqrt(.)) has exactly that distribution.
    if spec.pink_uv > 0 or spec.white_uv > 0:
        u, s = np.eye(c), np.zeros(c)
        if spec.pink_uv > 0:
            u, sv, _ = np.linalg.svd(mixing_matrix(spec, streams["mixing"]))
            s[:sv.size] = sv
        h = _pink_amplitude(spec, n_fft, n_ref)
        flat = spec.white_uv * _unit_variance(np.ones(n_freq), n_fft)
        scale = np.sqrt(np.outer(s ** 2, h ** 2) + flat ** 2).astype(np.float32)
        z = _complex_normal(streams["pink"], lead + (c, n_freq))
        z *= scale
        out = sp_fft.irfft(np.matmul(u.astype(np.complex64), z), n=n_fft,
                           axis=-1)[..., :n_samples].astype(float)
    else:
        out = np.zeros(lead + (c, n_samples))
    if spec.alpha_uv > 0:
        t = np.arange(n_samples) / spec.rate_hz
        phase = streams["rhythm"].uniform(0, 2 * np.pi, lead + (c, 1))
        # a sin(wt + phi) = a cos(phi) sin(wt) + a sin(phi) cos(wt)
        out += spec.alpha_uv * (np.cos(phase) * np.sin(2 * np.pi * spec.alpha_hz * t)
                                + np.sin(phase) * np.cos(2 * np.pi * spec.alpha_hz * t))
    return out


def generate(spec: SynthSpec = None, participant=0, kind="recording"):
    """Simulate one participant; returns ``(Recording | EpochSet, GroundTruth)``.

    ``kind="recording"`` produces a continuous RSVP stream at
    ``presentation_hz`` with overlapping responses; ``kind="epochs"``
    produces independent epochs with the same schedule, which is cheaper
    and skips the continuous-signal stages.
    """
    spec = spec or SynthSpec()
    streams = _streams(spec, participant)
    pattern = spatial_pattern(spec, streams["pattern"])
    labels = _schedule(spec, streams["schedule"])
    amps = _amplitudes(spec, labels, streams["jitter"])
    lat = np.full(len(labels), spec.template_latency_ms)
    if spec.latency_jitter_ms > 0:
        lat = lat + spec.latency_jitter_ms * streams["jitter"].standard_normal(len(labels))
    truth = GroundTruth(tuple(labels), amps, lat, np.zeros(len(labels), dtype=bool),
                        pattern, participant)

    n_t = window_samples(spec.window_ms, spec.rate_hz)
    epoch_times = spec.window_ms[0] + 1000.0 * np.arange(n_t) / spec.rate_hz
    shift = lat - spec.template_latency_ms

    soa = spec.soa_samples
    lead = int(round(spec.lead_ms * spec.rate_hz / 1000.0))
    tail = int(round(spec.tail_ms * spec.rate_hz / 1000.0))
    onsets = lead + soa * np.arange(len(labels))
    n_samples = int(onsets[-1] + tail + 1) if labels else lead + tail

    if kind == "epochs":
        # noise level matched to epochs cut from the equivalent recording
        data = _background(spec, streams, n_t, epochs=len(labels), n_ref=n_samples)
        for i in np.flatnonzero(amps > 0):
            data[i] += amps[i] * np.outer(pattern, spec.template(epoch_times - shift[i]))
        es = EpochSet(data, tuple(labels), spec.rate_hz, spec.channel_names, spec.window_ms)
        return es, truth
    if kind != "recording":
        raise ValueError(f"unknown kind {kind!r}")

    source = np.zeros(n_samples)
    # the response may run past the epoch window; evaluate it until it has decayed
    span = int(round((spec.template_latency_ms + 4 * spec.template_fwhm_ms)
                     * spec.rate_hz / 1000.0))
    rel_ms = 1000.0 * np.arange(span) / spec.rate_hz
    for i in np.flatnonzero(amps > 0):
        seg = amps[i] * spec.template(rel_ms - shift[i])
        stop = min(n_samples, onsets[i] + span)
        source[onsets[i]:stop] += seg[:stop - onsets[i]]
    data = _background(spec, streams, n_samples)
    data += np.outer(pattern, source)
    events = tuple(EventMarker(int(o), lab) for o, lab in zip(onsets, labels))
    return Recording(data, spec.rate_hz, spec.channel_names, events), truth


def generate_cohort(spec: SynthSpec = None, kind="recording"):
    """Yield ``(participant, data, truth)`` for every simulated participant."""
    spec = spec or SynthSpec()
    for p in range(spec.n_participants):
        data, truth = generate(spec, p, kind)
        yield p, data, truth


def blink_weights(channel_names, frontal=FRONTAL_32, eye=EYE_32):
    names = list(channel_names)
    w = np.full(len(names), 0.1)
    for i, ch in enumerate(names):
        if ch in eye:
            w[i] = 1.0
        elif ch in frontal:
            w[i] = 0.5
    if w.max() < 1.0:
        w[0] = 1.0
    return w


def inject_artifacts(es: EpochSet, count, magnitude_uv, seed=0, truth: GroundTruth = None,
                     duration_ms=400.0):
    """Add blink-like transients to ``count`` randomly chosen epochs.

    The transient is a Hann bump of ``duration_ms`` placed wholly inside the
    epoch, with peak ``magnitude_uv`` on the eye channels and smaller
    weights elsewhere. Returns the new set and a boolean flag per epoch; a
    supplied ``truth`` has its ``contaminated`` flags updated too.
    """
    n = len(es)
    if not 0 <= count <= n:
        raise ValueError(f"cannot contaminate {count} of {n} epochs")
    flags = np.zeros(n, dtype=bool)
    if count == 0:
        return es, flags
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB1]))
    chosen = rng.choice(n, size=count, replace=False)
    flags[chosen] = True
    width = min(int(round(duration_ms * es.rate_hz / 1000.0)), es.n_times)
    bump = np.hanning(width)
    bump /= bump.max()
    weights = blink_weights(es.channel_names)
    data = np.array(es.data)
    for i in chosen:
        start = int(rng.integers(0, es.n_times - width + 1))
        data[i, :, start:start + width] += magnitude_uv * np.outer(weights, bump)
    if truth is not None:
        truth.contaminated = truth.contaminated | flags
    return es.with_data(data), flags


def expected_score(spec: SynthSpec, category, w, pattern, window_ms, rate_hz=None):
    """Noise-free per-trial score of ``category`` under filter weights ``w``.

    Jitter has mean one, so this is also the expected category mean when the
    window contains the template peak.
    """
    t = np.arange(window_ms[0], window_ms[1] + 1e-9, 1000.0 / (rate_hz or spec.rate_hz))
    return spec.category_amplitudes[category] * float(np.asarray(w) @ pattern) \
        * float(spec.template(t).max())


def simulate_behavioral_trials(rates, n_per_category, seed=0):
    """Bernoulli correct/incorrect draws, ``(category, correct)`` per trial."""
    rng = np.random.default_rng(seed)
    trials = []
    for cat, p in rates.items():
        hits = rng.random(n_per_category) < p
        trials += [(cat, bool(h)) for h in hits]
    return trials
