"""Recordings, epochs, score tables and their on-disk formats.

Binary payloads are flat little-endian float32 arrays described by a small
JSON manifest that records shape, element count and a CRC32 of the payload.
"""

from __future__ import annotations

import csv
import json
import warnings
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ChecksumMismatch,
    FormatError,
    GridMismatch,
    TimeOutOfEpoch,
    WindowOutOfBounds,
)

STANDARD = "STANDARD"
GAN_CATEGORIES = ("DCGAN", "BEGAN", "PROGAN")
TARGET_CATEGORIES = GAN_CATEGORIES + ("RFACE",)
RESERVED_LABELS = TARGET_CATEGORIES + (STANDARD,)

DEFAULT_WINDOW_MS = (0.0, 1000.0)

_PAYLOAD_DTYPE = np.dtype("<f4")


def _frozen(a, dtype=float):
    """Read-only view; copies only when a dtype conversion is needed."""
    arr = np.asarray(a, dtype=dtype).view()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventMarker:
    sample_index: int
    label: str

    def __post_init__(self):
        if int(self.sample_index) < 0:
            raise ValueError(f"negative sample index {self.sample_index}")
        object.__setattr__(self, "sample_index", int(self.sample_index))


@dataclass(frozen=True)
class Recording:
    """Continuous multichannel signal in microvolts, shape (channels, samples)."""

    data: np.ndarray
    rate_hz: float
    channel_names: tuple
    events: tuple = ()

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise FormatError(f"recording data must be 2-D, got shape {data.shape}")
        if self.rate_hz <= 0:
            raise FormatError(f"rate_hz must be positive, got {self.rate_hz}")
        names = tuple(self.channel_names)
        if len(names) != data.shape[0]:
            raise FormatError(
                f"{len(names)} channel names for {data.shape[0]} data rows")
        events = tuple(self.events)
        for ev in events:
            if not 0 <= ev.sample_index < data.shape[1]:
                raise FormatError(
                    f"event at sample {ev.sample_index} outside [0, {data.shape[1]})")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "events", events)

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def with_data(self, data, rate_hz=None, events=None):
        return replace(self, data=data,
                       rate_hz=self.rate_hz if rate_hz is None else rate_hz,
                       events=self.events if events is None else events)


@dataclass(frozen=True)
class Epoch:
    data: np.ndarray
    label: str
    onset_offset_ms: float = 0.0


@dataclass(frozen=True)
class EpochSet:
    """Equal-length epochs stored as one (epochs, channels, times) array.

    ``window_ms`` is the epoch span relative to stimulus onset; the time of
    column ``k`` is ``window_ms[0] + 1000 * k / rate_hz``.
    """

    data: np.ndarray
    labels: tuple
    rate_hz: float
    channel_names: tuple
    window_ms: tuple = DEFAULT_WINDOW_MS

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3:
            raise FormatError(f"epoch data must be 3-D, got shape {data.shape}")
        labels = tuple(str(lab) for lab in self.labels)
        names = tuple(self.channel_names)
        window = (float(self.window_ms[0]), float(self.window_ms[1]))
        if self.rate_hz <= 0:
            raise FormatError(f"rate_hz must be positive, got {self.rate_hz}")
        if window[0] >= window[1]:
            raise FormatError(f"empty epoch window {window}")
        if len(labels) != data.shape[0]:
            raise FormatError(f"{len(labels)} labels for {data.shape[0]} epochs")
        if len(names) != data.shape[1]:
            raise FormatError(f"{len(names)} channel names for {data.shape[1]} channels")
        expected = window_samples(window, self.rate_hz)
        if data.shape[2] != expected:
            raise FormatError(
                f"epoch length {data.shape[2]} inconsistent with window {window} "
                f"at {self.rate_hz} Hz (expected {expected})")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "window_ms", window)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_times(self):
        return self.data.shape[2]

    @property
    def times_ms(self):
        return self.window_ms[0] + 1000.0 * np.arange(self.n_times) / self.rate_hz

    @property
    def epochs(self):
        return [Epoch(self.data[i], lab, self.window_ms[0])
                for i, lab in enumerate(self.labels)]

    @property
    def categories(self):
        """Distinct labels in order of first appearance."""
        return tuple(dict.fromkeys(self.labels))

    def counts(self):
        out = {}
        for lab in self.labels:
            out[lab] = out.get(lab, 0) + 1
        return out

    def mask(self, labels):
        if isinstance(labels, str):
            labels = (labels,)
        wanted = set(labels)
        return np.array([lab in wanted for lab in self.labels], dtype=bool)

    def select(self, which):
        """Subset by a boolean mask, an index array, or a label / label list."""
        if isinstance(which, str) or (
                isinstance(which, (list, tuple, set)) and which
                and all(isinstance(w, str) for w in which)):
            which = self.mask(which)
        idx = np.arange(len(self))[np.asarray(which)]
        return replace(self, data=self.data[idx],
                       labels=tuple(self.labels[i] for i in idx))

    def with_data(self, data, rate_hz=None):
        return replace(self, data=data,
                       rate_hz=self.rate_hz if rate_hz is None else rate_hz)

    def column(self, t_ms):
        """Index of the sample nearest to latency ``t_ms``."""
        k = int(round((t_ms - self.window_ms[0]) * self.rate_hz / 1000.0))
        if not 0 <= k < self.n_times:
            raise TimeOutOfEpoch(
                f"{t_ms} ms is outside the epoch window {self.window_ms}")
        return k


def window_samples(window_ms, rate_hz):
    return int(round((window_ms[1] - window_ms[0]) * rate_hz / 1000.0))


def extract_epochs(rec: Recording, window_ms=DEFAULT_WINDOW_MS, baseline_ms=None,
                   return_dropped=False):
    """Cut one epoch per event out of a continuous recording.

    Events whose window runs past either end of the recording are dropped
    with a :class:`WindowOutOfBounds` warning. ``baseline_ms`` (off by
    default) subtracts each channel's mean over that sub-interval.
    """
    start, end = float(window_ms[0]), float(window_ms[1])
    if start >= end:
        raise ValueError(f"window start {start} must precede end {end}")
    offset = int(round(start / 1000.0 * rec.rate_hz))
    n_t = window_samples((start, end), rec.rate_hz)

    kept, dropped = [], []
    for ev in rec.events:
        s0 = ev.sample_index + offset
        if s0 < 0 or s0 + n_t > rec.n_samples:
            dropped.append(ev)
        else:
            kept.append(ev)
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} event(s) whose window exceeds the recording: "
            + ", ".join(f"{e.label}@{e.sample_index}" for e in dropped[:10])
            + (" ..." if len(dropped) > 10 else ""),
            WindowOutOfBounds, stacklevel=2)

    starts = np.array([ev.sample_index + offset for ev in kept], dtype=np.int64)
    if kept:
        idx = starts[:, None] + np.arange(n_t)[None, :]
        data = rec.data[:, idx].transpose(1, 0, 2)
    else:
        data = np.zeros((0, rec.n_channels, n_t))
    if baseline_ms is not None:
        b0 = int(round((baseline_ms[0] - start) * rec.rate_hz / 1000.0))
        b1 = int(round((baseline_ms[1] - start) * rec.rate_hz / 1000.0))
        if not 0 <= b0 < b1 <= n_t:
            raise TimeOutOfEpoch(f"baseline {baseline_ms} outside window {window_ms}")
        data = data - data[:, :, b0:b1].mean(axis=2, keepdims=True)

    out = EpochSet(data, tuple(ev.label for ev in kept), rec.rate_hz,
                   rec.channel_names, (start, end))
    if return_dropped:
        return out, dropped
    return out


# --- binary payload helpers ------------------------------------------------

def _payload_bytes(arr):
    return np.ascontiguousarray(arr, dtype=_PAYLOAD_DTYPE).tobytes()


def _write_payload(arr, manifest_path, payload_name=None):
    manifest_path = Path(manifest_path)
    payload_name = payload_name or manifest_path.with_suffix(".bin").name
    raw = _payload_bytes(arr)
    (manifest_path.parent / payload_name).write_bytes(raw)
    return {
        "payload": payload_name,
        "dtype": "float32-le",
        "shape": list(arr.shape),
        "element_count": int(np.prod(arr.shape)),
        "crc32": zlib.crc32(raw) & 0xFFFFFFFF,
    }


def _read_manifest(path, fmt):
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        if isinstance(exc, OSError):
            raise
        raise FormatError(f"{path}: not a JSON manifest ({exc})") from exc
    if meta.get("format") != fmt:
        raise FormatError(f"{path}: expected format {fmt!r}, got {meta.get('format')!r}")
    return meta


def _read_payload(meta, manifest_path):
    manifest_path = Path(manifest_path)
    shape = tuple(int(s) for s in meta["shape"])
    count = int(meta["element_count"])
    if int(np.prod(shape)) != count:
        raise FormatError(f"shape {shape} does not match element count {count}")
    raw = (manifest_path.parent / meta["payload"]).read_bytes()
    if len(raw) != count * _PAYLOAD_DTYPE.itemsize:
        held = len(raw) // _PAYLOAD_DTYPE.itemsize
        row = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        raise FormatError(
            f"payload holds {held} elements ({held / row:g} rows of the leading axis), "
            f"manifest declares {count} (shape {shape})")
    crc = zlib.crc32(raw) & 0xFFFFFFFF
    if crc != int(meta["crc32"]):
        raise ChecksumMismatch(
            f"payload CRC32 {crc:#010x} != manifest {int(meta['crc32']):#010x}")
    return np.frombuffer(raw, dtype=_PAYLOAD_DTYPE).reshape(shape).astype(np.float64)


def write_epochset(es: EpochSet, path):
    """Write ``es`` as ``path`` (JSON manifest) plus a sibling ``.bin`` payload."""
    path = Path(path)
    meta = {
        "format": "neuroscore.epochset",
        "version": 1,
        "rate_hz": es.rate_hz,
        "channel_names": list(es.channel_names),
        "window_ms": list(es.window_ms),
        "labels": list(es.labels),
    }
    meta.update(_write_payload(es.data, path))
    path.write_text(json.dumps(meta, indent=1))
    return path


def read_epochset(path) -> EpochSet:
    meta = _read_manifest(path, "neuroscore.epochset")
    data = _read_payload(meta, path)
    if data.ndim != 3:
        raise FormatError(f"epochset payload must be 3-D, got {data.shape}")
    bad = np.flatnonzero(~np.isfinite(data).all(axis=(1, 2)))
    if bad.size:
        raise FormatError(f"non-finite values in epoch(s) {bad.tolist()}")
    if len(meta["labels"]) != data.shape[0]:
        raise FormatError(
            f"manifest lists {len(meta['labels'])} labels for {data.shape[0]} epochs")
    return EpochSet(data, tuple(meta["labels"]), meta["rate_hz"],
                    tuple(meta["channel_names"]), tuple(meta["window_ms"]))


def write_recording(rec: Recording, path):
    path = Path(path)
    meta = {
        "format": "neuroscore.recording",
        "version": 1,
        "rate_hz": rec.rate_hz,
        "channel_names": list(rec.channel_names),
        "events": [{"sample_index": e.sample_index, "label": e.label}
                   for e in rec.events],
    }
    meta.update(_write_payload(rec.data, path))
    path.write_text(json.dumps(meta, indent=1))
    return path


def read_recording(path) -> Recording:
    meta = _read_manifest(path, "neuroscore.recording")
    data = _read_payload(meta, path)
    if data.ndim != 2:
        raise FormatError(f"recording payload must be 2-D, got {data.shape}")
    if not np.isfinite(data).all():
        rows = np.flatnonzero(~np.isfinite(data).all(axis=1))
        raise FormatError(f"non-finite values in channel(s) {rows.tolist()}")
    events = tuple(EventMarker(e["sample_index"], e["label"]) for e in meta["events"])
    return Recording(data, meta["rate_hz"], tuple(meta["channel_names"]), events)


def write_matrix(arr, path):
    """Store a 2-D matrix in the manifest + float32 payload format."""
    arr = np.asarray(arr, dtype=float)
    path = Path(path)
    meta = {"format": "neuroscore.matrix", "version": 1}
    meta.update(_write_payload(arr, path))
    path.write_text(json.dumps(meta, indent=1))
    return path


def read_matrix(path):
    """Load a 2-D matrix from CSV (no header) or a matrix manifest."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        meta = _read_manifest(path, "neuroscore.matrix")
        arr = _read_payload(meta, path)
    else:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite entries")
    return arr


def detect_format(path):
    """Return the ``format`` tag of a JSON manifest, or None."""
    try:
        return json.loads(Path(path).read_text()).get("format")
    except (json.JSONDecodeError, UnicodeDecodeError, AttributeError):
        return None


# --- score tables ----------------------------------------------------------

@dataclass(frozen=True)
class ScoreTable:
    """Complete participant x category grid of scalar scores."""

    participants: tuple
    categories: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values)
        parts = tuple(str(p) for p in self.participants)
        cats = tuple(str(c) for c in self.categories)
        if values.shape != (len(parts), len(cats)):
            raise GridMismatch(
                f"values shape {values.shape} != ({len(parts)}, {len(cats)})")
        if len(set(parts)) != len(parts) or len(set(cats)) != len(cats):
            raise GridMismatch("duplicate participant or category ids")
        if not np.isfinite(values).all():
            raise GridMismatch("score table contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "participants", parts)
        object.__setattr__(self, "categories", cats)

    @classmethod
    def from_entries(cls, entries: Iterable):
        cells = {}
        parts, cats = {}, {}
        for p, c, v in entries:
            p, c = str(p), str(c)
            if (p, c) in cells:
                raise GridMismatch(f"duplicate entry for participant {p}, category {c}")
            cells[p, c] = float(v)
            parts.setdefault(p, None)
            cats.setdefault(c, None)
        missing = [(p, c) for p in parts for c in cats if (p, c) not in cells]
        if missing:
            raise GridMismatch(f"incomplete grid, missing {missing[:5]}")
        values = [[cells[p, c] for c in cats] for p in parts]
        return cls(tuple(parts), tuple(cats), np.array(values, dtype=float).reshape(
            len(parts), len(cats)))

    @classmethod
    def from_mapping(cls, rows: Mapping):
        """Build from ``{participant: {category: value}}``."""
        return cls.from_entries((p, c, v) for p, row in rows.items()
                                for c, v in row.items())

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                    "participant", "category", "value"]:
                raise FormatError(
                    f"{path}: header must be participant,category,value "
                    f"(got {reader.fieldnames})")
            try:
                entries = [(r["participant"].strip(), r["category"].strip(),
                            float(r["value"])) for r in reader]
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: {exc}") from exc
        return cls.from_entries(entries)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["participant", "category", "value"])
            for p, c, v in self.entries():
                w.writerow([p, c, repr(float(v))])
        return path

    def entries(self):
        return [(p, c, self.values[i, j]) for i, p in enumerate(self.participants)
                for j, c in enumerate(self.categories)]

    def restrict(self, categories: Sequence[str]):
        missing = [c for c in categories if c not in self.categories]
        if missing:
            raise GridMismatch(f"categories {missing} not in table")
        idx = [self.categories.index(c) for c in categories]
        return ScoreTable(self.participants, tuple(categories), self.values[:, idx])

    def aligned_with(self, other: "ScoreTable"):
        """Reorder ``other`` to this table's participant and category order."""
        if set(self.participants) != set(other.participants) or \
                set(self.categories) != set(other.categories):
            raise GridMismatch(
                "score tables cover different participants or categories: "
                f"{sorted(set(self.participants) ^ set(other.participants))} / "
                f"{sorted(set(self.categories) ^ set(other.categories))}")
        rows = [other.participants.index(p) for p in self.participants]
        cols = [other.categories.index(c) for c in self.categories]
        return ScoreTable(self.participants, self.categories,
                          other.values[np.ix_(rows, cols)])

    def column_means(self):
        return dict(zip(self.categories, self.values.mean(axis=0).tolist()))

    def column_medians(self):
        return dict(zip(self.categories, np.median(self.values, axis=0).tolist()))


def load_mapping(path):
    """Read a flat key-value config from JSON or TOML."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
