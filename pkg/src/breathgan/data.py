"""Recording ingestion, preprocessing, windowing and dataset splits.

A recording is one subject's continuous airflow signal plus one class label
per consecutive window ("A" apneic / "N" non-apneic).  Preprocessing
downsamples to 1 Hz by per-second averaging and min-max rescales each
recording to [-1, 1]; windowing then slices the 1 Hz signal into one
fixed-length window per label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

APNEIC = "A"
NON_APNEIC = "N"
LABELS = (APNEIC, NON_APNEIC)

TRAIN = "train"
TEST = "test"
VALIDATION = "validation"
SPLITS = (TRAIN, TEST, VALIDATION)


@dataclass
class Recording:
    """One subject's airflow signal with per-window labels."""

    id: str
    sample_rate_hz: int
    window_seconds: int
    samples: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ValueError(f"recording {self.id}: sample_rate_hz must be positive")
        if self.window_seconds <= 0:
            raise ValueError(f"recording {self.id}: window_seconds must be positive")
        bad = [l for l in self.labels if l not in LABELS]
        if bad:
            raise ValueError(f"recording {self.id}: unknown labels {sorted(set(bad))}")
        expected = len(self.samples) // (self.sample_rate_hz * self.window_seconds)
        if len(self.labels) != expected:
            raise ValueError(
                f"recording {self.id}: label count mismatch "
                f"(got {len(self.labels)}, samples support {expected} windows)"
            )

    @property
    def duration_hours(self) -> float:
        return len(self.samples) / self.sample_rate_hz / 3600.0

    @property
    def n_windows(self) -> int:
        return len(self.labels)


@dataclass
class Window:
    """One labeled 1 Hz slice of a recording."""

    recording_id: str
    index: int
    values: np.ndarray
    label: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def key(self) -> tuple[str, int]:
        """Provenance identity used by the leakage audit."""
        return (self.recording_id, self.index)


@dataclass
class WindowedDataset:
    """Flat collection of labeled windows with one split tag per window."""

    windows: list[Window]
    tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.tags:
            self.tags = [TRAIN] * len(self.windows)
        if len(self.tags) != len(self.windows):
            raise ValueError("one split tag per window required")
        bad = [t for t in self.tags if t not in SPLITS]
        if bad:
            raise ValueError(f"unknown split tags {sorted(set(bad))}")

    def subset(self, tag: str) -> list[Window]:
        return [w for w, t in zip(self.windows, self.tags) if t == tag]

    @property
    def class_ratio(self) -> tuple[float, float]:
        return class_ratio(self)

    def __len__(self) -> int:
        return len(self.windows)


@dataclass
class AhiReport:
    """Apnea events per hour and the derived severity category."""

    events_per_hour: float
    category: str


def load_recording(path: str | Path) -> Recording:
    """Load one recording document (JSON) and validate its invariants."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: cannot parse recording document: {exc}") from exc
    try:
        return Recording(
            id=str(doc["id"]),
            sample_rate_hz=int(doc["sample_rate_hz"]),
            window_seconds=int(doc["window_seconds"]),
            samples=np.asarray(doc["samples"], dtype=np.float64),
            labels=list(doc["labels"]),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc}") from exc
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def save_recording(rec: Recording, path: str | Path) -> None:
    doc = {
        "id": rec.id,
        "sample_rate_hz": rec.sample_rate_hz,
        "window_seconds": rec.window_seconds,
        "samples": rec.samples.tolist(),
        "labels": list(rec.labels),
    }
    Path(path).write_text(json.dumps(doc))


def preprocess(rec: Recording) -> Recording:
    """Downsample to 1 Hz (per-second mean) and min-max rescale to [-1, 1].

    A constant signal maps to all zeros rather than raising.  Applying the
    function twice gives the same values as applying it once.
    """
    rate = rec.sample_rate_hz
    n_seconds = len(rec.samples) // rate
    if rate == 1:
        signal = rec.samples[:n_seconds].copy()
    else:
        signal = rec.samples[: n_seconds * rate].reshape(n_seconds, rate).mean(axis=1)
    lo, hi = signal.min(), signal.max()
    if hi > lo:
        signal = 2.0 * (signal - lo) / (hi - lo) - 1.0
    else:
        signal = np.zeros_like(signal)
    return Recording(
        id=rec.id,
        sample_rate_hz=1,
        window_seconds=rec.window_seconds,
        samples=signal,
        labels=list(rec.labels),
    )


def windowize(rec: Recording) -> list[Window]:
    """Slice a preprocessed 1 Hz recording into one window per label."""
    if rec.sample_rate_hz != 1:
        raise ValueError(f"recording {rec.id}: windowize requires a 1 Hz recording")
    step = rec.window_seconds
    return [
        Window(rec.id, i, rec.samples[i * step : (i + 1) * step], label)
        for i, label in enumerate(rec.labels)
    ]


def build_dataset(recordings: list[Recording]) -> WindowedDataset:
    """Preprocess and windowize recordings into a single train-tagged dataset."""
    windows: list[Window] = []
    for rec in recordings:
        windows.extend(windowize(preprocess(rec)))
    return WindowedDataset(windows)


def split_by_events(
    ds: WindowedDataset, fractions: tuple[float, float, float], seed: int
) -> WindowedDataset:
    """Randomly tag windows as train/test/validation with the given fractions.

    ``fractions`` is (train, test, validation).  Counts are assigned by the
    largest-remainder rule, so every tag count is within one window of its
    requested share.  Deterministic for a fixed seed.
    """
    if len(ds.windows) == 0:
        raise ValueError("cannot split an empty dataset")
    if any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(ds.windows)
    exact = [f * n for f in fractions]
    counts = [math.floor(e) for e in exact]
    remainders = sorted(range(3), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in range(n - sum(counts)):
        counts[remainders[i % 3]] += 1
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    tags = [""] * n
    pos = 0
    for tag, count in zip((TRAIN, TEST, VALIDATION), counts):
        for idx in order[pos : pos + count]:
            tags[idx] = tag
        pos += count
    return WindowedDataset(list(ds.windows), tags)


def split_by_recordings(
    recordings: list[Recording],
    test_ids: set[str],
    excluded_ids: set[str] | None = None,
) -> WindowedDataset:
    """Per-recording split: test windows from test_ids, excluded dropped.

    Recordings are preprocessed and windowized; everything outside the test
    and excluded sets becomes train.
    """
    excluded_ids = set(excluded_ids or ())
    known = {rec.id for rec in recordings}
    unknown = (set(test_ids) | excluded_ids) - known
    if unknown:
        raise ValueError(f"unknown recording ids: {sorted(unknown)}")
    overlap = set(test_ids) & excluded_ids
    if overlap:
        raise ValueError(f"test and excluded ids overlap: {sorted(overlap)}")
    windows: list[Window] = []
    tags: list[str] = []
    for rec in recordings:
        if rec.id in excluded_ids:
            continue
        tag = TEST if rec.id in test_ids else TRAIN
        for w in windowize(preprocess(rec)):
            windows.append(w)
            tags.append(tag)
    return WindowedDataset(windows, tags)


def extract_validation(ds: WindowedDataset, fraction: float, seed: int) -> WindowedDataset:
    """Move a stratified fraction of the test windows to the validation tag."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tags = list(ds.tags)
    for label in LABELS:
        idx = [
            i
            for i, (w, t) in enumerate(zip(ds.windows, ds.tags))
            if t == TEST and w.label == label
        ]
        n_val = int(round(fraction * len(idx)))
        for i in rng.permutation(len(idx))[:n_val]:
            tags[idx[i]] = VALIDATION
    return WindowedDataset(list(ds.windows), tags)


def class_ratio(
    ds: WindowedDataset | list[Window], tag: str | None = None
) -> tuple[float, float]:
    """Empirical (apneic, non-apneic) fraction of the tagged subset."""
    if isinstance(ds, WindowedDataset):
        windows = ds.subset(tag) if tag is not None else ds.windows
    else:
        windows = ds
    if not windows:
        raise ValueError("class ratio of an empty window set is undefined")
    n_apneic = sum(1 for w in windows if w.label == APNEIC)
    return (n_apneic / len(windows), 1.0 - n_apneic / len(windows))


def compute_ahi(rec: Recording) -> AhiReport:
    """Apneic windows per hour, categorized as normal/moderate/severe."""
    if rec.n_windows < 1:
        raise ValueError(f"recording {rec.id}: no labeled windows")
    hours = rec.duration_hours
    if hours <= 0:
        raise ValueError(f"recording {rec.id}: zero-duration recording")
    events_per_hour = sum(1 for l in rec.labels if l == APNEIC) / hours
    if events_per_hour < 15:
        category = "normal"
    elif events_per_hour < 30:
        category = "moderate"
    else:
        category = "severe"
    return AhiReport(events_per_hour, category)


def windows_to_matrix(windows: list[Window]) -> np.ndarray:
    """Stack window values into an (n, window_seconds) float matrix."""
    if not windows:
        raise ValueError("no windows")
    lengths = {len(w.values) for w in windows}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent window lengths: {sorted(lengths)}")
    return np.stack([w.values for w in windows])


def labels_of(windows: list[Window]) -> list[str]:
    return [w.label for w in windows]


def save_windows(
    windows: list[Window],
    path: str | Path,
    window_seconds: int | None = None,
    tags: list[str] | None = None,
) -> None:
    """Serialize windows (optionally with split tags) to a JSON file."""
    if window_seconds is None:
        window_seconds = len(windows[0].values) if windows else 0
    entries = []
    for i, w in enumerate(windows):
        entry = {
            "recording_id": w.recording_id,
            "index": w.index,
            "label": w.label,
            "values": w.values.tolist(),
        }
        if tags is not None:
            entry["split"] = tags[i]
        entries.append(entry)
    doc = {"format_version": 1, "window_seconds": window_seconds, "windows": entries}
    Path(path).write_text(json.dumps(doc))


def load_windows(path: str | Path) -> WindowedDataset:
    """Load a windows/dataset JSON file; untagged windows default to train."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: cannot parse dataset file: {exc}") from exc
    windows = []
    tags = []
    for entry in doc["windows"]:
        windows.append(
            Window(
                recording_id=entry["recording_id"],
                index=int(entry["index"]),
                values=np.asarray(entry["values"], dtype=np.float64),
                label=entry["label"],
            )
        )
        tags.append(entry.get("split", TRAIN))
    return WindowedDataset(windows, tags)


def save_dataset(ds: WindowedDataset, path: str | Path) -> None:
    ws = len(ds.windows[0].values) if ds.windows else 0
    save_windows(ds.windows, path, window_seconds=ws, tags=ds.tags)
