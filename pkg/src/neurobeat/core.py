"""Shared domain types and the timestamp <-> binary-sequence onset codec."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, InvalidAnnotation, NotAscending, OutOfRange


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class EegRecording:
    """One subject listening to one song: a channels x samples matrix.

    ``channels`` and ``samples`` default to the shape of ``data``; they can be
    given explicitly (e.g. from a file header) so that
    :func:`validate_recording` can report a disagreement.
    """

    subject_id: str
    song_id: str
    sample_rate_hz: float
    data: np.ndarray
    channels: Optional[int] = None
    samples: Optional[int] = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        if self.channels is None:
            object.__setattr__(self, "channels", int(data.shape[0]))
        if self.samples is None:
            object.__setattr__(self, "samples", int(data.shape[1]))

    @property
    def duration_s(self) -> float:
        return self.samples / self.sample_rate_hz

    def replace_data(self, data: np.ndarray) -> "EegRecording":
        """Copy of this recording with new data (shape taken from ``data``)."""
        return EegRecording(self.subject_id, self.song_id, self.sample_rate_hz, data)


@dataclass(frozen=True)
class OnsetAnnotation:
    """Strictly ascending onset times in seconds."""

    times_s: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        times = np.array(self.times_s, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(times)):
            raise InvalidAnnotation("onset times must be finite")
        if np.any(times < 0):
            raise InvalidAnnotation("onset times must be >= 0")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            i = int(np.argmax(np.diff(times) <= 0))
            raise NotAscending(
                f"onset times not strictly ascending at index {i + 1}: "
                f"{times[i]!r} then {times[i + 1]!r}"
            )
        object.__setattr__(self, "times_s", _frozen(times))

    def __len__(self) -> int:
        return int(self.times_s.size)

    def __eq__(self, other):
        if not isinstance(other, OnsetAnnotation):
            return NotImplemented
        return np.array_equal(self.times_s, other.times_s)

    __hash__ = None


@dataclass(frozen=True)
class BinaryOnsetSequence:
    """Per-sample onset indicator at the EEG sample rate."""

    sample_rate_hz: float
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise DataError("binary onset sequence must contain only 0 and 1")
        object.__setattr__(self, "bits", _frozen(bits.astype(np.uint8).reshape(-1)))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def onset_indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)


@dataclass(frozen=True)
class WindowPair:
    """A one-second EEG block and its aligned onset target."""

    eeg: np.ndarray  # channels x T
    target: np.ndarray  # T
    subject_id: str
    song_id: str
    window_index: int


@dataclass(frozen=True)
class SubjectMetadata:
    subject_id: str
    age: int
    musical_training_years: float
    listening_hours_per_week: float

    def __post_init__(self):
        for name in ("age", "musical_training_years", "listening_hours_per_week"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise DataError(f"subject {self.subject_id}: {name} must be finite and >= 0")


def timestamps_to_binary(
    ann: OnsetAnnotation, sample_rate_hz: float, length: int
) -> BinaryOnsetSequence:
    """Quantize onset times to the sample grid (round half up)."""
    if length <= 0:
        raise DataError("length must be positive")
    if not isinstance(ann, OnsetAnnotation):
        ann = OnsetAnnotation(ann)
    idx = np.floor(ann.times_s * sample_rate_hz + 0.5).astype(np.int64)
    if idx.size and idx.max() >= length:
        t = ann.times_s[int(np.argmax(idx))]
        raise OutOfRange(f"onset at {t} s maps to index {idx.max()} >= length {length}")
    bits = np.zeros(length, dtype=np.uint8)
    bits[idx] = 1
    return BinaryOnsetSequence(sample_rate_hz, bits)


def binary_to_timestamps(seq: BinaryOnsetSequence) -> OnsetAnnotation:
    return OnsetAnnotation(seq.onset_indices / seq.sample_rate_hz)


def widen_targets(seq: BinaryOnsetSequence, radius: int) -> BinaryOnsetSequence:
    """Dilate every onset bit to cover ``[i - radius, i + radius]``."""
    if radius < 0:
        raise DataError("radius must be >= 0")
    if radius == 0:
        return seq
    n = len(seq)
    out = np.zeros(n, dtype=np.uint8)
    for i in seq.onset_indices:
        out[max(0, i - radius):min(n, i + radius + 1)] = 1
    return BinaryOnsetSequence(seq.sample_rate_hz, out)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


def validate_recording(rec: EegRecording) -> list[Violation]:
    """Check a recording's invariants; an empty list means it is valid."""
    problems = []
    if not (rec.sample_rate_hz > 0 and math.isfinite(rec.sample_rate_hz)):
        problems.append(Violation("sample_rate", f"sample rate {rec.sample_rate_hz} is not positive"))
    rows, cols = rec.data.shape
    if rows != rec.channels or cols != rec.samples:
        problems.append(
            Violation(
                "shape",
                f"declared {rec.channels}x{rec.samples} but data is {rows}x{cols}",
            )
        )
    bad = ~np.isfinite(rec.data)
    if bad.any():
        ch, idx = (int(v) for v in np.argwhere(bad)[0])
        problems.append(Violation("non_finite", f"non-finite at ({ch},{idx})"))
    return problems
