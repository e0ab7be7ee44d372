"""Dataset loading: manifest, EEG matrices, onset files, subject-major regrouping."""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import EegRecording, OnsetAnnotation, SubjectMetadata
from .errors import (
    BadMagic,
    IntegrityError,
    MissingCell,
    NeurobeatError,
    NonNumericCell,
    NonNumericLine,
    ParseError,
    RaggedRows,
    ShapeMismatch,
    TooLong,
    TruncatedFile,
    VersionError,
)

MANIFEST_VERSION = 1
EEG_MAGIC = b"EEG1"
EEG_VERSION = 1
# magic, version u32, channels u32, samples u64, sample rate f64
_EEG_HEADER = struct.Struct("<4sIIQd")
NMEDT_PADDED_SAMPLES = 37500


@dataclass(frozen=True)
class SongEntry:
    song_id: str
    duration_s: float
    onsets_path: Path


@dataclass(frozen=True)
class RecordingEntry:
    subject_id: str
    song_id: str
    eeg_path: Path


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    sample_rate_hz: float
    subjects: tuple[SubjectMetadata, ...]
    songs: tuple[SongEntry, ...]
    recordings: tuple[RecordingEntry, ...]
    root: Path = Path(".")

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    @property
    def song_ids(self) -> list[str]:
        return [s.song_id for s in self.songs]

    def song(self, song_id: str) -> SongEntry:
        for s in self.songs:
            if s.song_id == song_id:
                return s
        raise KeyError(song_id)

    def to_json(self) -> dict:
        """Serializable form with paths relative to ``root``."""

        def rel(p: Path) -> str:
            return Path(os.path.relpath(p, self.root)).as_posix()

        return {
            "version": self.version,
            "sample_rate_hz": self.sample_rate_hz,
            "subjects": [
                {
                    "id": s.subject_id,
                    "age": s.age,
                    "musical_training_years": s.musical_training_years,
                    "listening_hours_per_week": s.listening_hours_per_week,
                }
                for s in self.subjects
            ],
            "songs": [
                {"id": s.song_id, "duration_s": s.duration_s, "onsets_path": rel(s.onsets_path)}
                for s in self.songs
            ],
            "recordings": [
                {"subject_id": r.subject_id, "song_id": r.song_id, "eeg_path": rel(r.eeg_path)}
                for r in self.recordings
            ],
        }


_TOP_KEYS = {"version", "sample_rate_hz", "subjects", "songs", "recordings"}


def _require(obj, keys, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ParseError(f"{where}: missing keys {missing}")


def parse_manifest(raw: dict, root: Path) -> DatasetManifest:
    """Validate a decoded manifest object; paths are resolved against ``root``."""
    if not isinstance(raw, dict) or set(raw) != _TOP_KEYS:
        keys = sorted(raw) if isinstance(raw, dict) else type(raw).__name__
        raise ParseError(f"manifest top-level keys must be exactly {sorted(_TOP_KEYS)}, got {keys}")
    if not isinstance(raw["version"], int) or isinstance(raw["version"], bool):
        raise ParseError("manifest version must be an integer")
    if raw["version"] != MANIFEST_VERSION:
        raise VersionError(f"unsupported manifest version {raw['version']}")
    try:
        sample_rate = float(raw["sample_rate_hz"])
        subjects = []
        for i, s in enumerate(raw["subjects"]):
            _require(s, ("id", "age", "musical_training_years", "listening_hours_per_week"), f"subjects[{i}]")
            subjects.append(
                SubjectMetadata(
                    str(s["id"]),
                    int(s["age"]),
                    float(s["musical_training_years"]),
                    float(s["listening_hours_per_week"]),
                )
            )
        songs = []
        for i, s in enumerate(raw["songs"]):
            _require(s, ("id", "duration_s", "onsets_path"), f"songs[{i}]")
            songs.append(SongEntry(str(s["id"]), float(s["duration_s"]), root / s["onsets_path"]))
        recordings = []
        for i, r in enumerate(raw["recordings"]):
            _require(r, ("subject_id", "song_id", "eeg_path"), f"recordings[{i}]")
            recordings.append(RecordingEntry(str(r["subject_id"]), str(r["song_id"]), root / r["eeg_path"]))
    except NeurobeatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest: {exc}") from exc

    if not sample_rate > 0:
        raise ParseError("sample_rate_hz must be positive")
    if not subjects:
        raise IntegrityError("manifest declares no subjects")
    if not songs:
        raise IntegrityError("manifest declares no songs")
    subject_ids = [s.subject_id for s in subjects]
    song_ids = [s.song_id for s in songs]
    if len(set(subject_ids)) != len(subject_ids):
        raise IntegrityError("duplicate subject id")
    if len(set(song_ids)) != len(song_ids):
        raise IntegrityError("duplicate song id")
    seen = set()
    for r in recordings:
        if r.subject_id not in subject_ids:
            raise IntegrityError(f"recording references unknown subject {r.subject_id!r}")
        if r.song_id not in song_ids:
            raise IntegrityError(f"recording references unknown song {r.song_id!r}")
        key = (r.subject_id, r.song_id)
        if key in seen:
            raise IntegrityError(f"duplicate recording for subject {key[0]!r}, song {key[1]!r}")
        seen.add(key)
    return DatasetManifest(
        MANIFEST_VERSION, sample_rate, tuple(subjects), tuple(songs), tuple(recordings), root
    )


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_manifest(raw, path.parent)


def write_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    manifest = DatasetManifest(
        manifest.version,
        manifest.sample_rate_hz,
        manifest.subjects,
        manifest.songs,
        manifest.recordings,
        path.parent,
    )
    path.write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")
    return path


def write_eeg_binary(rec: EegRecording, path) -> None:
    data = np.ascontiguousarray(rec.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_EEG_HEADER.pack(EEG_MAGIC, EEG_VERSION, rec.channels, rec.samples, rec.sample_rate_hz))
        fh.write(data.tobytes(order="C"))


def read_eeg_binary(path, subject_id: str = "", song_id: str = "") -> EegRecording:
    """Read the little-endian ``EEG1`` container (channel-major f32 payload)."""
    with open(path, "rb") as fh:
        header = fh.read(_EEG_HEADER.size)
        if len(header) < 4 or header[:4] != EEG_MAGIC:
            raise BadMagic(f"{path}: bad magic {header[:4]!r}")
        if len(header) < _EEG_HEADER.size:
            raise TruncatedFile(f"{path}: header truncated")
        _, version, channels, samples, sample_rate = _EEG_HEADER.unpack(header)
        if version != EEG_VERSION:
            raise VersionError(f"{path}: unsupported EEG file version {version}")
        payload = fh.read()
    expected = channels * samples * 4
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    if len(payload) > expected:
        raise ShapeMismatch(f"{path}: {len(payload) - expected} trailing bytes beyond declared shape")
    data = np.frombuffer(payload, dtype="<f4").reshape(channels, samples)
    return EegRecording(subject_id, song_id, sample_rate, data)


def read_eeg_csv(path, sample_rate_hz: float, subject_id: str = "", song_id: str = "") -> EegRecording:
    """Read a rectangular numeric CSV with one row per channel."""
    rows = []
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            values = []
            for c, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCell(f"{path}: non-numeric cell {cell!r} at row {r}, column {c}") from None
            if rows and len(values) != len(rows[0]):
                raise RaggedRows(f"{path}: row {r} has {len(values)} cells, expected {len(rows[0])}")
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: empty CSV")
    return EegRecording(subject_id, song_id, sample_rate_hz, np.array(rows))


def read_onsets(path) -> OnsetAnnotation:
    times = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                times.append(float(text))
            except ValueError:
                raise NonNumericLine(f"{path}:{lineno}: not a number: {text!r}") from None
    return OnsetAnnotation(times)


def write_onsets(ann: OnsetAnnotation, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in ann.times_s:
            fh.write(f"{float(t)!r}\n")


def to_subject_major(
    recordings: Iterable[EegRecording], song_order: list[str] | None = None
) -> dict[str, list[EegRecording]]:
    """Regroup song-major recordings into per-subject lists in song order.

    ``song_order`` defaults to first-appearance order of song ids.
    """
    recordings = list(recordings)
    subjects: list[str] = []
    songs: list[str] = list(song_order) if song_order is not None else []
    cells = {}
    for rec in recordings:
        if rec.subject_id not in subjects:
            subjects.append(rec.subject_id)
        if song_order is None and rec.song_id not in songs:
            songs.append(rec.song_id)
        cells[(rec.subject_id, rec.song_id)] = rec
    grouped = {}
    for subject in subjects:
        group = []
        for song in songs:
            if (subject, song) not in cells:
                raise MissingCell(f"no recording for subject {subject!r}, song {song!r}")
            group.append(cells[(subject, song)])
        grouped[subject] = group
    return grouped


def zero_pad(rec: EegRecording, target_samples: int = NMEDT_PADDED_SAMPLES) -> EegRecording:
    """Append trailing zeros to every channel up to ``target_samples``."""
    if rec.samples > target_samples:
        raise TooLong(f"recording has {rec.samples} samples, more than target {target_samples}")
    if rec.samples == target_samples:
        return rec
    padded = np.zeros((rec.channels, target_samples), dtype=np.float32)
    padded[:, : rec.samples] = rec.data
    return rec.replace_data(padded)


def load_recording(entry: RecordingEntry, sample_rate_hz: float | None = None) -> EegRecording:
    """Load a manifest recording entry, dispatching on file extension."""
    if entry.eeg_path.suffix.lower() == ".csv":
        if sample_rate_hz is None:
            raise ParseError("CSV recordings need a sample rate")
        rec = read_eeg_csv(entry.eeg_path, sample_rate_hz)
    else:
        rec = read_eeg_binary(entry.eeg_path)
    return EegRecording(entry.subject_id, entry.song_id, rec.sample_rate_hz, rec.data)
