"""Synthetic EEG with onset-locked evoked responses, for desk-scale testing.

Each channel is unit-variance Gaussian noise plus a copy of an evoked kernel
at every onset, scaled by a per-subject channel gain and a global gain chosen
to hit the requested signal-to-noise ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import EegRecording, OnsetAnnotation, SubjectMetadata
from .errors import DataError, JitterTooLarge
from .ingest import (
    MANIFEST_VERSION,
    DatasetManifest,
    RecordingEntry,
    SongEntry,
    write_eeg_binary,
    write_manifest,
    write_onsets,
)
from .rng import derive_seed, make_rng

KERNELS = ("damped_sine", "delta")


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 3
    n_songs: int = 2
    duration_s: float = 60.0
    channels: int = 125
    sample_rate_hz: float = 125.0
    bpm: float = 100.0
    onset_jitter_s: float = 0.02
    snr_db: float = 0.0
    kernel: str = "damped_sine"
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1 or self.n_songs < 1 or self.channels < 1:
            raise DataError("subjects, songs and channels must be >= 1")
        if self.kernel not in KERNELS:
            raise DataError(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        n = self.duration_s * self.sample_rate_hz
        if not self.duration_s > 0 or abs(n - round(n)) > 1e-9:
            raise DataError("duration_s * sample_rate_hz must be a positive integer")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


def gen_onset_train(duration_s: float, bpm: float, jitter_s: float, seed: int) -> OnsetAnnotation:
    """Isochronous onsets at ``60 / bpm`` spacing with uniform jitter."""
    if not bpm > 0:
        raise DataError("bpm must be positive")
    period = 60.0 / bpm
    if jitter_s >= period / 2:
        raise JitterTooLarge(f"jitter {jitter_s} s could reorder onsets {period} s apart")
    grid = np.arange(int(math.ceil(duration_s / period))) * period
    grid = grid[grid < duration_s]
    if jitter_s > 0:
        grid = grid + make_rng(seed).uniform(-jitter_s, jitter_s, size=grid.size)
    grid = np.clip(grid, 0.0, None)
    return OnsetAnnotation(grid[grid < duration_s])


def kernel_samples(kind: str, sample_rate_hz: float) -> np.ndarray:
    if kind == "delta":
        return np.ones(1)
    t = np.arange(int(round(0.1 * sample_rate_hz))) / sample_rate_hz
    return np.sin(2 * np.pi * 20.0 * t) * np.exp(-t / 0.05)


def onset_template(ann: OnsetAnnotation, cfg: SynthConfig) -> np.ndarray:
    """Unit-gain evoked-response train (one channel, before channel gains)."""
    n = cfg.n_samples
    kern = kernel_samples(cfg.kernel, cfg.sample_rate_hz)
    impulses = np.zeros(n)
    idx = np.floor(ann.times_s * cfg.sample_rate_hz + 0.5).astype(np.int64)
    impulses[idx[idx < n]] = 1.0
    return np.convolve(impulses, kern)[:n]


def gen_eeg(
    ann: OnsetAnnotation,
    cfg: SynthConfig,
    subject_seed: int,
    noise_seed: int | None = None,
    subject_id: str = "",
    song_id: str = "",
) -> EegRecording:
    """Noise plus time-locked kernels; channel gains depend only on ``subject_seed``."""
    gains = make_rng(subject_seed).uniform(0.5, 1.5, size=cfg.channels)
    noise = make_rng(subject_seed if noise_seed is None else noise_seed).standard_normal(
        (cfg.channels, cfg.n_samples)
    )
    template = onset_template(ann, cfg)
    signal = gains[:, None] * template[None, :]
    power = float(np.mean(signal ** 2))
    if power > 0:
        signal *= math.sqrt(10.0 ** (cfg.snr_db / 10.0) / power)
    return EegRecording(subject_id, song_id, cfg.sample_rate_hz, noise + signal)


def fabricate_metadata(subject_id: str, seed: int) -> SubjectMetadata:
    rng = make_rng(seed)
    return SubjectMetadata(
        subject_id,
        int(rng.integers(18, 41)),
        round(float(rng.uniform(0, 15)), 1),
        round(float(rng.uniform(0, 30)), 1),
    )


def gen_dataset(cfg: SynthConfig, out_dir) -> Path:
    """Write manifest, per-song onset files and per-recording EEG binaries."""
    out = Path(out_dir)
    (out / "onsets").mkdir(parents=True, exist_ok=True)
    (out / "eeg").mkdir(parents=True, exist_ok=True)
    subject_ids = [f"s{i + 1:02d}" for i in range(cfg.n_subjects)]
    song_ids = [f"song{j + 1:02d}" for j in range(cfg.n_songs)]

    songs, annotations = [], {}
    for j, song in enumerate(song_ids):
        ann = gen_onset_train(cfg.duration_s, cfg.bpm, cfg.onset_jitter_s, derive_seed(cfg.seed, j))
        # Keep every onset on a valid sample index.
        keep = np.floor(ann.times_s * cfg.sample_rate_hz + 0.5) < cfg.n_samples
        ann = OnsetAnnotation(ann.times_s[keep])
        annotations[song] = ann
        path = out / "onsets" / f"{song}.txt"
        write_onsets(ann, path)
        songs.append(SongEntry(song, cfg.duration_s, path))

    subjects, recordings = [], []
    for i, subject in enumerate(subject_ids):
        subject_seed = derive_seed(cfg.seed, 1000 + i)
        subjects.append(fabricate_metadata(subject, derive_seed(subject_seed, 7)))
        for j, song in enumerate(song_ids):
            rec = gen_eeg(
                annotations[song], cfg, subject_seed, derive_seed(subject_seed, 100 + j), subject, song
            )
            path = out / "eeg" / f"{subject}_{song}.eeg"
            write_eeg_binary(rec, path)
            recordings.append(RecordingEntry(subject, song, path))

    manifest = DatasetManifest(
        MANIFEST_VERSION, cfg.sample_rate_hz, tuple(subjects), tuple(songs), tuple(recordings), out
    )
    return write_manifest(manifest, out / "manifest.json")
