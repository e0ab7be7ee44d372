"""Glue between ingest, dsp and nn used by the CLI and the acceptance suite."""

from __future__ import annotations

from .core import EegRecording
from .dsp import FilterSpec, apply_zero_phase, design_bandpass
from .ingest import NMEDT_PADDED_SAMPLES, DatasetManifest, load_recording, read_onsets, zero_pad
from .nn.training import CvDataset


def default_filter(sample_rate_hz: float = 125.0) -> FilterSpec:
    return design_bandpass(0.1, 40.0, 4, sample_rate_hz)


def preprocess(rec: EegRecording, spec: FilterSpec, target_samples: int | None = NMEDT_PADDED_SAMPLES) -> EegRecording:
    """Bandpass first, then zero-pad, so the padded tail stays exactly zero."""
    out = apply_zero_phase(rec, spec)
    if target_samples:
        out = zero_pad(out, target_samples)
    return out


def load_dataset(manifest: DatasetManifest) -> CvDataset:
    """Recordings in subject-major, song-ordered sequence plus song onsets."""
    order = {song: i for i, song in enumerate(manifest.song_ids)}
    subj = {s: i for i, s in enumerate(manifest.subject_ids)}
    entries = sorted(manifest.recordings, key=lambda r: (subj[r.subject_id], order[r.song_id]))
    recordings = [load_recording(e, manifest.sample_rate_hz) for e in entries]
    annotations = {s.song_id: read_onsets(s.onsets_path) for s in manifest.songs}
    return CvDataset(recordings, annotations)
