"""Curve-to-onset conversion (adaptive peak picking) and non-learned baselines."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import EegRecording, OnsetAnnotation
from .dsp import spectral_flux, stft_magnitude
from .errors import EmptyCurve, NonPositiveDuration


@dataclass(frozen=True)
class PeakPickConfig:
    """Window sizes in frames: ``w1``/``w2`` bound the local-maximum test,
    ``w3``/``w4`` the moving average, ``w5`` is the minimum onset spacing."""

    w1: int = 3
    w2: int = 3
    w3: int = 12
    w4: int = 6
    w5: int = 12
    delta: float = 0.1

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4, self.w5) < 0 or self.delta < 0:
            raise ValueError("peak-picking windows and delta must be non-negative")

    def rescaled(self, from_rate_hz: float, to_rate_hz: float) -> "PeakPickConfig":
        """Same windows in seconds, re-expressed in frames of another rate."""
        k = to_rate_hz / from_rate_hz
        return replace(
            self,
            **{w: int(round(getattr(self, w) * k)) for w in ("w1", "w2", "w3", "w4", "w5")},
        )


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 32
    hop: int = 4


def peak_indices(values, cfg: PeakPickConfig) -> np.ndarray:
    """Indices passing the local-max, mean-plus-delta and spacing rules.

    Windows are clipped at the curve boundaries.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    n = x.size
    if n == 0:
        raise EmptyCurve("cannot pick peaks on an empty curve")
    idx = np.arange(n)
    lo_avg = np.maximum(idx - cfg.w3, 0)
    hi_avg = np.minimum(idx + cfg.w4 + 1, n)

    # Moving maximum via a sliding view over an edge-padded copy.
    padded = np.pad(x, (cfg.w1, cfg.w2), constant_values=-np.inf)
    local_max = np.lib.stride_tricks.sliding_window_view(padded, cfg.w1 + cfg.w2 + 1).max(axis=1)
    # Direct windowed sums; cumulative-sum differences drift on long curves.
    zpad = np.pad(x, (cfg.w3, cfg.w4))
    local_sum = np.lib.stride_tricks.sliding_window_view(zpad, cfg.w3 + cfg.w4 + 1).sum(axis=1)
    local_mean = local_sum / (hi_avg - lo_avg)

    candidates = np.flatnonzero((x == local_max) & (x >= local_mean + cfg.delta))
    picked = []
    last = None
    for i in candidates:
        if last is None or i - last >= cfg.w5:
            picked.append(i)
            last = i
    return np.asarray(picked, dtype=np.int64)


def peak_pick(curve, cfg: PeakPickConfig = PeakPickConfig(), frame_rate_hz: float | None = None) -> OnsetAnnotation:
    """Onset times (``index / frame rate``) of the peaks of a curve.

    ``curve`` is an activation or novelty curve, or a bare array together
    with ``frame_rate_hz``.
    """
    if frame_rate_hz is None:
        frame_rate_hz = curve.frame_rate_hz
    values = getattr(curve, "values", curve)
    return OnsetAnnotation(peak_indices(values, cfg) / frame_rate_hz)


def dummy_detector(duration_s: float) -> OnsetAnnotation:
    """One onset per second: 0, 1, 2, ... strictly below ``duration_s``."""
    if not duration_s > 0:
        raise NonPositiveDuration(f"duration must be positive, got {duration_s}")
    return OnsetAnnotation(np.arange(int(np.ceil(duration_s)), dtype=np.float64))


def cluster_timestamps(pooled, gap_s: float = 0.05) -> OnsetAnnotation:
    """Merge pooled timestamps into cluster means.

    A new cluster starts whenever two consecutive sorted times differ by more
    than ``gap_s``.
    """
    if not gap_s > 0:
        raise ValueError("gap_s must be positive")
    times = np.sort(np.asarray(pooled, dtype=np.float64).reshape(-1))
    if times.size == 0:
        return OnsetAnnotation()
    breaks = np.flatnonzero(np.diff(times) > gap_s) + 1
    means = [chunk.mean() for chunk in np.split(times, breaks)]
    return OnsetAnnotation(means)


def channel_onsets(x, sample_rate_hz: float, stft_cfg: StftConfig, peak_cfg: PeakPickConfig) -> np.ndarray:
    spec = stft_magnitude(x, stft_cfg.frame_len, stft_cfg.hop, sample_rate_hz)
    novelty = spectral_flux(spec)
    return peak_pick(novelty, peak_cfg).times_s


def flux_baseline(
    rec: EegRecording,
    stft_cfg: StftConfig = StftConfig(),
    peak_cfg: PeakPickConfig | None = None,
    cluster_gap_s: float = 0.05,
) -> OnsetAnnotation:
    """Spectral-flux onsets per channel, pooled and merged across channels.

    ``peak_cfg`` is expressed in novelty frames; by default the 125 Hz
    peak-picking windows are rescaled to the novelty frame rate.
    """
    if peak_cfg is None:
        peak_cfg = PeakPickConfig().rescaled(125.0, rec.sample_rate_hz / stft_cfg.hop)
    pooled = [channel_onsets(ch, rec.sample_rate_hz, stft_cfg, peak_cfg) for ch in rec.data]
    return cluster_timestamps(np.concatenate(pooled) if pooled else [], cluster_gap_s)
