"""Signal conditioning: Butterworth bandpass, STFT magnitude, spectral flux, windowing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import BinaryOnsetSequence, EegRecording, WindowPair
from .errors import InvalidBand, LengthMismatch, SignalTooShort, UnstableDesign


@dataclass(frozen=True)
class Biquad:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])


@dataclass(frozen=True)
class FilterSpec:
    biquad_sections: tuple[Biquad, ...]
    low_hz: float
    high_hz: float
    order: int
    sample_rate_hz: float

    @property
    def sos(self) -> np.ndarray:
        """Sections in scipy's ``[b0, b1, b2, 1, a1, a2]`` layout."""
        return np.array([[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2] for s in self.biquad_sections])

    def frequency_response(self, freqs_hz) -> np.ndarray:
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(freqs_hz), fs=self.sample_rate_hz)
        return h


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # frames x bins
    frame_rate_hz: float
    bin_hz: float

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]


@dataclass(frozen=True)
class NoveltyCurve:
    values: np.ndarray
    frame_rate_hz: float

    def __len__(self) -> int:
        return int(self.values.size)


def design_bandpass(low_hz: float, high_hz: float, order: int, sample_rate_hz: float) -> FilterSpec:
    """Butterworth bandpass as a highpass cascade followed by a lowpass cascade.

    ``order`` is the order of each factor, so order 4 yields two highpass and
    two lowpass biquads.
    """
    nyquist = sample_rate_hz / 2.0
    if not (0 < low_hz < high_hz < nyquist):
        raise InvalidBand(f"need 0 < low ({low_hz}) < high ({high_hz}) < nyquist ({nyquist})")
    if order < 2 or order % 2:
        raise InvalidBand(f"order must be even and >= 2, got {order}")
    hp = signal.butter(order, low_hz, btype="highpass", output="sos", fs=sample_rate_hz)
    lp = signal.butter(order, high_hz, btype="lowpass", output="sos", fs=sample_rate_hz)
    sections = []
    for row in np.vstack([hp, lp]):
        a0 = row[3]
        b0, b1, b2, _, a1, a2 = row / a0
        section = Biquad(float(b0), float(b1), float(b2), float(a1), float(a2))
        if not np.all(np.isfinite(row)) or np.any(np.abs(section.poles()) >= 1.0):
            raise UnstableDesign(f"unstable section {section}")
        sections.append(section)
    return FilterSpec(tuple(sections), float(low_hz), float(high_hz), int(order), float(sample_rate_hz))


def filtfilt_array(x: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Zero-phase filtering along the last axis with reflective edge padding."""
    x = np.asarray(x, dtype=np.float64)
    padlen = min(3 * spec.order, x.shape[-1] - 1)
    return signal.sosfiltfilt(spec.sos, x, axis=-1, padtype="odd", padlen=max(padlen, 0))


def apply_zero_phase(rec: EegRecording, spec: FilterSpec) -> EegRecording:
    return rec.replace_data(filtfilt_array(rec.data, spec))


def hann_window(frame_len: int) -> np.ndarray:
    return signal.get_window("hann", frame_len, fftbins=True)


def stft_magnitude(x, frame_len: int = 32, hop: int = 4, sample_rate_hz: float = 125.0) -> Spectrogram:
    """Magnitude STFT with a periodic Hann window and no centring."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if frame_len < 2 or not (1 <= hop <= frame_len):
        raise ValueError("need frame_len >= 2 and 1 <= hop <= frame_len")
    if x.size < frame_len:
        raise SignalTooShort(f"signal of {x.size} samples shorter than frame {frame_len}")
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop]
    mags = np.abs(np.fft.rfft(frames * hann_window(frame_len), axis=-1))
    return Spectrogram(mags, sample_rate_hz / hop, sample_rate_hz / frame_len)


def spectral_flux(spec: Spectrogram) -> NoveltyCurve:
    """Half-wave rectified frame difference, averaged over bins."""
    mags = spec.magnitudes
    if mags.shape[0] < 2:
        raise SignalTooShort("spectral flux needs at least two frames")
    values = np.zeros(mags.shape[0])
    values[1:] = np.maximum(np.diff(mags, axis=0), 0.0).mean(axis=1)
    return NoveltyCurve(values, spec.frame_rate_hz)


def segment_windows(
    rec: EegRecording, targets: BinaryOnsetSequence, window_s: float = 1.0
) -> list[WindowPair]:
    """Cut a recording and its targets into consecutive non-overlapping blocks."""
    if rec.samples != len(targets):
        raise LengthMismatch(f"recording has {rec.samples} samples but targets have {len(targets)}")
    T = int(round(rec.sample_rate_hz * window_s))
    if rec.samples % T:
        raise LengthMismatch(f"{rec.samples} samples is not a multiple of the {T}-sample window")
    return [
        WindowPair(
            rec.data[:, i * T:(i + 1) * T],
            targets.bits[i * T:(i + 1) * T],
            rec.subject_id,
            rec.song_id,
            i,
        )
        for i in range(rec.samples // T)
    ]
