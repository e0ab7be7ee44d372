"""Checkpoint (``NBK1``) and activation-curve (``ACT1``) binary formats."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import BadMagic, ShapeError, TruncatedFile, VersionError
from .model import ARCHS, ArchSpec, Params

CKPT_MAGIC = b"NBK1"
ACT_MAGIC = b"ACT1"
FORMAT_VERSION = 1
# magic, version, arch, channels, window_len, hidden, layers, seed, epochs, weight_count
_CKPT_HEADER = struct.Struct("<4sIBIIIIQIQ")
_ACT_HEADER = struct.Struct("<4sIdQ")


@dataclass(frozen=True)
class ModelCheckpoint:
    spec: ArchSpec
    weights: np.ndarray
    seed: int = 0
    epochs: int = 0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.spec.n_weights,):
            raise ShapeError(f"{self.spec.arch} checkpoint needs {self.spec.n_weights} weights, got {w.size}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def params(self) -> Params:
        return Params(self.spec, self.weights.copy())


@dataclass(frozen=True)
class ActivationCurve:
    """Per-sample onset probabilities in [0, 1]."""

    values: np.ndarray
    sample_rate_hz: float = 125.0

    @property
    def frame_rate_hz(self) -> float:
        return self.sample_rate_hz

    def __len__(self) -> int:
        return int(self.values.size)


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    s = ckpt.spec
    header = _CKPT_HEADER.pack(
        CKPT_MAGIC, FORMAT_VERSION, ARCHS.index(s.arch), s.channels, s.window_len,
        s.hidden, s.layers, ckpt.seed, ckpt.epochs, s.n_weights,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ckpt.weights.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CKPT_MAGIC:
        raise BadMagic(f"{path}: not a checkpoint (magic {blob[:4]!r})")
    if len(blob) < _CKPT_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, version, arch, channels, window_len, hidden, layers, seed, epochs, count = _CKPT_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    spec = ArchSpec(ARCHS[arch], channels, window_len, hidden, layers)
    if count != spec.n_weights:
        raise ShapeError(f"{path}: weight count {count} does not match {spec}")
    payload = blob[_CKPT_HEADER.size:]
    if len(payload) != 8 * count:
        raise TruncatedFile(f"{path}: expected {8 * count} weight bytes, found {len(payload)}")
    return ModelCheckpoint(spec, np.frombuffer(payload, dtype="<f8"), seed, epochs)


def save_activation(curve: ActivationCurve, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_ACT_HEADER.pack(ACT_MAGIC, FORMAT_VERSION, curve.sample_rate_hz, len(curve)))
        fh.write(np.asarray(curve.values, dtype="<f8").tobytes())


def load_activation(path) -> ActivationCurve:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != ACT_MAGIC:
        raise BadMagic(f"{path}: not an activation file (magic {blob[:4]!r})")
    if len(blob) < _ACT_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, version, rate, length = _ACT_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported activation version {version}")
    payload = blob[_ACT_HEADER.size:]
    if len(payload) != 8 * length:
        raise TruncatedFile(f"{path}: expected {8 * length} value bytes, found {len(payload)}")
    return ActivationCurve(np.frombuffer(payload, dtype="<f8").copy(), rate)
