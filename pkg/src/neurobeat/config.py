"""Flat dotted-key run configuration: defaults, JSON file, command-line overrides."""

from __future__ import annotations

import json
from pathlib import Path

from .detect import PeakPickConfig, StftConfig
from .errors import ConfigError
from .evaluate import DEFAULT_TOLERANCES
from .synth import SynthConfig

DEFAULTS: dict[str, object] = {
    "filter.low_hz": 0.1,
    "filter.high_hz": 40.0,
    "filter.order": 4,
    # 0 disables padding
    "pad.target_samples": 37500,
    "stft.frame_len": 32,
    "stft.hop": 4,
    # peak windows are frames at 125 Hz; the flux baseline rescales them
    "peak.w1": 3,
    "peak.w2": 3,
    "peak.w3": 12,
    "peak.w4": 6,
    "peak.w5": 12,
    "peak.delta": 0.1,
    "cluster.gap_s": 0.05,
    "train.arch": "gru",
    "train.epochs": 50,
    "train.lr": 1e-3,
    "train.batch_size": 32,
    "train.seed": 0,
    "train.folds": 20,
    "train.widen_radius": 0,
    "train.pos_weight": 1.0,
    "train.drop_silent_tail": False,
    # 0 selects the architecture default (256 FCN, 64 GRU)
    "train.hidden": 0,
    "eval.tolerance": 0.1,
    "eval.tolerances": ",".join(str(t) for t in DEFAULT_TOLERANCES),
    "synth.subjects": 3,
    "synth.songs": 2,
    "synth.duration_s": 60.0,
    "synth.channels": 125,
    "synth.sample_rate_hz": 125.0,
    "synth.bpm": 100.0,
    "synth.jitter_s": 0.02,
    "synth.snr_db": 0.0,
    "synth.kernel": "damped_sine",
    "synth.seed": 0,
    "report.tolerance": 0.1,
    "report.n_perm": 10000,
    "report.seed": 0,
}


def coerce(key: str, value):
    """Convert ``value`` (JSON scalar or CLI string) to the type of the default."""
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r}")
    kind = type(DEFAULTS[key])
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "1", "yes", "false", "0", "no"):
                return value.lower() in ("true", "1", "yes")
            raise ValueError(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r} as {kind.__name__}") from None


class RunConfig(dict):
    """Merged configuration; later sources win (defaults < file < flags)."""

    @classmethod
    def build(cls, config_path=None, overrides: dict | None = None) -> "RunConfig":
        cfg = cls(DEFAULTS)
        if config_path:
            try:
                raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config file must be a JSON object of dotted keys")
            for key, value in raw.items():
                cfg[key] = coerce(key, value)
        for key, value in (overrides or {}).items():
            cfg[key] = coerce(key, value)
        return cfg

    def peak(self) -> PeakPickConfig:
        return PeakPickConfig(
            self["peak.w1"], self["peak.w2"], self["peak.w3"],
            self["peak.w4"], self["peak.w5"], self["peak.delta"],
        )

    def stft(self) -> StftConfig:
        return StftConfig(self["stft.frame_len"], self["stft.hop"])

    def tolerances(self) -> list[float]:
        try:
            values = [float(t) for t in str(self["eval.tolerances"]).split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"eval.tolerances must be comma-separated numbers") from None
        if not values or min(values) <= 0:
            raise ConfigError("eval.tolerances must be positive")
        return values

    def train(self):
        from .nn.training import TrainConfig

        return TrainConfig(
            arch=self["train.arch"],
            epochs=self["train.epochs"],
            learning_rate=self["train.lr"],
            batch_size=self["train.batch_size"],
            seed=self["train.seed"],
            folds=self["train.folds"],
            target_widen_radius=self["train.widen_radius"],
            pos_weight=self["train.pos_weight"],
            drop_silent_tail=self["train.drop_silent_tail"],
            hidden=self["train.hidden"] or None,
        )

    def synth(self) -> SynthConfig:
        return SynthConfig(
            n_subjects=self["synth.subjects"],
            n_songs=self["synth.songs"],
            duration_s=self["synth.duration_s"],
            channels=self["synth.channels"],
            sample_rate_hz=self["synth.sample_rate_hz"],
            bpm=self["synth.bpm"],
            onset_jitter_s=self["synth.jitter_s"],
            snr_db=self["synth.snr_db"],
            kernel=self["synth.kernel"],
            seed=self["synth.seed"],
        )
