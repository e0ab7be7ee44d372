"""Fold training, leave-one-subject-out cross-validation, and inference."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..core import EegRecording, OnsetAnnotation, WindowPair, timestamps_to_binary, widen_targets
from ..detect import PeakPickConfig, peak_pick
from ..dsp import segment_windows
from ..errors import ConfigError, FoldCountMismatch, InsufficientData, NeurobeatError, ShapeError
from ..evaluate import DEFAULT_TOLERANCES, Metrics, evaluate_onsets
from ..rng import derive_seed, make_rng
from .adam import AdamState, adam_step
from .checkpoint import ActivationCurve, ModelCheckpoint
from .model import ARCHS, ArchSpec, Params, forward_logits, init_params, loss_and_gradient, sigmoid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    arch: str = "gru"
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    folds: int = 20
    target_widen_radius: int = 0
    pos_weight: float = 1.0
    drop_silent_tail: bool = False
    hidden: int | None = None

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.folds < 1:
            raise ConfigError("epochs, batch_size and folds must all be >= 1")
        if self.learning_rate <= 0 or self.pos_weight <= 0 or self.target_widen_radius < 0:
            raise ConfigError("learning_rate and pos_weight must be positive, widen radius >= 0")


@dataclass
class CvDataset:
    """Preprocessed recordings plus the reference onsets of every song."""

    recordings: list[EegRecording]
    annotations: dict[str, OnsetAnnotation]

    @property
    def subjects(self) -> list[str]:
        seen = []
        for rec in self.recordings:
            if rec.subject_id not in seen:
                seen.append(rec.subject_id)
        return seen


@dataclass
class FoldResult:
    fold_index: int
    held_out_subject: str
    checkpoint: ModelCheckpoint
    history: list[float]
    # (song_id, tolerance_s) -> Metrics, scored out of fold
    metrics: dict[tuple[str, float], Metrics] = field(default_factory=dict)
    estimates: dict[str, OnsetAnnotation] = field(default_factory=dict)

    def mean_f(self, tolerance_s: float = 0.1) -> float:
        values = [m.f_measure for (song, tol), m in self.metrics.items() if tol == tolerance_s]
        return float(np.mean(values)) if values else float("nan")


def recording_windows(rec: EegRecording, ann: OnsetAnnotation, cfg: TrainConfig) -> list[WindowPair]:
    targets = widen_targets(timestamps_to_binary(ann, rec.sample_rate_hz, rec.samples), cfg.target_widen_radius)
    windows = segment_windows(rec, targets)
    if cfg.drop_silent_tail:
        active = [i for i, w in enumerate(windows) if w.target.any()]
        windows = windows[: active[-1] + 1] if active else []
    return windows


def build_windows(dataset: CvDataset, cfg: TrainConfig) -> list[WindowPair]:
    windows = []
    for rec in dataset.recordings:
        windows.extend(recording_windows(rec, dataset.annotations[rec.song_id], cfg))
    return windows


def train_fold(
    windows: Sequence[WindowPair],
    held_out_subject: str,
    cfg: TrainConfig,
    seed: int | None = None,
    batch_log: Callable[[list[WindowPair]], None] | None = None,
) -> tuple[ModelCheckpoint, list[float]]:
    """Train on every window not belonging to ``held_out_subject``.

    Returns the final checkpoint and the mean training loss of each epoch.
    """
    seed = cfg.seed if seed is None else seed
    if len({w.subject_id for w in windows}) < 2:
        raise InsufficientData("training windows must span at least two subjects")
    train = [w for w in windows if w.subject_id != held_out_subject]
    if not train:
        raise InsufficientData(f"no training windows once subject {held_out_subject!r} is held out")
    C, T = train[0].eeg.shape
    spec = ArchSpec(cfg.arch, C, T, cfg.hidden)
    X = np.stack([w.eeg for w in train])
    Y = np.stack([w.target for w in train]).astype(np.float64)

    params = init_params(spec, seed)
    state = AdamState.zeros(spec.n_weights)
    rng = make_rng(derive_seed(seed, 1))
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if batch_log is not None:
                batch_log([train[i] for i in idx])
            loss, grad = loss_and_gradient(params, X[idx], Y[idx], cfg.pos_weight)
            new_flat, state = adam_step(params.flat, grad, state, cfg.learning_rate)
            params = Params(spec, new_flat)
            total += loss * idx.size
        history.append(total / len(train))
        log.debug("held out %s epoch %d loss %.6f", held_out_subject, epoch + 1, history[-1])
    return ModelCheckpoint(spec, params.flat, seed, cfg.epochs), history


def predict_activation(ckpt: ModelCheckpoint | Params, rec: EegRecording, batch_size: int = 64) -> ActivationCurve:
    """Sigmoid of the network output over consecutive windows of ``rec``."""
    params = ckpt.params() if isinstance(ckpt, ModelCheckpoint) else ckpt
    spec = params.spec
    T = spec.window_len
    if rec.channels != spec.channels:
        raise ShapeError(f"recording has {rec.channels} channels, model expects {spec.channels}")
    if rec.samples % T:
        raise ShapeError(f"{rec.samples} samples is not a multiple of the {T}-sample window")
    n = rec.samples // T
    windows = rec.data.reshape(rec.channels, n, T).transpose(1, 0, 2)
    out = np.concatenate(
        [sigmoid(forward_logits(params, windows[i:i + batch_size])) for i in range(0, n, batch_size)]
    ) if n else np.zeros((0, T))
    return ActivationCurve(out.reshape(-1), rec.sample_rate_hz)


def score_fold(
    ckpt: ModelCheckpoint,
    recordings: Sequence[EegRecording],
    annotations: dict[str, OnsetAnnotation],
    peak_cfg: PeakPickConfig,
    tolerances: Sequence[float],
):
    metrics, estimates = {}, {}
    for rec in recordings:
        est = peak_pick(predict_activation(ckpt, rec), peak_cfg)
        estimates[rec.song_id] = est
        for tol in tolerances:
            metrics[(rec.song_id, float(tol))] = evaluate_onsets(annotations[rec.song_id], est, tol)
    return metrics, estimates


def fold_seed(seed: int, fold_index: int) -> int:
    return derive_seed(seed, fold_index)


def _run_fold(args) -> FoldResult:
    k, subject, windows, dataset, cfg, peak_cfg, tolerances = args
    try:
        ckpt, history = train_fold(windows, subject, cfg, seed=fold_seed(cfg.seed, k))
        held_out = [r for r in dataset.recordings if r.subject_id == subject]
        metrics, estimates = score_fold(ckpt, held_out, dataset.annotations, peak_cfg, tolerances)
    except NeurobeatError as exc:
        raise type(exc)(f"fold {k} (held-out subject {subject!r}): {exc}") from exc
    log.info("fold %d (%s): final loss %.5f", k, subject, history[-1])
    return FoldResult(k, subject, ckpt, history, metrics, estimates)


def cross_validate(
    dataset: CvDataset,
    cfg: TrainConfig,
    peak_cfg: PeakPickConfig = PeakPickConfig(),
    tolerances: Sequence[float] = DEFAULT_TOLERANCES,
    threads: int = 1,
) -> list[FoldResult]:
    """Leave-one-subject-out training with out-of-fold scoring.

    Results come back in subject order regardless of ``threads``.
    """
    subjects = dataset.subjects
    if cfg.folds != len(subjects):
        raise FoldCountMismatch(f"folds ({cfg.folds}) must equal the number of subjects ({len(subjects)})")
    windows = build_windows(dataset, cfg)
    jobs = [(k, s, windows, dataset, cfg, peak_cfg, tuple(tolerances)) for k, s in enumerate(subjects)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            return list(pool.map(_run_fold, jobs))
    return [_run_fold(job) for job in jobs]
