"""``neurobeat`` command-line entry point.

Exit status: 0 success, 1 usage/configuration error, 2 data or validation
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .core import EegRecording
from .detect import dummy_detector, flux_baseline, peak_pick
from .dsp import design_bandpass
from .errors import ConfigError, DataError, NeurobeatError
from .evaluate import aggregate_subjects, evaluate_onsets, pearson_r, permutation_pvalue
from .ingest import (
    MANIFEST_VERSION,
    DatasetManifest,
    RecordingEntry,
    load_manifest,
    read_onsets,
    write_eeg_binary,
    write_manifest,
    write_onsets,
)
from .nn.checkpoint import load_activation, load_checkpoint, save_activation, save_checkpoint
from .nn.training import cross_validate, predict_activation
from .pipeline import load_dataset, preprocess
from .report import (
    MetricsRow,
    methods_in,
    per_subject_f,
    read_metrics_csv,
    render_boxplot_svg,
    select,
    summarize,
    write_dict_csv,
    write_metrics_csv,
)
from .synth import gen_dataset

log = logging.getLogger("neurobeat")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

# NMED-T reference figures; shown by `report --reference` for comparison only.
REFERENCE_VALUES = {
    "gru_f_measure": 0.54,
    "flux_f_measure": 0.32,
    "per_subject_f_mean": 0.416,
    "per_subject_f_std": 0.08,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# Command-line flags that are shorthands for configuration keys.
FLAG_KEYS = {
    "subjects": "synth.subjects",
    "songs": "synth.songs",
    "duration": "synth.duration_s",
    "channels": "synth.channels",
    "bpm": "synth.bpm",
    "jitter": "synth.jitter_s",
    "snr_db": "synth.snr_db",
    "kernel": "synth.kernel",
    "pad": "pad.target_samples",
    "arch": "train.arch",
    "epochs": "train.epochs",
    "lr": "train.lr",
    "batch_size": "train.batch_size",
    "folds": "train.folds",
    "tolerance": "eval.tolerance",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neurobeat", description="EEG-based music onset detection pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of dotted configuration keys")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $NEUROBEAT_THREADS or CPU count)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    for flag in ("subjects", "songs", "channels"):
        p.add_argument(f"--{flag}", type=int)
    for flag in ("duration", "bpm", "jitter", "snr-db"):
        p.add_argument(f"--{flag}", type=float)
    p.add_argument("--kernel")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("preprocess", parents=[common], help="bandpass filter and zero-pad")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pad", type=int, help="target samples (0 disables padding)")

    p = sub.add_parser("train", parents=[common], help="leave-one-subject-out training")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=("fcn", "gru"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("predict", parents=[common], help="write out-of-fold activation curves")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", required=True, help="directory written by `train`")
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", parents=[common], help="peak-pick activation curves")
    p.add_argument("--activations", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("baseline", parents=[common], help="non-learned onset baselines")
    p.add_argument("--method", choices=("flux", "dummy"), required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    for name, text in (("evaluate", "score onsets at one tolerance"),
                       ("sweep", "score onsets over the tolerance list")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--manifest", required=True)
        p.add_argument("--estimates", action="append", required=True, metavar="METHOD=DIR",
                       help="directory of <subject>_<song>.txt onset files (repeatable)")
        p.add_argument("--out", required=True)
        if name == "evaluate":
            p.add_argument("--tolerance", type=float)

    p = sub.add_parser("report", parents=[common], help="summary tables and box plots")
    p.add_argument("--metrics", action="append", required=True, help="metrics CSV (repeatable)")
    p.add_argument("--manifest", help="manifest with subject metadata, for correlations")
    p.add_argument("--out", required=True)
    p.add_argument("--correlate", default="gru", help="method correlated against subject metadata")
    p.add_argument("--reference", action="store_true",
                   help="print NMED-T reference figures beside the computed ones")
    return parser


def _overrides(args) -> dict:
    out = {}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    if getattr(args, "seed", None) is not None:
        out["synth.seed" if args.command == "synth" else "train.seed"] = args.seed
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value
    return out


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NEUROBEAT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NEUROBEAT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _stem(subject: str, song: str) -> str:
    return f"{subject}_{song}"


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg):
    path = gen_dataset(cfg.synth(), args.out)
    print(path)


def cmd_preprocess(args, cfg):
    manifest = load_manifest(args.manifest)
    spec = design_bandpass(cfg["filter.low_hz"], cfg["filter.high_hz"], cfg["filter.order"],
                           manifest.sample_rate_hz)
    out = Path(args.out)
    (out / "eeg").mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(manifest)
    entries = []
    for rec in dataset.recordings:
        processed = preprocess(rec, spec, cfg["pad.target_samples"] or None)
        path = out / "eeg" / f"{_stem(rec.subject_id, rec.song_id)}.eeg"
        write_eeg_binary(processed, path)
        entries.append(RecordingEntry(rec.subject_id, rec.song_id, path))
    processed_manifest = DatasetManifest(
        MANIFEST_VERSION, manifest.sample_rate_hz, manifest.subjects, manifest.songs, tuple(entries), out
    )
    print(write_manifest(processed_manifest, out / "manifest.json"))


def cmd_train(args, cfg):
    manifest = load_manifest(args.manifest)
    train_cfg = cfg.train()
    dataset = load_dataset(manifest)
    results = cross_validate(dataset, train_cfg, cfg.peak(), cfg.tolerances(), threads=_threads(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    folds, rows = {}, []
    with open(out / "loss_history.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("fold,epoch,mean_loss\n")
        for res in results:
            for epoch, loss in enumerate(res.history, 1):
                fh.write(f"{res.fold_index},{epoch},{loss:.9f}\n")
    for res in results:
        name = f"fold_{res.fold_index:02d}.nbk"
        save_checkpoint(res.checkpoint, out / name)
        folds[res.held_out_subject] = name
        for (song, tol), metrics in res.metrics.items():
            rows.append(MetricsRow(train_cfg.arch, res.held_out_subject, song, tol, metrics))
    (out / "folds.json").write_text(json.dumps(folds, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_metrics_csv(rows, out / "cv_metrics.csv")
    mean_f = np.mean([r.metrics.f_measure for r in select(rows, cfg["eval.tolerance"])] or [np.nan])
    print(f"{len(results)} folds; out-of-fold mean F at {cfg['eval.tolerance']} s: {mean_f:.4f}")


def cmd_predict(args, cfg):
    manifest = load_manifest(args.manifest)
    models = Path(args.models)
    try:
        folds = json.loads((models / "folds.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {models / 'folds.json'}: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = {}
    for rec in load_dataset(manifest).recordings:
        if rec.subject_id not in folds:
            raise DataError(f"no held-out model for subject {rec.subject_id!r}")
        name = folds[rec.subject_id]
        if name not in cache:
            cache[name] = load_checkpoint(models / name)
        curve = predict_activation(cache[name], rec)
        save_activation(curve, out / f"{_stem(rec.subject_id, rec.song_id)}.act")


def cmd_detect(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(Path(args.activations).glob("*.act"))
    if not files:
        raise DataError(f"no .act files in {args.activations}")
    for path in files:
        write_onsets(peak_pick(load_activation(path), cfg.peak()), out / f"{path.stem}.txt")


def cmd_baseline(args, cfg):
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "dummy":
        for entry in manifest.recordings:
            ann = dummy_detector(manifest.song(entry.song_id).duration_s)
            write_onsets(ann, out / f"{_stem(entry.subject_id, entry.song_id)}.txt")
        return
    peak_cfg = cfg.peak().rescaled(125.0, manifest.sample_rate_hz / cfg["stft.hop"])
    for rec in load_dataset(manifest).recordings:
        ann = flux_baseline(rec, cfg.stft(), peak_cfg, cfg["cluster.gap_s"])
        write_onsets(ann, out / f"{_stem(rec.subject_id, rec.song_id)}.txt")


def _score(args, tolerances) -> list[MetricsRow]:
    manifest = load_manifest(args.manifest)
    refs = {s.song_id: read_onsets(s.onsets_path) for s in manifest.songs}
    rows = []
    for spec in args.estimates:
        if "=" not in spec:
            raise UsageError(f"--estimates expects METHOD=DIR, got {spec!r}")
        method, directory = spec.split("=", 1)
        for entry in manifest.recordings:
            path = Path(directory) / f"{_stem(entry.subject_id, entry.song_id)}.txt"
            if not path.exists():
                raise DataError(f"missing estimate file {path}")
            est = read_onsets(path)
            for tol in tolerances:
                rows.append(MetricsRow(method, entry.subject_id, entry.song_id, float(tol),
                                       evaluate_onsets(refs[entry.song_id], est, tol)))
    return rows


def cmd_evaluate(args, cfg):
    write_metrics_csv(_score(args, [cfg["eval.tolerance"]]), args.out)


def cmd_sweep(args, cfg):
    write_metrics_csv(_score(args, cfg.tolerances()), args.out)


def cmd_report(args, cfg):
    rows = []
    for path in args.metrics:
        rows.extend(read_metrics_csv(path))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dict_csv(summarize(rows), out / "summary.csv")

    tol = cfg["report.tolerance"]
    at_tol = select(rows, tol)
    if not at_tol:
        raise DataError(f"no metrics rows at tolerance {tol}")
    methods = methods_in(at_tol)
    for metric in ("precision", "recall", "f_measure"):
        groups = {m: [getattr(r.metrics, metric) for r in at_tol if r.method == m] for m in methods}
        svg = render_boxplot_svg(groups, f"{metric} @ {tol:g} s")
        (out / f"boxplot_{metric}.svg").write_text(svg, encoding="utf-8")

    subject_rows = []
    for method in methods:
        per_subject = per_subject_f(at_tol, method)
        stats = aggregate_subjects(list(per_subject.values()))
        subject_rows.append({"method": method, **{k: float(v) for k, v in stats.items()}})
    write_dict_csv(subject_rows, out / "subjects.csv")

    correlations = []
    if args.manifest and args.correlate in methods:
        manifest = load_manifest(args.manifest)
        per_subject = per_subject_f(at_tol, args.correlate)
        meta = [s for s in manifest.subjects if s.subject_id in per_subject]
        f = [per_subject[s.subject_id] for s in meta]
        for field in ("age", "musical_training_years", "listening_hours_per_week"):
            x = [float(getattr(s, field)) for s in meta]
            try:
                r = pearson_r(x, f)
                p = permutation_pvalue(x, f, cfg["report.n_perm"], cfg["report.seed"])
            except DataError as exc:
                log.warning("skipping correlation with %s: %s", field, exc)
                continue
            correlations.append({"method": args.correlate, "field": field, "n": len(f), "r": r, "p_value": p})
        write_dict_csv(correlations, out / "correlations.csv")

    for rec in subject_rows:
        print(f"{rec['method']:>8}  per-subject F @ {tol:g} s: mean {rec['mean']:.3f}  std {rec['std']:.3f}")
    for c in correlations:
        print(f"{c['method']:>8}  F vs {c['field']}: r = {c['r']:+.3f}, p = {c['p_value']:.4f}")
    if args.reference:
        _print_reference(at_tol, subject_rows)


def _print_reference(at_tol, subject_rows):
    """Side-by-side with the NMED-T reference numbers; informational, never gated."""
    def mean_f(method):
        vals = [r.metrics.f_measure for r in at_tol if r.method == method]
        return float(np.mean(vals)) if vals else float("nan")

    gru = next((r for r in subject_rows if r["method"] == "gru"), None)
    computed = {
        "gru_f_measure": mean_f("gru"),
        "flux_f_measure": mean_f("flux"),
        "per_subject_f_mean": gru["mean"] if gru else float("nan"),
        "per_subject_f_std": gru["std"] if gru else float("nan"),
    }
    print("reference mode (NMED-T reference values; only comparable on the real dataset)")
    print(f"{'quantity':<22}{'computed':>10}{'reference':>11}")
    for key, ref in REFERENCE_VALUES.items():
        print(f"{key:<22}{computed[key]:>10.3f}{ref:>11.3f}")


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "predict": cmd_predict,
    "detect": cmd_detect,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.build(args.config, _overrides(args))
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"neurobeat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NeurobeatError, OSError) as exc:
        print(f"neurobeat {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"neurobeat {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
