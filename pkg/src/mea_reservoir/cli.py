"""Command-line entry point ``mea-reservoir``.

Simulated sessions are cached under ``<out>/sessions`` and reused by later
commands as long as the configuration hash and master seed match.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import harness as H
from .classifier import save_model, train_slp, predict_many
from .culture import TraceOptions, simulate_trial
from .readout import feature_matrix, write_features_csv
from .signal_model import GRID_SIDE, read_mear, write_mear
from .spike_detection import detect_spikes, write_spike_csv
from .stimulus import write_schedule_csv
from .svg import heatmap, write_svg

log = logging.getLogger("mea_reservoir")

COMMANDS = ["simulate", "detect", "schedule", "extract", "train", "eval",
            "sweep-window", "cross-day", "ar-baseline", "report"]


def _sessions(cfg, out: Path):
    d = out / "sessions"
    sessions = H.get_sessions(cfg, d)
    H.write_manifest(d, cfg, "simulate", {"sessions": [s.name for s in sessions]})
    return sessions


def _dir(out: Path, name: str) -> Path:
    d = out / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_simulate(cfg, out, args):
    _sessions(cfg, out)
    return out / "sessions"


def cmd_schedule(cfg, out, args):
    d = _dir(out, "schedule")
    write_schedule_csv(H.make_schedule(cfg), d / "schedule.csv")
    H.write_manifest(d, cfg, "schedule", {"seeds": {"schedule": cfg.schedule.seed}})
    return d


def cmd_detect(cfg, out, args):
    """Detect spikes in a MEAR recording, or in a rendered trial when no input is given."""
    d = _dir(out, "detect")
    extra = {}
    if args.input:
        rec = read_mear(args.input)
        extra["input"] = str(args.input)
    else:
        # one simulated trial rendered on a 64-channel row through the glyph
        model = H.culture_for_day(cfg, 1, 1)
        trial = H.make_schedule(cfg).trials[0]
        row = cfg.layout.origin[0] + 1
        channels = tuple(range(row * GRID_SIDE, (row + 1) * GRID_SIDE))
        seed = H.derive_seed(cfg.master_seed, "detect")
        opts = TraceOptions(cfg.trace.noise_sd_uv, detector=cfg.detector, channels=channels)
        truth = simulate_trial(model, trial.pattern, cfg.trial.pre_s, cfg.trial.post_s, seed)
        _, rec = simulate_trial(model, trial.pattern, cfg.trial.pre_s, cfg.trial.post_s, seed,
                                emit_trace=True, trace=opts)
        keep = np.isin(truth.channels, channels)
        truth = dataclasses.replace(truth, channels=truth.channels[keep], samples=truth.samples[keep])
        write_spike_csv(truth, d / "ground_truth.csv")
        write_mear(rec, d / "recording.mear")
        extra["seeds"] = {"trial": seed}
    found = detect_spikes(rec, cfg.detector)
    write_spike_csv(found, d / "spikes.csv")
    H.write_manifest(d, cfg, "detect", extra)
    return d


def cmd_extract(cfg, out, args):
    d = _dir(out, "features")
    for s in _sessions(cfg, out):
        write_features_csv(s.features(), d / f"{s.name}.csv")
    H.write_manifest(d, cfg, "extract", {"window_s": cfg.readout.window_s})
    return d


def cmd_train(cfg, out, args):
    d = _dir(out, "train")
    sessions = [s for s in _sessions(cfg, out) if s.replicate == 1 and s.day == 1]
    fvs = sessions[0].features()
    model = train_slp(fvs, hp=cfg.classifier)
    save_model(model, d / "model.slpm")
    X, y = feature_matrix(fvs)
    acc = float(np.mean(predict_many(model, X) == y))
    H.write_csv(d / "train_summary.csv", ["session", "n_trials", "train_accuracy"], [(sessions[0].name, len(fvs), acc)])
    H.write_manifest(d, cfg, "train", {"training_session": sessions[0].name})
    return d


def cmd_eval(cfg, out, args):
    d = _dir(out, "eval")
    fold_rows, class_rows = [], []
    for s in _sessions(cfg, out):
        rep = H._cv(s, cfg)
        fold_rows += [(s.name, f, float(a)) for f, a in enumerate(rep.fold_accuracy)]
        class_rows.append([s.name, *map(float, rep.per_class_accuracy)])
    H.write_csv(d / "cv_folds.csv", ["session", "fold", "accuracy"], fold_rows)
    H.write_csv(d / "cv_per_class.csv", ["session"] + [f"digit_{k}" for k in range(10)], class_rows)
    write_svg(heatmap([r[1:] for r in class_rows], [r[0] for r in class_rows], [str(k) for k in range(10)],
                      "Per-digit CV accuracy (%)"), d / "cv_per_class.svg")
    H.write_manifest(d, cfg, "eval")
    return d


def cmd_sweep(cfg, out, args):
    d = _dir(out, "sweep")
    H.write_sweep(H.window_sweep(_sessions(cfg, out), cfg), d)
    H.write_manifest(d, cfg, "sweep-window")
    return d


def cmd_cross_day(cfg, out, args):
    d = _dir(out, "cross_day")
    H.write_cross_day(H.cross_day_experiment(_sessions(cfg, out), cfg), d)
    H.write_manifest(d, cfg, "cross-day")
    return d


def cmd_ar(cfg, out, args):
    d = _dir(out, "ar")
    sessions = _sessions(cfg, out)
    ar = H.ar_model(cfg)
    write_features_csv(H.ar_features(ar, H.ar_calibration(sessions, cfg), cfg, 0), d / "ar_features.csv")
    H.write_ar_sweep(H.ar_noise_sweep(sessions, cfg, ar), d)
    H.write_manifest(d, cfg, "ar-baseline", {"seeds": {"ar": ar.seed}})
    return d


def cmd_report(cfg, out, args):
    d = _dir(out, "report")
    sessions = _sessions(cfg, out)
    ar = H.ar_model(cfg)
    sweep = H.window_sweep(sessions, cfg)
    H.write_sweep(sweep, d)
    H.write_matrix(H.accuracy_matrix(sessions, cfg, ar), d)
    H.write_cross_day(H.cross_day_experiment(sessions, cfg), d)
    H.write_ar_sweep(H.ar_noise_sweep(sessions, cfg, ar), d)
    H.write_manifest(d, cfg, "report", {"seeds": {"ar": ar.seed}})
    return d


HANDLERS = {
    "simulate": cmd_simulate, "detect": cmd_detect, "schedule": cmd_schedule,
    "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
    "sweep-window": cmd_sweep, "cross-day": cmd_cross_day, "ar-baseline": cmd_ar,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mea-reservoir", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None, help="YAML experiment config (defaults if omitted)")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", type=Path, default=None, help="output directory override")
    p.add_argument("--input", type=Path, default=None, help="MEAR recording for 'detect'")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = H.load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(args.out))
    except (OSError, ValueError, TypeError) as e:
        print(f"mea-reservoir: bad config: {e}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = HANDLERS[args.command](cfg, out, args)
    print(d)
    return 0


if __name__ == "__main__":
    sys.exit(main())
