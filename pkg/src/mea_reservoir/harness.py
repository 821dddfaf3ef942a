"""Experiment orchestration: sessions, window sweeps, accuracy tables, cross-day
transfer and the artificial-reservoir comparison.

A session is one (replicate, day) pair. Its canonical stored artifact is the
per-trial spike data around stimulus onset, so features for any readout
window can be re-extracted without re-simulating. Every seed is derived from
the master seed and a fixed key path, so a (config, master seed) pair fully
determines every output file.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy.stats import spearmanr

from . import __version__
from .classifier import CVReport, Hyperparams, cross_session_eval, cross_validate
from .culture import (CultureModel, CultureParams, DriftParams, SimulationError, TraceOptions,
                      advance_day, build_culture, record_spontaneous, simulate_trial)
from .readout import FeatureVector, ReadoutParams, extract_features, write_features_csv
from .reservoir import ARModel, NoiseCalibration, ar_dataset, build_ar, calibrate_noise
from .signal_model import channel_to_grid
from .spike_detection import DetectorParams, SpikeTrain, read_spike_csv, write_spike_csv
from .stimulus import (GlyphLayout, PulseParams, StimulationSchedule, build_schedule,
                       digit_patterns, write_schedule_csv)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ScheduleConfig:
    repetitions: int = 20
    isi_s: float = 10.0
    seed: int = 0


@dataclass(frozen=True)
class TrialConfig:
    """Each trial is simulated from rest over ``[-pre_s, post_s]`` around onset;
    only ``[-store_before_s, post_s]`` is kept on disk."""

    pre_s: float = 0.2
    post_s: float = 0.1
    store_before_s: float = 0.05
    spontaneous_s: float = 10.0


@dataclass(frozen=True)
class ARConfig:
    n_units: int = 4096
    density: float = 0.1
    spectral_radius: float = 0.9
    input_gain: float = 1.0
    noise_seeds: int = 10
    noise_multipliers: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0)
    calibration_windows: int = 100


@dataclass(frozen=True)
class TraceConfig:
    """End-to-end path: render spikes to raw traces and re-detect them."""

    enabled: bool = False
    noise_sd_uv: float = 12.5


@dataclass(frozen=True)
class ExperimentConfig:
    culture: CultureParams = field(default_factory=CultureParams)
    drift: DriftParams = field(default_factory=DriftParams)
    layout: GlyphLayout = field(default_factory=GlyphLayout)
    pulse: PulseParams = field(default_factory=PulseParams)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    trial: TrialConfig = field(default_factory=TrialConfig)
    readout: ReadoutParams = field(default_factory=ReadoutParams)
    windows_ms: tuple[float, ...] = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    classifier: Hyperparams = field(default_factory=Hyperparams)
    folds: int = 5
    replicates: int = 3
    days: int = 3
    ar: ARConfig = field(default_factory=ARConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    detector: DetectorParams = field(default_factory=DetectorParams)
    master_seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        w = list(self.windows_ms)
        if not w:
            raise ValueError("window list must not be empty")
        if any(b <= a for a, b in zip(w, w[1:])) or w[0] <= 0:
            raise ValueError("window list must be positive and strictly increasing")
        if max(w) / 1e3 > self.trial.post_s or self.readout.window_s > self.trial.post_s:
            raise ValueError("readout windows must fit inside trial.post_s")
        if not 0 <= self.trial.store_before_s <= self.trial.pre_s:
            raise ValueError("store_before_s must lie in [0, pre_s]")
        if self.replicates < 1 or self.days < 1:
            raise ValueError("need at least one replicate and one day")
        if self.schedule.repetitions < self.folds:
            raise ValueError("each class needs at least one trial per fold")

    @property
    def windows_s(self) -> tuple[float, ...]:
        return tuple(w / 1e3 for w in self.windows_ms)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def config_hash(self) -> str:
        """Hash of everything except the master seed and output location."""
        d = self.to_dict()
        d.pop("master_seed")
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    defaults = cls()
    kw = {}
    for name, value in data.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            kw[name] = _build(type(current), value, f"{where}.{name}")
        elif isinstance(current, tuple):
            kw[name] = tuple(value) if value is not None else None
        else:
            kw[name] = value
    return cls(**kw)


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    readout = data.get("readout")
    if isinstance(readout, dict):
        readout = dict(readout)
        # user-facing window units are milliseconds
        if "window_ms" in readout:
            readout["window_s"] = readout.pop("window_ms") / 1e3
        if "windows_ms" in readout:
            data["windows_ms"] = readout.pop("windows_ms")
        data["readout"] = readout
    pulse = data.get("pulse")
    if isinstance(pulse, dict) and "phase_us" in pulse:
        pulse = dict(pulse)
        pulse["phase_pos_us"] = pulse["phase_neg_us"] = pulse.pop("phase_us")
        data["pulse"] = pulse
    return _build(ExperimentConfig, data, "config")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))



# ---------------------------------------------------------------- seeds

def derive_seed(master: int, *path) -> int:
    """Stable 32-bit seed for a key path under ``master``."""
    keys = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in path]
    return int(np.random.SeedSequence([int(master), *keys]).generate_state(1)[0])


# ---------------------------------------------------------------- sessions

@dataclass(eq=False)
class SessionDataset:
    replicate: int
    day: int
    schedule: StimulationSchedule
    trains: list[SpikeTrain]  # one per trial, sample 0 at -store_before_s
    spontaneous: SpikeTrain
    config_hash: str
    model_digest: str
    seeds: dict = field(default_factory=dict)
    readout: ReadoutParams = field(default_factory=ReadoutParams)

    @property
    def name(self) -> str:
        return f"br{self.replicate}_day{self.day}"

    @property
    def labels(self) -> np.ndarray:
        return self.schedule.labels()

    def features(self, window_s: float | None = None) -> list[FeatureVector]:
        params = self.readout if window_s is None else dataclasses.replace(self.readout, window_s=window_s)
        return [
            extract_features(tr, 0.0, params, t.pattern, self.name, t.index)
            for tr, t in zip(self.trains, self.schedule.trials)
        ]


def make_schedule(config: ExperimentConfig) -> StimulationSchedule:
    patterns = digit_patterns(config.layout, config.pulse)
    s = config.schedule
    return build_schedule(patterns, s.repetitions, s.isi_s, s.seed)


def culture_for_day(config: ExperimentConfig, replicate: int, day: int) -> CultureModel:
    """Replicate's culture after ``day - 1`` drift steps."""
    model = build_culture(config.culture, derive_seed(config.master_seed, "culture", replicate))
    for d in range(2, day + 1):
        model = advance_day(model, config.drift, derive_seed(config.master_seed, "drift", replicate, d))
    return model


def run_session(config: ExperimentConfig, replicate: int, day: int, out_dir: str | Path | None = None) -> SessionDataset:
    """Simulate one session; persist it under ``out_dir`` when given."""
    ms = config.master_seed
    model = culture_for_day(config, replicate, day)
    schedule = make_schedule(config)
    fs = config.culture.sample_rate_hz
    tc = config.trial
    keep_from = int(round((tc.pre_s - tc.store_before_s) * fs))
    keep_to = int(round((tc.pre_s + tc.post_s) * fs))
    trace = TraceOptions(config.trace.noise_sd_uv, detector=config.detector)
    trains = []
    for t in schedule.trials:
        seed = derive_seed(ms, "trial", replicate, day, t.index)
        try:
            if config.trace.enabled:
                full, _ = simulate_trial(model, t.pattern, tc.pre_s, tc.post_s, seed, emit_trace=True, trace=trace)
            else:
                full = simulate_trial(model, t.pattern, tc.pre_s, tc.post_s, seed)
        except SimulationError as e:
            raise SimulationError(f"BR{replicate} day {day} trial {t.index}: {e}") from e
        trains.append(full.restrict(keep_from, keep_to))
    spont_seed = derive_seed(ms, "spont", replicate, day)
    spont = record_spontaneous(model, tc.spontaneous_s, spont_seed)
    session = SessionDataset(
        replicate, day, schedule, trains, spont, config.config_hash(), model.digest(),
        {"culture": model.seed, "spontaneous": spont_seed, "schedule": config.schedule.seed},
        config.readout,
    )
    if out_dir is not None:
        save_session(session, config, out_dir)
    return session


SPIKES_HEADER = ["trial", "label", "channel", "i", "j", "sample_index", "time_s"]


def save_session(session: SessionDataset, config: ExperimentConfig, out_dir: str | Path) -> Path:
    d = Path(out_dir) / session.name
    d.mkdir(parents=True, exist_ok=True)
    write_schedule_csv(session.schedule, d / "schedule.csv")
    fs = config.culture.sample_rate_hz
    before = int(round(config.trial.store_before_s * fs))
    with open(d / "spikes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPIKES_HEADER)
        for tr, t in zip(session.trains, session.schedule.trials):
            if not len(tr):
                continue
            rel = tr.samples - before
            ii, jj = channel_to_grid(tr.channels)
            for c, i, j, s in zip(tr.channels.tolist(), ii.tolist(), jj.tolist(), rel.tolist()):
                w.writerow([t.index, t.label, c, i, j, s, f"{s / fs:.6f}"])
    write_spike_csv(session.spontaneous, d / "spontaneous.csv")
    write_features_csv(session.features(), d / "features.csv")
    write_manifest(d, config, "session", {
        "replicate": session.replicate, "day": session.day,
        "model_digest": session.model_digest, "seeds": session.seeds,
        "n_trials": len(session.trains),
    })
    return d


def load_session(config: ExperimentConfig, replicate: int, day: int, out_dir: str | Path) -> SessionDataset:
    """Rebuild a session from its stored spike data."""
    d = Path(out_dir) / f"br{replicate}_day{day}"
    manifest = json.loads((d / "manifest.json").read_text())
    if manifest["config_hash"] != config.config_hash() or manifest["master_seed"] != config.master_seed:
        raise ValueError(f"{d} was produced by a different configuration")
    schedule = make_schedule(config)
    fs = config.culture.sample_rate_hz
    tc = config.trial
    before = int(round(tc.store_before_s * fs))
    n_keep = int(round((tc.pre_s + tc.post_s) * fs)) - int(round((tc.pre_s - tc.store_before_s) * fs))
    rows = np.loadtxt(d / "spikes.csv", delimiter=",", skiprows=1, usecols=(0, 2, 5), dtype=np.int64, ndmin=2)
    order = np.argsort(rows[:, 0], kind="stable")
    rows = rows[order]
    bounds = np.searchsorted(rows[:, 0], np.arange(len(schedule) + 1))
    trains = []
    for m in range(len(schedule)):
        r = rows[bounds[m]:bounds[m + 1]]
        trains.append(SpikeTrain(r[:, 1], r[:, 2] + before, sample_rate_hz=fs,
                                 t0_offset_s=-before / fs, n_samples=n_keep))
    spont = read_spike_csv(d / "spontaneous.csv", sample_rate_hz=fs, t0_offset_s=0.0)
    spont = dataclasses.replace(spont, n_samples=int(round(tc.spontaneous_s * fs)))
    return SessionDataset(replicate, day, schedule, trains, spont, manifest["config_hash"],
                          manifest["model_digest"], manifest["seeds"], config.readout)


def session_grid(config: ExperimentConfig) -> list[tuple[int, int]]:
    return [(r, d) for r in range(1, config.replicates + 1) for d in range(1, config.days + 1)]


def get_sessions(config: ExperimentConfig, sessions_dir: str | Path) -> list[SessionDataset]:
    """Load every session of the grid from disk, simulating the missing ones first."""
    out = []
    for r, d in session_grid(config):
        try:
            s = load_session(config, r, d, sessions_dir)
        except (FileNotFoundError, ValueError, KeyError):
            log.info("simulating BR%d day %d", r, d)
            run_session(config, r, d, sessions_dir)
            s = load_session(config, r, d, sessions_dir)
        out.append(s)
    return out


# ---------------------------------------------------------------- analyses

def _cv(session: SessionDataset, config: ExperimentConfig, window_s: float | None = None) -> CVReport:
    seed = derive_seed(config.master_seed, "cv", session.replicate, session.day)
    return cross_validate(session.features(window_s), k=config.folds, hp=config.classifier, seed=seed)


def _sem(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0


@dataclass
class WindowSweep:
    windows_ms: tuple[float, ...]
    session_names: list[str]
    session_mean: np.ndarray  # (n_windows, n_sessions) fold-mean accuracy
    session_sd: np.ndarray  # fold sd
    predictions: list[tuple]  # (window_ms, session, trial, label, fold, predicted)

    @property
    def mean(self) -> np.ndarray:
        return self.session_mean.mean(axis=1)

    @property
    def sem(self) -> np.ndarray:
        return np.array([_sem(row) for row in self.session_mean])

    @property
    def sd(self) -> np.ndarray:
        n = self.session_mean.shape[1]
        return self.session_mean.std(axis=1, ddof=1) if n > 1 else np.zeros(len(self.windows_ms))

    @property
    def pooled_fold_sd(self) -> np.ndarray:
        """Root-mean-square of the within-session fold sds."""
        return np.sqrt((self.session_sd ** 2).mean(axis=1))


def window_sweep(sessions: Sequence[SessionDataset], config: ExperimentConfig,
                 windows_ms: Sequence[float] | None = None) -> WindowSweep:
    """Cross-validate every session at every window; folds are shared across windows."""
    if not sessions:
        raise ValueError("need at least one session")
    windows_ms = tuple(config.windows_ms if windows_ms is None else windows_ms)
    means = np.zeros((len(windows_ms), len(sessions)))
    sds = np.zeros_like(means)
    preds = []
    for a, w in enumerate(windows_ms):
        for b, s in enumerate(sessions):
            rep = _cv(s, config, w / 1e3)
            means[a, b], sds[a, b] = rep.mean, rep.sd
            fold_of = np.empty(len(s.trains), dtype=np.int64)
            for f, idx in enumerate(rep.folds):
                fold_of[idx] = f
            for m, t in enumerate(s.schedule.trials):
                preds.append((w, s.name, t.index, t.label, int(fold_of[m]), int(rep.predictions[m])))
    return WindowSweep(windows_ms, [s.name for s in sessions], means, sds, preds)


@dataclass
class AccuracyMatrix:
    row_names: list[str]
    values: np.ndarray  # (n_rows, 10) per-digit accuracy


def ar_model(config: ExperimentConfig) -> ARModel:
    a = config.ar
    return build_ar(a.n_units, a.density, a.spectral_radius, a.input_gain,
                    derive_seed(config.master_seed, "ar"))


def ar_calibration(sessions: Sequence[SessionDataset], config: ExperimentConfig,
                   window_s: float | None = None) -> NoiseCalibration:
    """Noise means from the first session's spontaneous recording."""
    w = config.readout.window_s if window_s is None else window_s
    return calibrate_noise(sessions[0].spontaneous, w, config.ar.calibration_windows,
                           derive_seed(config.master_seed, "calibration"))


def ar_features(model: ARModel, noise: NoiseCalibration | None, config: ExperimentConfig,
                noise_seed: int, multiplier: float = 1.0) -> list[FeatureVector]:
    """AR responses to the session schedule, one noise draw per trial."""
    schedule = make_schedule(config)
    patterns = [t.pattern for t in schedule.trials]
    seeds = [derive_seed(config.master_seed, "ar-noise", noise_seed, m) for m in range(len(patterns))]
    return ar_dataset(model, patterns, noise, seeds, config.readout, multiplier, session=f"ar_noise{noise_seed}")


def ar_cv(model: ARModel, noise: NoiseCalibration | None, config: ExperimentConfig,
          noise_seed: int, multiplier: float = 1.0) -> CVReport:
    fvs = ar_features(model, noise, config, noise_seed, multiplier)
    return cross_validate(fvs, k=config.folds, hp=config.classifier,
                          seed=derive_seed(config.master_seed, "ar-cv", noise_seed))


def accuracy_matrix(sessions: Sequence[SessionDataset], config: ExperimentConfig,
                    ar: ARModel | None = None, noise: NoiseCalibration | None = None,
                    include_ar: bool = True) -> AccuracyMatrix:
    """Per-digit accuracy per replicate (averaged over days) plus an AR row
    averaged over ``config.ar.noise_seeds`` noise realizations."""
    reps = sorted({s.replicate for s in sessions})
    rows, names = [], []
    for r in reps:
        per_day = [_cv(s, config).per_class_accuracy for s in sessions if s.replicate == r]
        rows.append(np.mean(per_day, axis=0))
        names.append(f"BR{r}")
    if include_ar:
        ar = ar or ar_model(config)
        noise = noise or ar_calibration(sessions, config)
        runs = [ar_cv(ar, noise, config, k).per_class_accuracy for k in range(config.ar.noise_seeds)]
        rows.append(np.mean(runs, axis=0))
        names.append("AR")
    return AccuracyMatrix(names, np.array(rows))


@dataclass
class CrossDay:
    days: list[int]
    replicates: list[int]
    accuracy: np.ndarray  # (n_replicates, n_days); day 1 is within-day CV
    shuffled: np.ndarray  # (n_replicates, n_days)

    def mean(self) -> np.ndarray:
        return self.accuracy.mean(axis=0)

    def sd(self) -> np.ndarray:
        return self.accuracy.std(axis=0, ddof=1) if len(self.replicates) > 1 else np.zeros(len(self.days))

    def shuffled_mean(self) -> float:
        """Mean shuffled accuracy on the test days (Day 1 only if it is the sole day)."""
        cols = [b for b, d in enumerate(self.days) if d != 1] or list(range(len(self.days)))
        return float(self.shuffled[:, cols].mean())


def cross_day_experiment(sessions: Sequence[SessionDataset], config: ExperimentConfig) -> CrossDay:
    """Train on each replicate's Day 1, test on every day as recorded and shuffled.

    The Day-1 entry is the within-day cross-validated accuracy (testing the
    Day-1 model on its own training trials would be meaningless).
    """
    by = {(s.replicate, s.day): s for s in sessions}
    reps = sorted({s.replicate for s in sessions})
    days = sorted({s.day for s in sessions})
    if 1 not in days:
        raise ValueError("cross-day transfer needs Day 1 sessions")
    acc = np.zeros((len(reps), len(days)))
    shuf = np.zeros_like(acc)
    for a, r in enumerate(reps):
        train = by[(r, 1)].features()
        tests = {d: by[(r, d)].features() for d in days}
        scores = cross_session_eval(train, tests, config.classifier,
                                    derive_seed(config.master_seed, "shuffle", r))
        for b, d in enumerate(days):
            acc[a, b] = scores[d].accuracy
            shuf[a, b] = scores[d].shuffled_accuracy
        acc[a, days.index(1)] = _cv(by[(r, 1)], config).mean
    return CrossDay(days, reps, acc, shuf)


@dataclass
class ARNoiseSweep:
    multipliers: tuple[float, ...]
    accuracy: np.ndarray  # (n_multipliers, n_seeds)

    def spearman(self) -> float:
        """Rank correlation of accuracy with the noise multiplier (0 if accuracy is constant)."""
        x = np.repeat(self.multipliers, self.accuracy.shape[1])
        y = self.accuracy.ravel()
        if np.all(y == y[0]):
            return 0.0
        return float(spearmanr(x, y).statistic)


def ar_noise_sweep(sessions: Sequence[SessionDataset], config: ExperimentConfig,
                   ar: ARModel | None = None, window_s: float | None = None) -> ARNoiseSweep:
    ar = ar or ar_model(config)
    noise = ar_calibration(sessions, config, window_s)
    cfg = config if window_s is None else dataclasses.replace(
        config, readout=dataclasses.replace(config.readout, window_s=window_s))
    mults = tuple(config.ar.noise_multipliers)
    acc = np.array([[ar_cv(ar, noise, cfg, k, m).mean for k in range(config.ar.noise_seeds)] for m in mults])
    return ARNoiseSweep(mults, acc)


# ---------------------------------------------------------------- output

def write_manifest(out_dir: str | Path, config: ExperimentConfig, command: str, extra: dict | None = None) -> None:
    """``manifest.json``: config hash, seeds, tool version and a digest of every file."""
    d = Path(out_dir)
    files = {}
    for p in sorted(d.iterdir()):
        if p.is_file() and p.name != "manifest.json":
            files[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    doc = {
        "tool": "mea-reservoir",
        "version": __version__,
        "command": command,
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "config": config.to_dict() | {"output_dir": None},
        "files": files,
    }
    if extra:
        doc.update(_plain(extra))
    (d / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6f}" if isinstance(v, (float, np.floating)) else v for v in row])


def write_sweep(sweep: WindowSweep, out_dir: Path) -> None:
    from .svg import line_plot, write_svg

    write_csv(out_dir / "window_sweep.csv", ["window_ms", "mean", "sem", "sd", "pooled_fold_sd", "n_sessions"],
              [(w, m, e, s, p, len(sweep.session_names))
               for w, m, e, s, p in zip(sweep.windows_ms, sweep.mean, sweep.sem, sweep.sd, sweep.pooled_fold_sd)])
    write_csv(out_dir / "window_sweep_sessions.csv", ["window_ms", "session", "mean", "sd"],
              [(w, name, sweep.session_mean[a, b], sweep.session_sd[a, b])
               for a, w in enumerate(sweep.windows_ms) for b, name in enumerate(sweep.session_names)])
    write_csv(out_dir / "predictions.csv", ["window_ms", "session", "trial", "label", "fold", "predicted"],
              sweep.predictions)
    write_svg(line_plot(sweep.windows_ms, {"mean ± SEM": (sweep.mean, sweep.sem)},
                        "readout window (ms)", "accuracy", "Accuracy vs readout window"),
              out_dir / "window_sweep.svg")


def write_matrix(matrix: AccuracyMatrix, out_dir: Path) -> None:
    from .svg import heatmap, write_svg

    write_csv(out_dir / "accuracy_matrix.csv", ["row"] + [f"digit_{d}" for d in range(matrix.values.shape[1])],
              [[name, *map(float, row)] for name, row in zip(matrix.row_names, matrix.values)])
    write_svg(heatmap(matrix.values, matrix.row_names, [str(d) for d in range(matrix.values.shape[1])],
                      "Per-digit accuracy (%)"), out_dir / "accuracy_matrix.svg")


def write_cross_day(cd: CrossDay, out_dir: Path) -> None:
    from .svg import line_plot, write_svg

    reps = [f"br{r}" for r in cd.replicates]
    rows = []
    for b, d in enumerate(cd.days):
        rows.append(["recorded", d, float(cd.mean()[b]), float(cd.sd()[b]), *map(float, cd.accuracy[:, b])])
    sh_sd = cd.shuffled.std(axis=0, ddof=1) if len(reps) > 1 else np.zeros(len(cd.days))
    for b, d in enumerate(cd.days):
        rows.append(["shuffled", d, float(cd.shuffled[:, b].mean()), float(sh_sd[b]), *map(float, cd.shuffled[:, b])])
    write_csv(out_dir / "cross_day.csv", ["condition", "day", "mean", "sd", *reps], rows)
    write_svg(line_plot(cd.days, {"recorded": (cd.mean(), cd.sd()), "shuffled": (cd.shuffled.mean(axis=0), sh_sd)},
                        "test day", "accuracy", "Day-1 model on later days", ylim=(0.0, 1.0)),
              out_dir / "cross_day.svg")


def write_ar_sweep(sw: ARNoiseSweep, out_dir: Path) -> None:
    from .svg import line_plot, write_svg

    write_csv(out_dir / "ar_noise.csv", ["multiplier", "noise_seed", "accuracy"],
              [(float(m), k, float(sw.accuracy[a, k])) for a, m in enumerate(sw.multipliers)
               for k in range(sw.accuracy.shape[1])])
    write_svg(line_plot(sw.multipliers, {"AR": (sw.accuracy.mean(axis=1), sw.accuracy.std(axis=1))},
                        "noise multiplier", "accuracy", "Artificial reservoir vs noise", ylim=(0.0, 1.05)),
              out_dir / "ar_noise.svg")
