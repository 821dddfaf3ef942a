"""Windowed spike-count readout with stimulation-site masking."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .signal_model import GRID_SIDE, N_CHANNELS
from .spike_detection import SpikeTrain
from .stimulus import StimulusPattern


@dataclass(frozen=True)
class ReadoutParams:
    window_s: float = 0.005
    mask_half_width: int = 2

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if self.mask_half_width < 0:
            raise ValueError("mask_half_width must be >= 0")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One trial's 4096-entry response; ``mask`` marks zeroed stimulation-region entries.

    Spike-count vectors are integer and non-negative. Artificial-reservoir
    vectors hold real-valued, signed unit states.
    """

    values: np.ndarray
    label: int
    mask: np.ndarray
    session: str = ""
    trial: int = 0
    onset_s: float = 0.0
    window_s: float = 0.0

    def __post_init__(self):
        v = np.array(self.values)
        m = np.array(self.mask, dtype=bool)
        if v.shape != (N_CHANNELS,) or m.shape != (N_CHANNELS,):
            raise ValueError(f"feature vectors have exactly {N_CHANNELS} entries")
        if v.dtype.kind in "iu" and np.any(v < 0):
            raise ValueError("spike counts must be non-negative")
        if np.any(v[m] != 0):
            raise ValueError("masked entries must be zero")
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)


def stimulation_mask(pattern: StimulusPattern, half_width: int) -> np.ndarray:
    """Channels within Chebyshev distance ``half_width`` of any stimulated electrode."""
    grid = np.zeros((GRID_SIDE, GRID_SIDE), dtype=bool)
    for e in pattern.electrodes():
        i, j = divmod(e, GRID_SIDE)
        grid[max(0, i - half_width): i + half_width + 1, max(0, j - half_width): j + half_width + 1] = True
    return grid.ravel()


def window_samples(train: SpikeTrain, t_s: float, window_s: float) -> tuple[int, int]:
    """Inclusive sample bounds ``[start, stop]`` of the readout window."""
    fs = train.sample_rate_hz
    start = train.time_to_sample(t_s)
    return start, start + int(round(window_s * fs))


def extract_features(
    train: SpikeTrain,
    t_s: float,
    params: ReadoutParams,
    pattern: StimulusPattern,
    session: str = "",
    trial: int = 0,
) -> FeatureVector:
    """Per-channel spike counts over the closed window ``[t_s, t_s + W]``.

    ``t_s`` is in the train's time frame (onset-relative seconds). Channels
    near a stimulated electrode are forced to zero.
    """
    start, stop = window_samples(train, t_s, params.window_s)
    if start < 0:
        raise ValueError("readout window starts before the recording")
    if train.n_samples is not None and stop >= train.n_samples:
        raise ValueError("readout window extends past the end of the recording")
    inside = (train.samples >= start) & (train.samples <= stop)
    counts = np.bincount(train.channels[inside], minlength=train.n_channels)[:N_CHANNELS]
    mask = stimulation_mask(pattern, params.mask_half_width)
    counts[mask] = 0
    return FeatureVector(counts.astype(np.int64), pattern.label, mask, session, trial, t_s, params.window_s)


def shuffle_spatial(fv: FeatureVector, seed: int) -> FeatureVector:
    """Randomly permute the unmasked entries; total count and mask are kept."""
    rng = np.random.default_rng(seed)
    free = np.flatnonzero(~fv.mask)
    values = np.array(fv.values)
    values[free] = values[free][rng.permutation(free.size)]
    return replace(fv, values=values)


def feature_matrix(fvs: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([fv.values for fv in fvs]).astype(np.float64)
    y = np.array([fv.label for fv in fvs], dtype=np.int64)
    return X, y


FEATURE_HEADER = ["label", "session", "trial"] + [f"c{k}" for k in range(N_CHANNELS)]


def _fmt(v) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_features_csv(fvs: Sequence[FeatureVector], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for fv in fvs:
            w.writerow([fv.label, fv.session, fv.trial] + [_fmt(v) for v in fv.values])


def read_features_csv(path: str | Path) -> list[FeatureVector]:
    """Load feature rows. Masks are not part of the CSV schema, so the
    returned vectors carry an empty mask."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != FEATURE_HEADER[:3] or len(header) != len(FEATURE_HEADER):
            raise ValueError("unexpected feature CSV header")
        for row in reader:
            vals = np.array([float(x) for x in row[3:]])
            if np.all(vals == np.round(vals)):
                vals = vals.astype(np.int64)
            out.append(FeatureVector(vals, int(row[0]), np.zeros(N_CHANNELS, bool), row[1], int(row[2])))
    return out
