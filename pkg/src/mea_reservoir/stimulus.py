"""Seven-segment digit glyphs mapped to bipolar electrode pairs, and trial schedules."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .signal_model import GRID_SIDE, grid_to_channel

SEGMENTS = "ABCDEFG"

SEVEN_SEGMENT = {
    0: "ABCDEF",
    1: "BC",
    2: "ABDEG",
    3: "ABCDG",
    4: "BCFG",
    5: "ACDFG",
    6: "ACDEFG",
    7: "ABC",
    8: "ABCDEFG",
    9: "ABCDFG",
}


@dataclass(frozen=True)
class PulseParams:
    """Rectangular biphasic pulse, amplitude per electrode pair."""

    amplitude_ua: float = 4.0
    phase_pos_us: float = 200.0
    phase_neg_us: float = 200.0

    def __post_init__(self):
        if self.amplitude_ua <= 0 or self.phase_pos_us <= 0 or self.phase_neg_us <= 0:
            raise ValueError("pulse amplitude and phase durations must be positive")

    def charge_nc(self) -> tuple[float, float]:
        """(positive, negative) phase charge in nanocoulombs."""
        return (
            self.amplitude_ua * self.phase_pos_us * 1e-3,
            self.amplitude_ua * self.phase_neg_us * 1e-3,
        )

    def net_charge_nc(self) -> float:
        pos, neg = self.charge_nc()
        return pos - neg

    def waveform(self, sample_rate_hz: float) -> np.ndarray:
        """Per-sample current (uA): positive phase then negative phase."""
        n_pos = max(1, int(round(self.phase_pos_us * 1e-6 * sample_rate_hz)))
        n_neg = max(1, int(round(self.phase_neg_us * 1e-6 * sample_rate_hz)))
        return np.concatenate([
            np.full(n_pos, self.amplitude_ua), np.full(n_neg, -self.amplitude_ua)
        ])


@dataclass(frozen=True)
class GlyphLayout:
    """Placement of the seven-segment glyph on the grid.

    Every segment is a straight run of ``pairs_per_segment`` electrode pairs.
    The two electrodes of a pair sit side by side across the segment, so each
    segment is two electrodes thick. Horizontal segments are
    ``pairs_per_segment`` wide, vertical ones as tall, which makes the glyph
    ``(2 * k + 6) x (k + 4)`` electrodes (12 x 7 for ``k = 3``).
    """

    origin: tuple[int, int] = (20, 28)
    pairs_per_segment: int = 3

    @property
    def shape(self) -> tuple[int, int]:
        k = self.pairs_per_segment
        return 2 * k + 6, k + 4

    def segment_cells(self, seg: str) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Pairs of glyph-local (row, col) cells for segment ``seg``."""
        k = self.pairs_per_segment
        top, mid, bot = 0, k + 2, 2 * k + 4
        left, right = 0, k + 2
        hcols = range(2, 2 + k)
        upper = range(2, 2 + k)
        lower = range(k + 4, 2 * k + 4)
        if seg == "A":
            return [((top, c), (top + 1, c)) for c in hcols]
        if seg == "G":
            return [((mid, c), (mid + 1, c)) for c in hcols]
        if seg == "D":
            return [((bot, c), (bot + 1, c)) for c in hcols]
        if seg == "F":
            return [((r, left), (r, left + 1)) for r in upper]
        if seg == "B":
            return [((r, right), (r, right + 1)) for r in upper]
        if seg == "E":
            return [((r, left), (r, left + 1)) for r in lower]
        if seg == "C":
            return [((r, right), (r, right + 1)) for r in lower]
        raise ValueError(f"unknown segment {seg!r}")


@dataclass(frozen=True)
class StimulusPattern:
    label: int
    pairs: tuple[tuple[int, int], ...]  # (positive channel, negative channel)
    pulse: PulseParams = field(default_factory=PulseParams)

    def __post_init__(self):
        el = self.electrodes()
        if len(set(el)) != len(el):
            raise ValueError("an electrode appears twice in the pattern")

    def electrodes(self) -> list[int]:
        return [e for pair in self.pairs for e in pair]

    def intensity_map(self, n_channels: int = GRID_SIDE * GRID_SIDE) -> np.ndarray:
        """Stimulation amplitude (uA) at stimulated channels, 0 elsewhere."""
        u = np.zeros(n_channels)
        u[self.electrodes()] = self.pulse.amplitude_ua
        return u


def digit_to_segments(label: int) -> frozenset[str]:
    if label not in SEVEN_SEGMENT:
        raise ValueError(f"digit must be in 0..9, got {label!r}")
    return frozenset(SEVEN_SEGMENT[label])


def segments_to_pairs(segments, layout: GlyphLayout | None = None) -> tuple[tuple[int, int], ...]:
    """Electrode pairs lighting ``segments``, polarity alternating along each segment."""
    layout = layout or GlyphLayout()
    r0, c0 = layout.origin
    h, w = layout.shape
    if layout.pairs_per_segment < 1:
        raise ValueError("pairs_per_segment must be >= 1")
    if r0 < 0 or c0 < 0 or r0 + h > GRID_SIDE or c0 + w > GRID_SIDE:
        raise ValueError(f"glyph of shape {h}x{w} at {layout.origin} overflows the grid")
    pairs = []
    for seg in SEGMENTS:
        if seg not in segments:
            continue
        for n, (p, q) in enumerate(layout.segment_cells(seg)):
            if n % 2:
                p, q = q, p
            pairs.append((grid_to_channel(r0 + p[0], c0 + p[1]), grid_to_channel(r0 + q[0], c0 + q[1])))
    return tuple(pairs)


def digit_patterns(layout: GlyphLayout | None = None, pulse: PulseParams | None = None) -> list[StimulusPattern]:
    pulse = pulse or PulseParams()
    return [StimulusPattern(d, segments_to_pairs(digit_to_segments(d), layout), pulse) for d in range(10)]


@dataclass(frozen=True)
class Trial:
    index: int
    pattern: StimulusPattern
    onset_s: float

    @property
    def label(self) -> int:
        return self.pattern.label


@dataclass(frozen=True)
class StimulationSchedule:
    trials: tuple[Trial, ...]
    inter_stimulus_s: float
    repetitions: int
    seed: int

    def __len__(self) -> int:
        return len(self.trials)

    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials])


def build_schedule(patterns, repetitions: int = 20, inter_stimulus_s: float = 10.0, seed: int = 0) -> StimulationSchedule:
    """Randomized presentation order of ``repetitions`` copies of each pattern."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if inter_stimulus_s <= 0:
        raise ValueError("inter_stimulus_s must be positive")
    patterns = list(patterns)
    pool = [p for p in patterns for _ in range(repetitions)]
    order = np.random.default_rng(seed).permutation(len(pool))
    trials = tuple(Trial(m, pool[k], m * inter_stimulus_s) for m, k in enumerate(order))
    return StimulationSchedule(trials, inter_stimulus_s, repetitions, seed)


def write_schedule_csv(schedule: StimulationSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "label", "onset_s", "n_pairs", "pairs"])
        for t in schedule.trials:
            pairs = " ".join(f"{p}:{q}" for p, q in t.pattern.pairs)
            w.writerow([t.index, t.label, f"{t.onset_s:.6f}", len(t.pattern.pairs), pairs])
