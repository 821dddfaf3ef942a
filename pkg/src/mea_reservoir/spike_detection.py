"""Double-threshold spike detection.

Per channel the detector

1. takes the standard deviation ``sigma`` of the whole channel,
2. marks candidate peaks: samples whose magnitude exceeds ``thr_low * sigma``
   and is the (first) maximum of ``|x|`` inside the centred ``window_s``
   window around them,
3. drops every ``window_s`` window around a low-threshold crossing and
   recomputes the noise level ``sigma_n`` on what is left,
4. keeps candidates (thinned by the refractory period) whose magnitude
   exceeds ``thr_high * sigma_n``.

Both thresholds are relative to the channel's own statistics, so detection is
invariant to a global gain. Thinning is applied before the high threshold so
that raising ``thr_high`` can only remove spikes.

:func:`detect_spikes` is the vectorized path; :func:`detect_spikes_reference`
is a deliberately plain loop implementation used as its oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .signal_model import DEFAULT_SAMPLE_RATE_HZ, N_CHANNELS, RawRecording, channel_to_grid


@dataclass(frozen=True)
class DetectorParams:
    window_s: float = 0.002
    thr_low: float = 3.0
    thr_high: float = 5.0
    refractory_s: float = 0.001

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if not (self.thr_high >= self.thr_low > 0):
            raise ValueError("need thr_high >= thr_low > 0")
        if self.refractory_s < 0:
            raise ValueError("refractory_s must be >= 0")

    def half_window(self, fs: float) -> int:
        return max(1, int(round(self.window_s * fs))) // 2

    def refractory_samples(self, fs: float) -> int:
        return int(round(self.refractory_s * fs))


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Spike sample indices for one recording, stored flat.

    ``channels`` and ``samples`` are parallel int64 arrays sorted by
    ``(channel, sample)``. Sample indices are relative to the first sample
    of the recording, whose time relative to stimulus onset is
    ``t0_offset_s``.
    """

    channels: np.ndarray
    samples: np.ndarray
    n_channels: int = N_CHANNELS
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    t0_offset_s: float = 0.0
    n_samples: int | None = None

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.int64).ravel()
        s = np.asarray(self.samples, dtype=np.int64).ravel()
        if ch.shape != s.shape:
            raise ValueError("channels and samples must have equal length")
        order = np.lexsort((s, ch))
        ch, s = ch[order], s[order]
        if ch.size:
            if ch[0] < 0 or ch[-1] >= self.n_channels:
                raise ValueError("channel index out of range")
            same = ch[1:] == ch[:-1]
            if np.any(same & (s[1:] <= s[:-1])):
                raise ValueError("duplicate spike on a channel")
        for arr in (ch, s):
            arr.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_lists(cls, per_channel: Sequence[Iterable[int]], **kw) -> "SpikeTrain":
        ch, s = [], []
        for c, times in enumerate(per_channel):
            times = np.asarray(list(times), dtype=np.int64)
            ch.append(np.full(times.size, c, dtype=np.int64))
            s.append(times)
        kw.setdefault("n_channels", len(per_channel))
        if not ch:
            return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), **kw)
        return cls(np.concatenate(ch), np.concatenate(s), **kw)

    @classmethod
    def empty(cls, **kw) -> "SpikeTrain":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), **kw)

    def __len__(self) -> int:
        return int(self.samples.size)

    def channel(self, c: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.channels, [c, c + 1])
        return self.samples[lo:hi]

    def per_channel(self) -> list[np.ndarray]:
        bounds = np.searchsorted(self.channels, np.arange(self.n_channels + 1))
        return [self.samples[bounds[c]:bounds[c + 1]] for c in range(self.n_channels)]

    def times_s(self) -> np.ndarray:
        return self.t0_offset_s + self.samples / self.sample_rate_hz

    def time_to_sample(self, t: float) -> int:
        """Nearest sample index for time ``t`` (seconds, onset-relative)."""
        return int(round((t - self.t0_offset_s) * self.sample_rate_hz))

    def restrict(self, start: int, stop: int) -> "SpikeTrain":
        """Spikes with ``start <= sample < stop``, re-referenced to ``start``."""
        keep = (self.samples >= start) & (self.samples < stop)
        return SpikeTrain(
            self.channels[keep],
            self.samples[keep] - start,
            n_channels=self.n_channels,
            sample_rate_hz=self.sample_rate_hz,
            t0_offset_s=self.t0_offset_s + start / self.sample_rate_hz,
            n_samples=stop - start,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return (
            self.n_channels == other.n_channels
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.samples, other.samples)
        )


def _train_for(rec: RawRecording, per_row: list[np.ndarray]) -> SpikeTrain:
    ch = [np.full(s.size, rec.channel_ids[k], dtype=np.int64) for k, s in enumerate(per_row)]
    n_channels = max(N_CHANNELS, int(rec.channel_ids.max()) + 1) if rec.n_channels else N_CHANNELS
    return SpikeTrain(
        np.concatenate(ch) if ch else np.zeros(0, np.int64),
        np.concatenate(per_row) if per_row else np.zeros(0, np.int64),
        n_channels=n_channels,
        sample_rate_hz=rec.sample_rate_hz,
        t0_offset_s=rec.t0_offset_s,
        n_samples=rec.n_samples,
    )


def _thin(cands: np.ndarray, min_gap: int) -> np.ndarray:
    out = []
    last = None
    for n in cands:
        if last is None or n - last >= min_gap:
            out.append(n)
            last = n
    return np.asarray(out, dtype=np.int64)


def detect_spikes(rec: RawRecording, params: DetectorParams | None = None) -> SpikeTrain:
    """Detect spikes on every channel of ``rec``; returns extremum sample indices."""
    params = params or DetectorParams()
    if rec.n_samples == 0:
        raise ValueError("empty recording")
    fs = rec.sample_rate_hz
    h = params.half_window(fs)
    refr = params.refractory_samples(fs)

    x = rec.samples.astype(np.float64)
    a = np.abs(x)
    sigma = x.std(axis=1)
    supra = a > params.thr_low * sigma[:, None]
    supra[sigma == 0] = False

    wmax = maximum_filter1d(a, size=2 * h + 1, axis=1, mode="nearest")
    # max over the h samples strictly before n; -inf where there are none
    padded = np.pad(a, ((0, 0), (h, 0)), constant_values=-np.inf)
    prev = maximum_filter1d(padded, size=h, axis=1, mode="constant", cval=-np.inf)
    prev = prev[:, h // 2: h // 2 + rec.n_samples]
    cand = supra & (a >= wmax) & (a > prev)

    excl = maximum_filter1d(supra.view(np.uint8), size=2 * h + 1, axis=1, mode="constant") > 0

    per_row = []
    for k in range(rec.n_channels):
        idx = np.flatnonzero(cand[k])
        if idx.size == 0:
            per_row.append(idx.astype(np.int64))
            continue
        rest = x[k][~excl[k]]
        sigma_n = rest.std() if rest.size else sigma[k]
        if refr > h + 1:
            idx = _thin(idx, refr)
        per_row.append(idx[a[k, idx] > params.thr_high * sigma_n].astype(np.int64))
    return _train_for(rec, per_row)


def detect_spikes_reference(rec: RawRecording, params: DetectorParams | None = None) -> SpikeTrain:
    """Straight loop implementation of :func:`detect_spikes` (test oracle)."""
    params = params or DetectorParams()
    if rec.n_samples == 0:
        raise ValueError("empty recording")
    fs = rec.sample_rate_hz
    h = params.half_window(fs)
    refr = params.refractory_samples(fs)
    n_samp = rec.n_samples

    per_row = []
    for k in range(rec.n_channels):
        x = rec.samples[k].astype(np.float64)
        a = np.abs(x)
        sigma = np.std(x)
        if sigma == 0:
            per_row.append(np.zeros(0, np.int64))
            continue
        low = params.thr_low * sigma
        crossings = [n for n in np.flatnonzero(a > low)]

        excluded = np.zeros(n_samp, dtype=bool)
        for n in crossings:
            excluded[max(0, n - h): n + h + 1] = True
        rest = x[~excluded]
        sigma_n = np.std(rest) if rest.size else sigma

        candidates = []
        for n in crossings:
            lo = max(0, n - h)
            hi = min(n_samp, n + h + 1)
            if a[n] < a[lo:hi].max():
                continue
            if n > lo and a[lo:n].max() >= a[n]:
                continue
            candidates.append(n)

        kept, last = [], None
        for n in candidates:
            if last is None or n - last >= refr:
                kept.append(n)
                last = n
        per_row.append(np.array([n for n in kept if a[n] > params.thr_high * sigma_n], dtype=np.int64))
    return _train_for(rec, per_row)


SPIKE_CSV_HEADER = ["channel", "i", "j", "sample_index", "time_s"]


def write_spike_csv(train: SpikeTrain, path: str | Path, extra: dict | None = None) -> None:
    """One row per spike sorted by (channel, sample_index)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPIKE_CSV_HEADER)
        i, j = channel_to_grid(train.channels) if len(train) else ([], [])
        times = train.times_s()
        for c, ii, jj, s, t in zip(train.channels, i, j, train.samples, times):
            w.writerow([int(c), int(ii), int(jj), int(s), f"{t:.6f}"])


def read_spike_csv(
    path: str | Path,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    t0_offset_s: float | None = None,
    n_channels: int = N_CHANNELS,
) -> SpikeTrain:
    ch, s, t0 = [], [], t0_offset_s
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ch.append(int(row["channel"]))
            s.append(int(row["sample_index"]))
            if t0 is None:
                t0 = float(row["time_s"]) - s[-1] / sample_rate_hz
    return SpikeTrain(
        np.asarray(ch, np.int64), np.asarray(s, np.int64),
        n_channels=n_channels, sample_rate_hz=sample_rate_hz,
        t0_offset_s=round(t0, 6) if t0 is not None else 0.0,
    )
