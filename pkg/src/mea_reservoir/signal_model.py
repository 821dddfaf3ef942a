"""Sampled extracellular signals on the virtual 64x64 electrode grid.

Holds the in-memory recording type, a ground-truth trace synthesizer used to
exercise the spike detector, and the compact ``MEAR`` binary file format.

Conventions: voltages are in microvolts and spikes are negative-going.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

GRID_SIDE = 64
N_CHANNELS = GRID_SIDE * GRID_SIDE
DEFAULT_SAMPLE_RATE_HZ = 20_000

MEAR_MAGIC = b"MEAR"
MEAR_VERSION = 1
# magic, version, n_channels, sample_rate_hz, n_samples, t0 offset (us), scale
_MEAR_HEADER = struct.Struct("<4sHIIQqf")


def channel_to_grid(c):
    """Return the ``(row, col)`` grid coordinates of channel ``c``.

    Works on scalars and integer arrays alike.
    """
    c_arr = np.asarray(c)
    if np.any((c_arr < 0) | (c_arr >= N_CHANNELS)):
        raise ValueError(f"channel index out of range [0, {N_CHANNELS}): {c}")
    if c_arr.ndim == 0:
        c = int(c_arr)
        return c // GRID_SIDE, c % GRID_SIDE
    return c_arr // GRID_SIDE, c_arr % GRID_SIDE


def grid_to_channel(i, j):
    """Inverse of :func:`channel_to_grid`."""
    i_arr, j_arr = np.asarray(i), np.asarray(j)
    bad = (i_arr < 0) | (i_arr >= GRID_SIDE) | (j_arr < 0) | (j_arr >= GRID_SIDE)
    if np.any(bad):
        raise ValueError(f"grid coordinate out of range: ({i}, {j})")
    if i_arr.ndim == 0 and j_arr.ndim == 0:
        return int(i_arr) * GRID_SIDE + int(j_arr)
    return i_arr * GRID_SIDE + j_arr


@dataclass(frozen=True)
class SpikeTemplate:
    """Biphasic extracellular spike shape.

    A sharp negative trough followed by a smaller, slower positive rebound.
    ``amplitude_uv`` is the depth of the trough.
    """

    amplitude_uv: float = 100.0
    duration_s: float = 1.5e-3
    trough_s: float = 0.3e-3
    trough_width_s: float = 0.1e-3
    rebound_s: float = 0.8e-3
    rebound_width_s: float = 0.25e-3
    rebound_ratio: float = 0.35

    def waveform(self, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> np.ndarray:
        n = int(round(self.duration_s * sample_rate_hz))
        t = np.arange(n) / sample_rate_hz
        trough = np.exp(-0.5 * ((t - self.trough_s) / self.trough_width_s) ** 2)
        rebound = np.exp(-0.5 * ((t - self.rebound_s) / self.rebound_width_s) ** 2)
        w = -trough + self.rebound_ratio * rebound
        return self.amplitude_uv * w / np.abs(w).max()

    def peak_offset(self, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> int:
        """Sample offset of the trough from the template start."""
        return int(np.argmax(np.abs(self.waveform(sample_rate_hz))))


@dataclass(frozen=True, eq=False)
class RawRecording:
    """Multi-channel voltage trace, channel-major ``(n_channels, n_samples)``.

    ``t0_offset_s`` is the time of the first sample relative to stimulus
    onset. ``scale_uv`` is set when the samples came from (or are destined
    for) a quantized file and fixes the integer step.
    """

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    t0_offset_s: float = 0.0
    channel_ids: np.ndarray | None = None
    scale_uv: float | None = None

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float32)
        if x.ndim != 2:
            raise ValueError("samples must be 2-D (channels x samples)")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        x = np.array(x, copy=True)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if self.channel_ids is None:
            ids = np.arange(x.shape[0], dtype=np.int64)
        else:
            ids = np.array(self.channel_ids, dtype=np.int64)
            if ids.shape != (x.shape[0],):
                raise ValueError("channel_ids must have one entry per row")
        ids.setflags(write=False)
        object.__setattr__(self, "channel_ids", ids)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class GroundTruthAnnotation:
    """Injected spike sample indices per channel, echoing the synthesis input."""

    spike_samples: tuple[np.ndarray, ...]
    template: SpikeTemplate = field(default_factory=SpikeTemplate)

    def peak_samples(self, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ):
        off = self.template.peak_offset(sample_rate_hz)
        return tuple(s + off for s in self.spike_samples)


def synthesize_trace(
    spikes: Sequence[Sequence[int]],
    n_samples: int,
    noise_sd: float = 0.0,
    template: SpikeTemplate | None = None,
    seed: int = 0,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    t0_offset_s: float = 0.0,
    channel_ids: Sequence[int] | None = None,
) -> tuple[RawRecording, GroundTruthAnnotation]:
    """Render spikes as template copies plus white Gaussian noise.

    ``spikes[k]`` lists the template *start* samples for channel row ``k``.
    Templates running past the end of the trace are truncated.
    """
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    template = template or SpikeTemplate()
    wave = template.waveform(sample_rate_hz)
    if len(wave) >= n_samples:
        raise ValueError("waveform must be shorter than the trace")

    n_ch = len(spikes)
    x = np.zeros((n_ch, n_samples), dtype=np.float64)
    offsets = np.arange(len(wave))
    trains = []
    for k, s in enumerate(spikes):
        s = np.asarray(s, dtype=np.int64)
        if s.size and (np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] >= n_samples):
            raise ValueError(f"spike times on row {k} must be increasing and in range")
        if s.size > 1 and np.any(np.diff(s) < len(wave)):
            warnings.warn(f"overlapping templates on row {k}", stacklevel=2)
        trains.append(s)
        if not s.size:
            continue
        idx = (s[:, None] + offsets[None, :]).ravel()
        vals = np.broadcast_to(wave, (s.size, len(wave))).ravel()
        keep = idx < n_samples
        np.add.at(x[k], idx[keep], vals[keep])

    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        x += noise_sd * rng.standard_normal((n_ch, n_samples))

    rec = RawRecording(
        x.astype(np.float32),
        sample_rate_hz=sample_rate_hz,
        t0_offset_s=t0_offset_s,
        channel_ids=channel_ids,
    )
    return rec, GroundTruthAnnotation(tuple(trains), template)


def write_mear(rec: RawRecording, path: str | Path) -> None:
    """Write ``rec`` as a little-endian MEAR file with int16 samples."""
    scale = rec.scale_uv
    if scale is None:
        peak = float(np.abs(rec.samples).max()) if rec.samples.size else 0.0
        scale = peak / 32767.0 if peak > 0 else 1.0
    scale = np.float32(scale)
    q = np.rint(rec.samples.astype(np.float64) / np.float64(scale))
    q = np.clip(q, -32768, 32767).astype("<i2")
    header = _MEAR_HEADER.pack(
        MEAR_MAGIC,
        MEAR_VERSION,
        rec.n_channels,
        int(round(rec.sample_rate_hz)),
        rec.n_samples,
        int(round(rec.t0_offset_s * 1e6)),
        float(scale),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.tobytes(order="C"))


def read_mear(path: str | Path) -> RawRecording:
    """Read a MEAR file. Samples are ``int16 * scale`` as float32."""
    data = Path(path).read_bytes()
    if len(data) < _MEAR_HEADER.size:
        raise ValueError("truncated MEAR header")
    magic, version, n_ch, fs, n_samp, t0_us, scale = _MEAR_HEADER.unpack_from(data)
    if magic != MEAR_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != MEAR_VERSION:
        raise ValueError(f"unsupported MEAR version {version}")
    body = np.frombuffer(data, dtype="<i2", offset=_MEAR_HEADER.size)
    if body.size != n_ch * n_samp:
        raise ValueError("sample payload size does not match header")
    scale = np.float32(scale)
    x = body.reshape(n_ch, n_samp).astype(np.float32) * scale
    return RawRecording(x, sample_rate_hz=fs, t0_offset_s=t0_us / 1e6, scale_uv=float(scale))
