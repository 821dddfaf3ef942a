"""Simulated neuronal culture on the 64x64 electrode grid.

One leaky integrate-and-fire neuron sits under each electrode. Neurons are
80 % excitatory / 20 % inhibitory and connect with a probability that falls
off as a Gaussian of grid distance. Spontaneous activity comes from Poisson
background kicks. A stimulation pulse injects current into neurons within one
electrode pitch of each stimulated site, with the sign of the site's polarity.

The default fast path returns spike trains directly; with ``emit_trace`` the
spikes are also rendered into a noisy extracellular recording.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _lif
from .signal_model import (
    DEFAULT_SAMPLE_RATE_HZ,
    GRID_SIDE,
    N_CHANNELS,
    RawRecording,
    SpikeTemplate,
    synthesize_trace,
)
from .spike_detection import DetectorParams, SpikeTrain, detect_spikes
from .stimulus import StimulusPattern

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CultureParams:
    """Network and membrane parameters. Potentials are in threshold units."""

    grid_side: int = GRID_SIDE
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    tau_ms: float = 4.0
    threshold: float = 1.0
    refractory_ms: float = 2.0
    connect_prob: float = 0.3
    connect_sigma: float = 4.0
    excitatory_fraction: float = 0.8
    w_exc: float = 0.24
    w_inh: float = 1.92
    w_max_factor: float = 1.5
    delay_base_ms: float = 1.0
    delay_per_pitch_ms: float = 0.2
    inh_extra_delay_ms: float = 1.5
    background_rate_hz: float = 40.0
    background_weight: float = 0.5
    coupling_gain: float = 3.0
    neighbor_coupling: float = 0.5

    def __post_init__(self):
        if not 0 < self.connect_prob <= 1:
            raise ValueError("connect_prob must be in (0, 1]")
        if self.tau_ms <= 0:
            raise ValueError("tau_ms must be positive")
        if self.background_rate_hz < 0 or self.refractory_ms < 0:
            raise ValueError("rates and refractory period must be >= 0")

    @property
    def n_neurons(self) -> int:
        return self.grid_side * self.grid_side


@dataclass(frozen=True)
class DriftParams:
    rewire_fraction: float = 0.4
    weight_jitter_sd: float = 0.2
    homeostatic: bool = True

    def __post_init__(self):
        if not 0 <= self.rewire_fraction <= 1:
            raise ValueError("rewire_fraction must be in [0, 1]")
        if self.weight_jitter_sd < 0:
            raise ValueError("weight_jitter_sd must be >= 0")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CultureModel:
    """Immutable network: CSR synapses keyed by presynaptic neuron."""

    params: CultureParams
    excitatory: np.ndarray
    indptr: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    delays: np.ndarray
    seed: int = 0
    day: int = 1

    def __post_init__(self):
        for name in ("excitatory", "indptr", "targets", "weights", "delays"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_neurons(self) -> int:
        return self.params.n_neurons

    @property
    def n_synapses(self) -> int:
        return int(self.targets.size)

    def presynaptic(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_neurons), np.diff(self.indptr))

    def weight_matrix(self):
        """Sparse ``(post, pre)`` efficacy matrix (duplicates summed)."""
        from scipy.sparse import csr_matrix

        n = self.n_neurons
        return csr_matrix((self.weights, (self.targets, self.presynaptic())), shape=(n, n))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.params).encode())
        for a in (self.excitatory, self.indptr, self.targets, self.weights, self.delays):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def _kernel_offsets(p: CultureParams):
    r = int(np.ceil(3 * p.connect_sigma))
    di, dj = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    di, dj = di.ravel(), dj.ravel()
    keep = (di != 0) | (dj != 0)
    di, dj = di[keep], dj[keep]
    dist = np.hypot(di, dj)
    prob = p.connect_prob * np.exp(-0.5 * (dist / p.connect_sigma) ** 2)
    return di, dj, dist, prob


def _delay_steps(p: CultureParams, dist: np.ndarray, inhibitory: np.ndarray) -> np.ndarray:
    ms = p.delay_base_ms + p.delay_per_pitch_ms * dist + p.inh_extra_delay_ms * inhibitory
    return np.maximum(1, np.rint(ms * 1e-3 * p.sample_rate_hz)).astype(np.int64)


def build_culture(params: CultureParams | None = None, seed: int = 0) -> CultureModel:
    """Draw a random network with distance-dependent connectivity."""
    p = params or CultureParams()
    rng = np.random.default_rng(seed)
    n, side = p.n_neurons, p.grid_side
    excitatory = rng.random(n) < p.excitatory_fraction

    di, dj, dist, prob = _kernel_offsets(p)
    pre = np.arange(n)
    pi, pj = pre // side, pre % side
    ti = pi[:, None] + di[None, :]
    tj = pj[:, None] + dj[None, :]
    inside = (ti >= 0) & (ti < side) & (tj >= 0) & (tj < side)
    conn = inside & (rng.random((n, di.size)) < prob[None, :])

    src, off = np.nonzero(conn)  # row-major: sorted by presynaptic neuron
    targets = ti[src, off] * side + tj[src, off]
    scale = rng.uniform(0.5, 1.5, size=src.size)
    weights = np.where(excitatory[src], p.w_exc * scale, -p.w_inh * scale)
    delays = _delay_steps(p, dist[off], ~excitatory[src])
    indptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))])
    return CultureModel(p, excitatory, indptr, targets.astype(np.int64), weights, delays, seed=seed)


def _rescale_inputs(old_targets, old_weights, targets, weights, n):
    """Scale each neuron's incoming excitatory and inhibitory sums to their old values.

    Neurons that had no input of a sign before drift are left unscaled.
    """
    out = weights.copy()
    for sign in (1.0, -1.0):
        old_sel = np.sign(old_weights) == sign
        sel = np.sign(weights) == sign
        before = np.bincount(old_targets[old_sel], weights=old_weights[old_sel], minlength=n)
        after = np.bincount(targets[sel], weights=weights[sel], minlength=n)
        # neurons with no such input before (or after) drift are left alone
        factor = np.divide(before, after, out=np.ones(n), where=(after != 0) & (before != 0))
        out[sel] = weights[sel] * factor[targets[sel]]
    return out


def advance_day(model: CultureModel, drift: DriftParams, seed: int = 0) -> CultureModel:
    """One day of drift: re-target a fraction of synapses and jitter weights.

    Re-targeted synapses keep their presynaptic neuron and draw a new target
    from the same distance kernel. Jitter is multiplicative and log-normal,
    so synapse signs are preserved; magnitudes are capped at
    ``w_max_factor`` times the base weight. With ``homeostatic`` set, each
    neuron's summed excitatory and summed inhibitory input are then scaled
    back to their pre-drift values, which keeps firing rates stable across
    days while the detailed wiring keeps changing.
    """
    p = model.params
    if drift.rewire_fraction == 0 and drift.weight_jitter_sd == 0:
        return replace(model, day=model.day + 1)
    rng = np.random.default_rng(seed)
    targets = model.targets.copy()
    weights = model.weights.copy()
    delays = model.delays.copy()

    n_syn = targets.size
    n_rewire = int(round(drift.rewire_fraction * n_syn))
    if n_rewire:
        idx = np.sort(rng.choice(n_syn, size=n_rewire, replace=False))
        pre = model.presynaptic()[idx]
        di, dj, dist, prob = _kernel_offsets(p)
        cdf = np.cumsum(prob) / prob.sum()
        pending = np.arange(n_rewire)
        new_off = np.empty(n_rewire, dtype=np.int64)
        while pending.size:
            off = np.minimum(np.searchsorted(cdf, rng.random(pending.size), side="right"), cdf.size - 1)
            ti = pre[pending] // p.grid_side + di[off]
            tj = pre[pending] % p.grid_side + dj[off]
            ok = (ti >= 0) & (ti < p.grid_side) & (tj >= 0) & (tj < p.grid_side)
            new_off[pending[ok]] = off[ok]
            pending = pending[~ok]
        targets[idx] = (pre // p.grid_side + di[new_off]) * p.grid_side + pre % p.grid_side + dj[new_off]
        delays[idx] = _delay_steps(p, dist[new_off], ~model.excitatory[pre])

    if drift.weight_jitter_sd > 0:
        s = drift.weight_jitter_sd
        weights = weights * np.exp(s * rng.standard_normal(n_syn) - 0.5 * s * s)
        cap = np.where(weights > 0, p.w_exc, p.w_inh) * p.w_max_factor
        weights = np.clip(weights, -cap, cap)

    if drift.homeostatic:
        weights = _rescale_inputs(model.targets, model.weights, targets, weights, model.n_neurons)

    return replace(model, targets=targets, weights=weights, delays=delays, day=model.day + 1)


def stimulation_drive(model: CultureModel, pattern: StimulusPattern) -> tuple[np.ndarray, np.ndarray]:
    """Neurons driven by ``pattern`` and their per-sample input during the pulse.

    The neuron under a stimulated electrode gets that electrode's polarity at
    full strength. Other neurons within one pitch sum ``neighbor_coupling``
    times the polarity of each adjacent stimulated electrode.

    Returns ``(neurons, drive)`` with ``drive`` shaped ``(n_pulse_samples,
    len(neurons))``.
    """
    p = model.params
    side = p.grid_side
    coupling = np.zeros(model.n_neurons)
    site_sign = {}
    for pos, neg in pattern.pairs:
        site_sign[pos], site_sign[neg] = 1.0, -1.0
    for site, sign in site_sign.items():
        si, sj = divmod(site, side)
        if not (0 <= si < side and 0 <= sj < side):
            raise ValueError(f"stimulation electrode {site} outside the grid")
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                i, j = si + a, sj + b
                if (a or b) and 0 <= i < side and 0 <= j < side:
                    coupling[i * side + j] += sign * p.neighbor_coupling
    # a neuron under a stimulated electrode follows that electrode alone
    for site, sign in site_sign.items():
        coupling[site] = sign
    neurons = np.flatnonzero(coupling)
    dt_ms = 1e3 / p.sample_rate_hz
    current = pattern.pulse.waveform(p.sample_rate_hz)
    drive = p.coupling_gain * dt_ms * current[:, None] * coupling[neurons][None, :]
    return neurons.astype(np.int64), np.ascontiguousarray(drive)


def _background(model: CultureModel, n_steps: int, rng: np.random.Generator):
    p = model.params
    lam = model.n_neurons * p.background_rate_hz / p.sample_rate_hz
    counts = rng.poisson(lam, size=n_steps).astype(np.int64)
    neurons = rng.integers(0, model.n_neurons, size=int(counts.sum()), dtype=np.int64)
    return counts, neurons


def _run(model, n_steps, seed, stim_neurons, stim_drive, stim_start) -> SpikeTrain:
    p = model.params
    rng = np.random.default_rng(seed)
    bg_counts, bg_neurons = _background(model, n_steps, rng)
    refr = int(round(p.refractory_ms * 1e-3 * p.sample_rate_hz))
    dt_over_tau = 1e3 / p.sample_rate_hz / p.tau_ms
    cap = max(1024, int(model.n_neurons * n_steps / p.sample_rate_hz * 10))
    while True:
        status, n_out, out_n, out_t, bad = _lif.run_lif(
            model.n_neurons, n_steps, dt_over_tau, p.threshold, refr,
            model.indptr, model.targets, model.weights, model.delays,
            bg_counts, bg_neurons, p.background_weight,
            stim_neurons, stim_drive, stim_start, cap,
        )
        if status == _lif.STATUS_OVERFLOW:
            cap *= 4
            continue
        if status == _lif.STATUS_NONFINITE:
            raise SimulationError(f"non-finite membrane potential on neuron {bad} (seed {seed})")
        break
    return SpikeTrain(out_n[:n_out], out_t[:n_out], n_channels=model.n_neurons,
                      sample_rate_hz=p.sample_rate_hz, n_samples=n_steps)


_NO_STIM = (np.zeros(0, np.int64), np.zeros((0, 0)))


@dataclass(frozen=True)
class TraceOptions:
    """Settings for rendering spikes to raw traces and detecting them again."""

    noise_sd_uv: float = 12.5
    template: SpikeTemplate = field(default_factory=SpikeTemplate)
    detector: DetectorParams = field(default_factory=DetectorParams)
    channels: tuple[int, ...] | None = None
    block: int = 64


def render_trace(train: SpikeTrain, options: TraceOptions, seed: int, channels=None) -> RawRecording:
    """Extracellular recording of ``train`` with troughs on the spike samples."""
    channels = np.arange(train.n_channels) if channels is None else np.asarray(channels)
    fs = train.sample_rate_hz
    off = options.template.peak_offset(fs)
    n = train.n_samples
    starts = []
    for c in channels:
        s = train.channel(int(c)) - off
        starts.append(s[(s >= 0) & (s < n)])
    rec, _ = synthesize_trace(starts, n, options.noise_sd_uv, options.template,
                              seed=seed, sample_rate_hz=fs, t0_offset_s=train.t0_offset_s,
                              channel_ids=channels)
    return rec


def trace_roundtrip(train: SpikeTrain, options: TraceOptions, seed: int, keep: bool = False):
    """Spikes recovered by rendering ``train`` to traces and running the detector.

    Channels are processed in blocks so the full 4096-channel recording is
    never held in memory at once. Channels outside ``options.channels`` are
    dropped. With ``keep`` the rendered recording is returned as well.
    """
    channels = np.arange(train.n_channels) if options.channels is None else np.asarray(options.channels)
    ch_parts, s_parts, recs = [], [], []
    for b, lo in enumerate(range(0, channels.size, options.block)):
        block = channels[lo:lo + options.block]
        rec = render_trace(train, options, seed=seed * 100003 + b, channels=block)
        found = detect_spikes(rec, options.detector)
        ch_parts.append(found.channels)
        s_parts.append(found.samples)
        if keep:
            recs.append(rec)
    detected = SpikeTrain(
        np.concatenate(ch_parts) if ch_parts else np.zeros(0, np.int64),
        np.concatenate(s_parts) if s_parts else np.zeros(0, np.int64),
        n_channels=train.n_channels, sample_rate_hz=train.sample_rate_hz,
        t0_offset_s=train.t0_offset_s, n_samples=train.n_samples,
    )
    if not keep:
        return detected
    rec = RawRecording(
        np.concatenate([r.samples for r in recs]), sample_rate_hz=train.sample_rate_hz,
        t0_offset_s=train.t0_offset_s, channel_ids=channels,
    )
    return detected, rec


def simulate_trial(
    model: CultureModel,
    pattern: StimulusPattern | None,
    pre_s: float = 2.0,
    post_s: float = 2.0,
    seed: int = 0,
    emit_trace: bool = False,
    trace: TraceOptions | None = None,
):
    """Simulate one stimulation trial from ``-pre_s`` to ``+post_s`` around onset.

    Returns the spike train (sample 0 is ``-pre_s``). With ``emit_trace``
    returns ``(detected_train, recording)``: the spikes are rendered to raw
    traces and re-detected. The recording is only materialized when
    ``trace.channels`` restricts the channel set (the full grid at 20 kHz
    would need over a gigabyte); otherwise it is ``None``.
    """
    p = model.params
    fs = p.sample_rate_hz
    onset = int(round(pre_s * fs))
    n_steps = onset + int(round(post_s * fs))
    if pattern is None:
        neurons, drive = _NO_STIM
    else:
        neurons, drive = stimulation_drive(model, pattern)
    train = _run(model, n_steps, seed, neurons, drive, onset)
    train = replace(train, t0_offset_s=-onset / fs)
    if not emit_trace:
        return train
    trace = trace or TraceOptions()
    if trace.channels is None:
        return trace_roundtrip(train, trace, seed), None
    return trace_roundtrip(train, trace, seed, keep=True)


def record_spontaneous(model: CultureModel, duration_s: float, seed: int = 0) -> SpikeTrain:
    """Stimulus-free activity for ``duration_s`` seconds."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n_steps = int(round(duration_s * model.params.sample_rate_hz))
    return _run(model, n_steps, seed, *_NO_STIM, -1)


def firing_rates(train: SpikeTrain) -> np.ndarray:
    """Per-channel mean rate (Hz) over the train's span."""
    dur = train.n_samples / train.sample_rate_hz
    return np.bincount(train.channels, minlength=train.n_channels) / dur
