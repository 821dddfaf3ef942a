"""Artificial reservoir baseline driven by the same stimulus maps.

A sparse random recurrent network with one unit per electrode. Starting from
rest, the noisy stimulus map ``u + xi`` is pushed through the input gain and
``tanh``, the network then evolves one more step through the recurrent
weights, and that second state (masked like the biological readout) is the
feature vector. ``xi`` is per-channel Poisson noise whose means come from
spike counts in randomly placed windows of spontaneous activity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigs

from .readout import FeatureVector, ReadoutParams, stimulation_mask
from .signal_model import N_CHANNELS
from .spike_detection import SpikeTrain
from .stimulus import StimulusPattern


@dataclass(frozen=True, eq=False)
class ARModel:
    weights: sp.csr_matrix
    input_gain: float = 1.0
    spectral_radius: float = 0.9
    seed: int = 0

    @property
    def n_units(self) -> int:
        return self.weights.shape[0]

    @property
    def density(self) -> float:
        return self.weights.nnz / float(self.n_units ** 2)


def spectral_radius(m, seed: int = 0, k: int = 6) -> float:
    """Largest eigenvalue modulus of a sparse matrix (ARPACK, several eigenvalues)."""
    n = m.shape[0]
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals = eigs(m, k=min(k, n - 2), which="LM", return_eigenvectors=False,
                v0=v0, ncv=min(n, max(4 * k, 40)), tol=1e-8)
    return float(np.abs(vals).max())


def build_ar(
    n_units: int = N_CHANNELS,
    density: float = 0.10,
    target_radius: float = 0.9,
    input_gain: float = 1.0,
    seed: int = 0,
) -> ARModel:
    """Sparse recurrent weights, uniform in [-1, 1], rescaled to ``target_radius``."""
    rng = np.random.default_rng(seed)
    w = sp.random(n_units, n_units, density=density, format="csr", random_state=rng,
                  data_rvs=lambda size: rng.uniform(-1.0, 1.0, size))
    w = w * (target_radius / spectral_radius(w, seed))
    return ARModel(w.tocsr(), input_gain, target_radius, seed)


@dataclass(frozen=True)
class NoiseCalibration:
    means: np.ndarray  # per-channel mean spike count in one window
    window_s: float
    n_windows: int


def calibrate_noise(spont: SpikeTrain, window_s: float, n_windows: int = 100, seed: int = 0) -> NoiseCalibration:
    """Mean per-channel count over ``n_windows`` random, non-overlapping windows.

    The recording is cut into consecutive slots of one window each (closed
    interval, so ``W * fs + 1`` samples) and ``n_windows`` slots are picked
    uniformly without replacement.
    """
    if spont.n_samples is None:
        raise ValueError("spontaneous train must record its length")
    width = int(round(window_s * spont.sample_rate_hz)) + 1
    n_slots = spont.n_samples // width
    if n_slots < n_windows:
        raise ValueError(
            f"recording holds {n_slots} windows of {window_s * 1e3:g} ms, need {n_windows}")
    rng = np.random.default_rng(seed)
    chosen = np.zeros(n_slots, dtype=bool)
    chosen[rng.choice(n_slots, size=n_windows, replace=False)] = True
    slot = spont.samples // width
    keep = (slot < n_slots) & chosen[np.minimum(slot, n_slots - 1)]
    counts = np.bincount(spont.channels[keep], minlength=spont.n_channels)
    return NoiseCalibration(counts / n_windows, window_s, n_windows)


def ar_states(model: ARModel, inputs: np.ndarray) -> np.ndarray:
    """Second-step states for a batch of input maps (one per column)."""
    x1 = np.tanh(model.input_gain * inputs)
    x2 = np.tanh(model.weights @ x1)
    if not np.isfinite(x2).all():
        raise FloatingPointError("non-finite reservoir state")
    return x2


def noisy_inputs(pattern: StimulusPattern, noise: NoiseCalibration | None, seed: int,
                 noise_scale: float = 1.0, n_units: int = N_CHANNELS) -> np.ndarray:
    u = pattern.intensity_map(n_units)
    if noise is not None and noise_scale > 0:
        u = u + np.random.default_rng(seed).poisson(noise.means[:n_units] * noise_scale)
    return u


def ar_forward(
    model: ARModel,
    pattern: StimulusPattern,
    noise: NoiseCalibration | None,
    seed: int = 0,
    readout: ReadoutParams | None = None,
    noise_scale: float = 1.0,
    session: str = "ar",
    trial: int = 0,
) -> FeatureVector:
    readout = readout or ReadoutParams()
    u = noisy_inputs(pattern, noise, seed, noise_scale, model.n_units)
    x2 = ar_states(model, u[:, None])[:, 0]
    mask = stimulation_mask(pattern, readout.mask_half_width)
    x2[mask] = 0.0
    return FeatureVector(x2, pattern.label, mask, session, trial, 0.0, readout.window_s)


def ar_dataset(model, patterns, noise, seeds, readout=None, noise_scale=1.0, session="ar"):
    """:func:`ar_forward` over many trials, batching the recurrent step."""
    readout = readout or ReadoutParams()
    U = np.stack([noisy_inputs(p, noise, s, noise_scale, model.n_units)
                  for p, s in zip(patterns, seeds)], axis=1)
    X2 = ar_states(model, U)
    out = []
    for k, p in enumerate(patterns):
        mask = stimulation_mask(p, readout.mask_half_width)
        x = X2[:, k].copy()
        x[mask] = 0.0
        out.append(FeatureVector(x, p.label, mask, session, k, 0.0, readout.window_s))
    return out
