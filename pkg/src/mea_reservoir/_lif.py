"""Numba kernel for the event-driven leaky integrate-and-fire network.

Membrane potentials (rest 0, reset 0) only change when input arrives, so each
neuron is updated lazily: on input at step ``t`` its potential is decayed by
``exp(-(t - t_last) * dt / tau)`` before the input is added. This is the
exact solution of the clock-driven update with delta-shaped inputs at step
``dt``, without touching idle neurons.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_OVERFLOW = 1
STATUS_NONFINITE = 2


@njit(cache=True)
def _push(slot, k, val, buf, touched, n_touched, flag):
    if flag[slot, k] == 0:
        flag[slot, k] = 1
        touched[slot, n_touched[slot]] = k
        n_touched[slot] += 1
    buf[slot, k] += val


@njit(cache=True)
def run_lif(
    n_neurons, n_steps, dt_over_tau, threshold, refractory_steps,
    indptr, targets, weights, delays,
    bg_counts, bg_neurons, bg_weight,
    stim_neurons, stim_drive, stim_start,
    max_spikes,
):
    """Simulate ``n_steps`` steps from rest.

    ``stim_drive`` is ``(n_pulse_samples, len(stim_neurons))``: the input added
    to each stimulated neuron at steps ``stim_start + p``.

    Returns ``(status, n_spikes, spike_neurons, spike_steps, bad_neuron)``.
    """
    ring = 1
    for d in delays:
        if d + 1 > ring:
            ring = d + 1
    buf = np.zeros((ring, n_neurons))
    flag = np.zeros((ring, n_neurons), dtype=np.uint8)
    touched = np.empty((ring, n_neurons), dtype=np.int64)
    n_touched = np.zeros(ring, dtype=np.int64)

    v = np.zeros(n_neurons)
    last = np.zeros(n_neurons, dtype=np.int64)
    refr_until = np.zeros(n_neurons, dtype=np.int64)

    n_lut = 4096
    lut = np.empty(n_lut)
    for d in range(n_lut):
        lut[d] = math.exp(-d * dt_over_tau)

    out_n = np.empty(max_spikes, dtype=np.int64)
    out_t = np.empty(max_spikes, dtype=np.int64)
    n_out = 0
    bg_ptr = 0
    n_pulse = stim_drive.shape[0]

    for t in range(n_steps):
        slot = t % ring
        for _ in range(bg_counts[t]):
            _push(slot, bg_neurons[bg_ptr], bg_weight, buf, touched, n_touched, flag)
            bg_ptr += 1
        p = t - stim_start
        if 0 <= p < n_pulse:
            for m in range(stim_neurons.shape[0]):
                _push(slot, stim_neurons[m], stim_drive[p, m], buf, touched, n_touched, flag)

        for q in range(n_touched[slot]):
            k = touched[slot, q]
            inp = buf[slot, k]
            buf[slot, k] = 0.0
            flag[slot, k] = 0
            if t < refr_until[k]:
                continue
            gap = t - last[k]
            decay = lut[gap] if gap < n_lut else math.exp(-gap * dt_over_tau)
            vk = v[k] * decay + inp
            last[k] = t
            if not math.isfinite(vk):
                return STATUS_NONFINITE, n_out, out_n, out_t, k
            if vk >= threshold:
                if n_out >= max_spikes:
                    return STATUS_OVERFLOW, n_out, out_n, out_t, k
                out_n[n_out] = k
                out_t[n_out] = t
                n_out += 1
                vk = 0.0
                refr_until[k] = t + refractory_steps
                for s in range(indptr[k], indptr[k + 1]):
                    _push((t + delays[s]) % ring, targets[s], weights[s], buf, touched, n_touched, flag)
            v[k] = vk
        n_touched[slot] = 0

    return STATUS_OK, n_out, out_n, out_t, -1
