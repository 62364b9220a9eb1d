"""The 2010 paralinguistic-challenge acoustic set: 1596 dimensions.

38 low-level descriptors on a 25/10 ms grid (pitch family from 60 ms
windows), 3-frame moving-average smoothing, first-order deltas, and 21
statistical functionals: (38 + 38) x 21 = 1596.

Loudness is approximated by log frame energy and voicing probability by the
normalized-correlation peak; see the package docs for the deviations from
the original challenge toolkit.
"""

from __future__ import annotations

import numpy as np

from ..audio import Waveform, frame_signal
from ..dsp import (delta, estimate_f0, log_frame_energy, log_mel_energies, lpc,
                   lsp_from_lpc, mfcc_frames, moving_average, PREEMPHASIS)
from ..functionals import IS10_FUNCTIONALS, FeatureTrack, FunctionalSet, apply_functionals
from .phonation import detect_pulses, _clean_periods, jitter_local, jitter_ddp, shimmer_local

from . import FeatureVector

N_MELS_MFCC = 26
PITCH_FRAME_MS = 60.0

LLD_NAMES = tuple(
    ["pcm_loudness"]
    + [f"mfcc{k}" for k in range(15)]
    + [f"logmel{k}" for k in range(8)]
    + [f"lsp{k}" for k in range(8)]
    + ["f0", "f0_env", "voicing_prob", "jitter_local", "jitter_ddp",
       "shimmer_local"])

assert len(LLD_NAMES) == 38


def _pitch_grid_track(w: Waveform):
    """F0/strength from 60 ms windows, center-aligned with the 25 ms grid.

    Padding both ends by (60-25)/2 ms keeps the frame count and frame centers
    identical to the 25/10 ms analysis grid.
    """
    pad = round((PITCH_FRAME_MS - 25.0) / 2 / 1000.0 * w.sample_rate)
    padded = Waveform(np.pad(w.samples, pad), w.sample_rate, w.source_id)
    return padded, pad, estimate_f0(padded, frame_ms=PITCH_FRAME_MS)


def _hold_last_voiced(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    last = 0.0
    for i, v in enumerate(out):
        if v > 0:
            last = v
        else:
            out[i] = last
    return out


def _per_frame_perturbation(padded: Waveform, f0_values: np.ndarray, step: int,
                            frame_len: int):
    """Frame-wise jitter (local, DDP) and shimmer from 60 ms pulse windows."""
    jit = np.zeros(f0_values.size)
    ddp = np.zeros(f0_values.size)
    shim = np.zeros(f0_values.size)
    for t, f0_t in enumerate(f0_values):
        if f0_t <= 0:
            continue
        seg = padded.samples[t * step:t * step + frame_len]
        marks, amps = detect_pulses(seg, padded.sample_rate, float(f0_t))
        periods = _clean_periods(marks) / padded.sample_rate
        for arr, fn, data in ((jit, jitter_local, periods),
                              (ddp, jitter_ddp, periods),
                              (shim, shimmer_local, amps)):
            v = fn(data)
            arr[t] = 0.0 if np.isnan(v) else v
    return jit, ddp, shim


def i2010pc_features(w: Waveform) -> FeatureVector:
    frames = frame_signal(w)  # hann 25/10
    n = frames.n_frames
    if n == 0:
        # micro-recordings: behave as a single silent frame
        frames_mat = np.zeros((1, round(0.025 * w.sample_rate)))
        n = 1
    else:
        frames_mat = frames.frames
    rate = w.sample_rate

    loud = log_frame_energy(frames_mat)
    ceps = mfcc_frames(frames_mat, rate, n_mels=N_MELS_MFCC, n_ceps=15, first=0)
    mel8 = log_mel_energies(frames_mat, rate, n_mels=8)

    lsp = np.zeros((n, 8))
    for t in range(n):
        x = frames_mat[t]
        pre = np.append(x[0], x[1:] - PREEMPHASIS * x[:-1])
        a, _ = lpc(pre, 8)
        lsp[t] = lsp_from_lpc(a, rate)

    padded, _, pitch = _pitch_grid_track(w)
    f0v = pitch.values[:n] if pitch.values.size >= n else np.pad(
        pitch.values, (0, n - pitch.values.size))
    strength = pitch.strength[:n] if pitch.strength.size >= n else np.pad(
        pitch.strength, (0, n - pitch.strength.size))
    step = round(pitch.step_ms * rate / 1000.0) if pitch.values.size else 80
    frame_len = round(PITCH_FRAME_MS * rate / 1000.0)
    jit, ddp, shim = _per_frame_perturbation(padded, f0v, step, frame_len)

    lld = np.column_stack(
        [loud, ceps, mel8, lsp,
         f0v, _hold_last_voiced(f0v), strength, jit, ddp, shim])
    assert lld.shape == (n, 38)

    lld = moving_average(lld, 3)
    full = np.column_stack([lld, delta(lld)])
    names = LLD_NAMES + tuple(f"d_{s}" for s in LLD_NAMES)
    vec = apply_functionals(FeatureTrack(full, names),
                            FunctionalSet(IS10_FUNCTIONALS))
    return FeatureVector("i2010pc", vec, w.source_id)
