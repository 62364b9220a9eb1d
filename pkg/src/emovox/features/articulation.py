"""Articulation features: spectra of voicing transitions plus formant dynamics.

58 descriptors per transition direction (22 Bark-band energies, 12 MFCC and
their first/second deltas) and 6 formant tracks, each summarized by
{mean, std, skewness, kurtosis}: 122 x 4 = 488 values.
"""

from __future__ import annotations

import numpy as np

from ..audio import ONSET, VOICED, Waveform, frame_count, frame_signal, voiced_segments
from ..dsp import bark_band_energies, delta, estimate_f0, formants_f1_f2, mfcc_frames
from ..functionals import FOUR_MOMENTS, FeatureTrack, FunctionalSet, apply_functionals

from . import FeatureVector

N_MFCC = 12


def transition_descriptors(chunk: np.ndarray, rate: int) -> np.ndarray:
    """58 values for one 80 ms transition chunk.

    Bark-band energies of the whole chunk plus MFCC/delta/delta-delta
    averaged over 25/10 ms sub-frames.
    """
    bbe = bark_band_energies(chunk, rate)
    n = frame_count(chunk.size, round(0.025 * rate), round(0.010 * rate))
    if n == 0:
        mf = dmf = ddmf = np.zeros(N_MFCC)
    else:
        frames = frame_signal(Waveform(chunk, rate, "chunk")).frames
        ceps = mfcc_frames(frames, rate, n_mels=24, n_ceps=N_MFCC, first=1)
        mf = ceps.mean(axis=0)
        dmf = delta(ceps).mean(axis=0)
        ddmf = delta(delta(ceps)).mean(axis=0)
    return np.concatenate([bbe, mf, dmf, ddmf])


def articulation_features(w: Waveform) -> FeatureVector:
    f0 = estimate_f0(w)
    spans, transitions = voiced_segments(w, f0)
    step = round(f0.step_ms * w.sample_rate / 1000.0)
    frame_len = round(f0.frame_len_ms * w.sample_rate / 1000.0)

    warnings = []
    onset_rows, offset_rows = [], []
    for tr in transitions:
        row = transition_descriptors(tr.chunk, w.sample_rate)
        (onset_rows if tr.direction == ONSET else offset_rows).append(row)
    if not transitions:
        warnings.append("no transitions")

    f1s, f2s = [], []
    for s in spans:
        if s.kind != VOICED:
            continue
        for t in range(f0.values.size):
            start = t * step
            if not (s.start_sample <= start < s.end_sample):
                continue
            seg = w.samples[start:start + frame_len]
            if seg.size < frame_len:
                continue
            f1, f2 = formants_f1_f2(seg, w.sample_rate)
            f1s.append(f1)
            f2s.append(f2)
    if not f1s:
        warnings.append("no voiced frames")

    def contour_and_deltas(vals):
        arr = np.asarray(vals, dtype=np.float64)
        arr = arr[np.isfinite(arr)]
        if arr.size == 0:
            absent = np.full(1, np.nan)
            return absent, absent, absent
        return arr, delta(arr), delta(delta(arr))

    f1c, df1, ddf1 = contour_and_deltas(f1s)
    f2c, df2, ddf2 = contour_and_deltas(f2s)

    four = FunctionalSet(FOUR_MOMENTS)
    parts = []
    for rows in (onset_rows, offset_rows):
        mat = (np.asarray(rows) if rows else np.full((1, 58), np.nan))
        track = FeatureTrack(mat, tuple(f"d{j}" for j in range(58)))
        parts.append(apply_functionals(track, four))
    for name, col in (("f1", f1c), ("df1", df1), ("ddf1", ddf1),
                      ("f2", f2c), ("df2", df2), ("ddf2", ddf2)):
        track = FeatureTrack(col.reshape(-1, 1), (name,))
        parts.append(apply_functionals(track, four))
    return FeatureVector("articulation", np.concatenate(parts), w.source_id,
                         warning="; ".join(warnings))
