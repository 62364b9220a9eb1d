"""Prosody features: duration, F0 and energy statistics over 78 dimensions.

The exact descriptor-by-functional layout is enumerated in
docs/prosody_features.md; PROSODY_FEATURE_NAMES below is the same list and
the docs table is generated from it.
"""

from __future__ import annotations

import numpy as np

from ..audio import SPEECH, Waveform, detect_speech, frame_signal, voiced_segments
from ..dsp import estimate_f0, log_frame_energy
from ..functionals import SIX_BASIC, FeatureTrack, FunctionalSet, apply_functionals

from . import FeatureVector

STEP_S = 0.010

_CONTOUR_TRACKS = ("f0_contour", "energy_contour", "voiced_duration",
                   "unvoiced_duration", "pause_duration")
_SLOPE_TRACKS = ("f0_slope_per_segment", "energy_slope_per_segment")
_RANGE_TRACKS = ("f0_range_per_segment", "energy_range_per_segment")
_FIT_TRACKS = ("f0_fit_error_per_segment", "energy_fit_error_per_segment")
_RATE_SCALARS = ("voiced_segments_per_second", "pauses_per_second")
_RATIO_SCALARS = ("voiced_time_ratio", "unvoiced_time_ratio", "pause_time_ratio")
_COUNT_SCALARS = ("n_voiced_segments", "n_pauses", "total_duration_s",
                  "total_voiced_s", "total_pause_s")
_GLOBAL_SCALARS = ("global_f0_slope", "global_energy_slope")

PROSODY_FEATURE_NAMES = tuple(
    [f"{t}.{f}" for t in _CONTOUR_TRACKS for f in SIX_BASIC]
    + list(_RATE_SCALARS) + list(_RATIO_SCALARS)
    + [f"{t}.{f}" for t in _SLOPE_TRACKS for f in SIX_BASIC]
    + [f"{t}.{f}" for t in _RANGE_TRACKS for f in SIX_BASIC]
    + list(_COUNT_SCALARS)
    + [f"{t}.{f}" for t in _FIT_TRACKS for f in SIX_BASIC]
    + list(_GLOBAL_SCALARS))

assert len(PROSODY_FEATURE_NAMES) == 78


def _frame_runs(labels: np.ndarray):
    runs = []
    start = None
    for t, v in enumerate(labels):
        if v and start is None:
            start = t
        elif not v and start is not None:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, labels.size))
    return runs


def _slope_and_mse(y: np.ndarray):
    """Least-squares slope (per second) and mean squared residual over time."""
    if y.size < 2:
        return np.nan, np.nan
    t = np.arange(y.size) * STEP_S
    slope, offset = np.polyfit(t, y, 1)
    resid = y - (slope * t + offset)
    return float(slope), float(np.mean(resid ** 2))


def _track_stats(values, name, fs):
    col = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    if col.size == 0:
        col = np.full((1, 1), np.nan)
    return apply_functionals(FeatureTrack(col, (name,)), fs)


def prosody_features(w: Waveform) -> FeatureVector:
    f0 = estimate_f0(w)
    spans, _ = voiced_segments(w, f0)
    vad = detect_speech(w)
    n = f0.values.size
    step = round(f0.step_ms * w.sample_rate / 1000.0)

    voiced = np.zeros(n, dtype=bool)
    for s in spans:
        if s.kind == "voiced":
            lo = int(np.ceil(s.start_sample / step))
            hi = int(np.ceil(s.end_sample / step))
            voiced[lo:min(hi, n)] = True
    speech = np.zeros(n, dtype=bool)
    for s in vad:
        if s.kind == SPEECH:
            lo = int(np.ceil(s.start_sample / step))
            hi = int(np.ceil(s.end_sample / step))
            speech[lo:min(hi, n)] = True

    if n == 0 or not np.any(voiced):
        return FeatureVector("prosody", np.zeros(78), w.source_id,
                             warning="no voiced speech")

    energy = log_frame_energy(frame_signal(w, window_kind="rectangular").frames)
    unvoiced = speech & ~voiced
    pause = ~speech

    voiced_runs = _frame_runs(voiced)
    pause_runs = _frame_runs(pause)
    unvoiced_runs = _frame_runs(unvoiced)

    f0_contour = f0.values[voiced & (f0.values > 0)]
    energy_contour = energy[voiced]
    voiced_dur = np.array([(b - a) * STEP_S for a, b in voiced_runs])
    unvoiced_dur = np.array([(b - a) * STEP_S for a, b in unvoiced_runs])
    pause_dur = np.array([(b - a) * STEP_S for a, b in pause_runs])

    f0_slopes, f0_errs, f0_ranges = [], [], []
    e_slopes, e_errs, e_ranges = [], [], []
    for a, b in voiced_runs:
        seg_f0 = f0.values[a:b]
        seg_f0 = seg_f0[seg_f0 > 0]
        seg_e = energy[a:b]
        s, q = _slope_and_mse(seg_f0)
        f0_slopes.append(s)
        f0_errs.append(q)
        f0_ranges.append(seg_f0.max() - seg_f0.min() if seg_f0.size else np.nan)
        s, q = _slope_and_mse(seg_e)
        e_slopes.append(s)
        e_errs.append(q)
        e_ranges.append(seg_e.max() - seg_e.min() if seg_e.size else np.nan)

    total_s = w.duration_s
    six = FunctionalSet(SIX_BASIC)
    contour_vals = {
        "f0_contour": f0_contour, "energy_contour": energy_contour,
        "voiced_duration": voiced_dur, "unvoiced_duration": unvoiced_dur,
        "pause_duration": pause_dur,
        "f0_slope_per_segment": f0_slopes, "energy_slope_per_segment": e_slopes,
        "f0_range_per_segment": f0_ranges, "energy_range_per_segment": e_ranges,
        "f0_fit_error_per_segment": f0_errs, "energy_fit_error_per_segment": e_errs,
    }

    g_f0_slope, _ = _slope_and_mse(f0_contour)
    g_e_slope, _ = _slope_and_mse(energy_contour)
    scalar_vals = {
        "voiced_segments_per_second": len(voiced_runs) / total_s,
        "pauses_per_second": len(pause_runs) / total_s,
        "voiced_time_ratio": float(np.mean(voiced)),
        "unvoiced_time_ratio": float(np.mean(unvoiced)),
        "pause_time_ratio": float(np.mean(pause)),
        "n_voiced_segments": float(len(voiced_runs)),
        "n_pauses": float(len(pause_runs)),
        "total_duration_s": total_s,
        "total_voiced_s": float(np.sum(voiced)) * STEP_S,
        "total_pause_s": float(np.sum(pause)) * STEP_S,
        "global_f0_slope": 0.0 if np.isnan(g_f0_slope) else g_f0_slope,
        "global_energy_slope": 0.0 if np.isnan(g_e_slope) else g_e_slope,
    }

    out = []
    done_tracks = {}
    for name in PROSODY_FEATURE_NAMES:
        if "." in name:
            track, func = name.split(".")
            if track not in done_tracks:
                done_tracks[track] = _track_stats(contour_vals[track], track, six)
            out.append(done_tracks[track][SIX_BASIC.index(func)])
        else:
            out.append(scalar_vals[name])
    return FeatureVector("prosody", np.asarray(out), w.source_id)
