"""Low-level speech DSP: pitch, LPC/formants, cepstra, band energies, deltas."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft
from scipy import signal as sps

from .audio import FRAME_MS, STEP_MS, Waveform, frame_count

F0_MIN_HZ = 60.0
F0_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.45

LOG_FLOOR = 1e-10

# Formant search constraints on the LPC-8 pole candidates.
FORMANT_LPC_ORDER = 8
FORMANT_MAX_BW_HZ = 400.0
FORMANT_MIN_HZ = 90.0
FORMANT_MAX_HZ = 3800.0
PREEMPHASIS = 0.97
# Full 0.97 pre-emphasis tilts LPC-8 pole estimates ~10% high around 500 Hz;
# a milder coefficient keeps low formants unbiased on resonator benchmarks.
FORMANT_PREEMPHASIS = 0.5

N_BARK_BANDS = 22


@dataclass(frozen=True)
class F0Track:
    """Per-frame pitch in Hz (0 where unvoiced) plus the peak NCCF strength."""

    values: np.ndarray
    strength: np.ndarray
    frame_len_ms: float
    step_ms: float

    @property
    def voiced(self) -> np.ndarray:
        return self.values > 0


def estimate_f0(w: Waveform, fmin: float = F0_MIN_HZ, fmax: float = F0_MAX_HZ,
                frame_ms: float = FRAME_MS, step_ms: float = STEP_MS,
                threshold: float = VOICING_THRESHOLD) -> F0Track:
    """Pitch track from the normalized cross-correlation of each frame.

    For frame samples x(0..L-1) with lookahead, the score at lag k is
    phi(k) = sum x(n) x(n+k) / sqrt(e(0) e(k)); the earliest lag within 0.01
    of the maximum wins (suppresses octave-down picks on clean tones) and is
    refined by parabolic interpolation.  Frames whose peak falls below the
    voicing threshold are set to 0, then the track is median-filtered (width 3).
    """
    rate = w.sample_rate
    L = round(frame_ms * rate / 1000.0)
    S = round(step_ms * rate / 1000.0)
    lag_min = max(2, int(rate / fmax))
    K = int(math.ceil(rate / fmin))
    n = frame_count(w.samples.size, L, S)
    if n == 0 or lag_min >= K:
        z = np.zeros(0)
        return F0Track(z, z.copy(), frame_ms, step_ms)

    xp = np.concatenate([w.samples, np.zeros(K)])
    seg = sliding_window_view(xp, L + K)[::S][:n]
    cs = np.concatenate([np.zeros((n, 1)), np.cumsum(seg ** 2, axis=1)], axis=1)
    energy = cs[:, L:] - cs[:, :K + 1]  # e(k) for k = 0..K

    nfft = sfft.next_fast_len(L + K)
    spec = sfft.rfft(seg, nfft, axis=1)
    base = sfft.rfft(seg[:, :L], nfft, axis=1)
    corr = sfft.irfft(np.conj(base) * spec, nfft, axis=1)[:, :K + 1]
    # Flooring (not adding) the normalizer keeps phi scale-free down to
    # arbitrarily quiet input; zero segments give corr = 0 and phi = 0.
    phi = corr / np.sqrt(np.maximum(energy[:, :1] * energy, 1e-300))

    band = phi[:, lag_min:]
    peak = band.max(axis=1)
    earliest = np.argmax(band >= peak[:, None] - 0.01, axis=1) + lag_min

    # Energy gate is relative to the loudest frame so that globally rescaled
    # input keeps identical voicing decisions; all-silent input stays unvoiced.
    e0 = energy[:, 0]
    floor = max(LOG_FLOOR, 1e-4 * float(e0.max()))
    values = np.zeros(n)
    strength = np.clip(peak, 0.0, 1.0)
    for t in range(n):
        if e0[t] < floor or peak[t] < threshold:
            continue
        k = min(max(earliest[t], 1), K - 1)
        a, b, c = phi[t, k - 1], phi[t, k], phi[t, k + 1]
        denom = a - 2.0 * b + c
        shift = 0.5 * (a - c) / denom if abs(denom) > 1e-12 else 0.0
        values[t] = rate / (k + np.clip(shift, -0.5, 0.5))
    values[(values > 0) & ((values < fmin) | (values > fmax))] = 0.0
    values = sps.medfilt(values, 3) if n >= 3 else values
    strength[e0 < floor] = 0.0
    return F0Track(values, strength, frame_ms, step_ms)


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r(0..max_lag)."""
    x = np.asarray(x, dtype=np.float64)
    full = np.correlate(x, x, mode="full")
    return full[x.size - 1:x.size + max_lag]


def lpc(x: np.ndarray, order: int):
    """Autocorrelation-method LPC via Levinson-Durbin.

    Returns (a, err) where a = [1, a1..ap] defines A(z) = 1 + sum a_k z^-k
    and err is the final prediction-error power.  Degenerate (silent) input
    yields the trivial predictor a = [1, 0..0].
    """
    r = autocorrelation(x, order)
    a = np.zeros(order + 1)
    a[0] = 1.0
    if r[0] <= 0.0:
        return a, 0.0
    err = r[0]
    for i in range(1, order + 1):
        acc = r[i] + a[1:i] @ r[1:i][::-1]
        k = -acc / err
        prev = a[1:i].copy()
        a[1:i] = prev + k * prev[::-1]
        a[i] = k
        err *= (1.0 - k * k)
        if err <= 0.0:
            err = LOG_FLOOR
    return a, err


def formants_f1_f2(segment: np.ndarray, rate: int):
    """First two formant frequencies of a short voiced segment.

    Pre-emphasized, Hamming-windowed LPC of order 8; poles with bandwidth
    under 400 Hz and frequency inside (90, 3800) Hz qualify.  Missing
    formants come back as NaN.
    """
    x = np.asarray(segment, dtype=np.float64)
    if x.size < FORMANT_LPC_ORDER * 2 or not np.any(x):
        return math.nan, math.nan
    x = np.append(x[0], x[1:] - FORMANT_PREEMPHASIS * x[:-1]) * np.hamming(x.size)
    a, _ = lpc(x, FORMANT_LPC_ORDER)
    roots = np.roots(a)
    roots = roots[np.imag(roots) > 0]
    freqs = np.angle(roots) * rate / (2.0 * math.pi)
    bws = -np.log(np.maximum(np.abs(roots), 1e-12)) * rate / math.pi
    ok = (bws < FORMANT_MAX_BW_HZ) & (freqs > FORMANT_MIN_HZ) & (freqs < FORMANT_MAX_HZ)
    cand = np.sort(freqs[ok])
    f1 = float(cand[0]) if cand.size >= 1 else math.nan
    f2 = float(cand[1]) if cand.size >= 2 else math.nan
    return f1, f2


def lsp_from_lpc(a: np.ndarray, rate: int) -> np.ndarray:
    """Line spectral frequencies (Hz, ascending) of an LPC polynomial."""
    a = np.asarray(a, dtype=np.float64)
    p = a.size - 1
    ext = np.append(a, 0.0)
    angles = []
    for poly in (ext + ext[::-1], ext - ext[::-1]):
        if np.allclose(poly, 0.0):
            continue
        rts = np.roots(poly)
        ang = np.angle(rts)
        angles.extend(ang[(ang > 1e-6) & (ang < math.pi - 1e-6)])
    lsf = np.sort(np.asarray(angles)) * rate / (2.0 * math.pi)
    if lsf.size < p:
        lsf = np.pad(lsf, (0, p - lsf.size))
    return lsf[:p]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft_bins: int, rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filters, each normalized to unit weight sum."""
    if fmax is None:
        fmax = rate / 2.0
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft_bins) * rate / (2.0 * (n_fft_bins - 1))
    fb = np.zeros((n_mels, n_fft_bins))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        tri = np.maximum(0.0, np.minimum(up, down))
        s = tri.sum()
        if s > 0:
            fb[m] = tri / s
    return fb


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    """Per-frame magnitude-squared rFFT (frames are already windowed)."""
    return np.abs(np.fft.rfft(frames, axis=-1)) ** 2


def log_mel_energies(frames: np.ndarray, rate: int, n_mels: int,
                     fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    spec = power_spectrum(np.atleast_2d(frames))
    fb = mel_filterbank(n_mels, spec.shape[1], rate, fmin, fmax)
    return np.log(np.maximum(spec @ fb.T, LOG_FLOOR))


def mfcc_frames(frames: np.ndarray, rate: int, n_mels: int = 24,
                n_ceps: int = 13, first: int = 0) -> np.ndarray:
    """MFCCs per frame: orthonormal DCT-II of the log mel energies.

    Returns coefficients first..first+n_ceps-1 (c0 included by default).
    """
    logmel = log_mel_energies(frames, rate, n_mels)
    ceps = sfft.dct(logmel, type=2, norm="ortho", axis=1)
    return ceps[:, first:first + n_ceps]


def hz_to_bark(f):
    f = np.asarray(f, dtype=np.float64)
    return 13.0 * np.arctan(0.00076 * f) + 3.5 * np.arctan((f / 7500.0) ** 2)


def bark_band_energies(chunk: np.ndarray, rate: int,
                       n_bands: int = N_BARK_BANDS) -> np.ndarray:
    """Natural-log energies in equal-width critical-band intervals.

    Accepts one chunk of >= 64 samples (returns 22 values) or a frame matrix
    (returns 22 per row).  Bands split the Bark axis [0, z(rate/2)] evenly so
    every band keeps at least one FFT bin.
    """
    arr = np.asarray(chunk, dtype=np.float64)
    if arr.shape[-1] < 64:
        raise ValueError("bark_band_energies needs at least 64 samples")
    spec = power_spectrum(np.atleast_2d(arr))
    n_bins = spec.shape[1]
    freqs = np.arange(n_bins) * rate / (2.0 * (n_bins - 1))
    z = hz_to_bark(freqs)
    idx = np.minimum((z / (hz_to_bark(rate / 2.0) / n_bands)).astype(int), n_bands - 1)
    bands = np.zeros((spec.shape[0], n_bands))
    for b in range(n_bands):
        sel = idx == b
        if np.any(sel):
            bands[:, b] = spec[:, sel].sum(axis=1)
    out = np.log(np.maximum(bands, LOG_FLOOR))
    return out[0] if arr.ndim == 1 else out


def teager_energy(x: np.ndarray) -> np.ndarray:
    """Discrete Teager energy psi(n) = x(n)^2 - x(n-1) x(n+1).

    Endpoints are replicated from their interior neighbors so the output has
    the same length as the input (requires length >= 3).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 3:
        raise ValueError("teager_energy needs at least 3 samples")
    core = x[1:-1] ** 2 - x[:-2] * x[2:]
    return np.concatenate([core[:1], core, core[-1:]])


def delta(feat: np.ndarray, width: int = 2) -> np.ndarray:
    """Regression delta over +/-width neighbors with edge replication."""
    feat = np.asarray(feat, dtype=np.float64)
    squeeze = feat.ndim == 1
    f = np.atleast_2d(feat.T).T if squeeze else feat
    if f.shape[0] == 0:
        return feat.copy()
    padded = np.pad(f, ((width, width), (0, 0)), mode="edge")
    norm = 2.0 * sum(k * k for k in range(1, width + 1))
    out = np.zeros_like(f)
    for k in range(1, width + 1):
        out += k * (padded[width + k:padded.shape[0] - width + k]
                    - padded[width - k:-width - k])
    out /= norm
    return out[:, 0] if squeeze else out


def moving_average(feat: np.ndarray, width: int = 3) -> np.ndarray:
    """Centered moving average along axis 0 with edge replication."""
    feat = np.asarray(feat, dtype=np.float64)
    squeeze = feat.ndim == 1
    f = feat[:, None] if squeeze else feat
    if f.shape[0] == 0 or width <= 1:
        return feat.copy()
    half = width // 2
    padded = np.pad(f, ((half, half), (0, 0)), mode="edge")
    kernel = np.ones(width) / width
    out = np.apply_along_axis(lambda c: np.convolve(c, kernel, "valid"), 0, padded)
    return out[:, 0] if squeeze else out


def log_frame_energy(frames: np.ndarray) -> np.ndarray:
    """Natural-log frame energy ln(sum x^2), floored."""
    frames = np.atleast_2d(frames)
    return np.log(np.maximum((frames ** 2).sum(axis=1), LOG_FLOOR))
