"""Audio ingestion, 8 kHz resampling, framing, and speech/voicing segmentation.

All downstream feature code consumes the 8 kHz mono `Waveform` produced here.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import signal as sps

from .errors import MalformedWavError, UnsupportedWavError, UpsamplingError

if TYPE_CHECKING:
    from .dsp import F0Track

TARGET_RATE = 8000
FRAME_MS = 25.0
STEP_MS = 10.0

# VAD tuning: noise floor from the 10th percentile of frame log-energy,
# capped at -60 dBFS so speech-only input stays speech on a second pass.
VAD_NOISE_PERCENTILE = 10.0
VAD_MARGIN_DB = 10.0
VAD_FLOOR_CAP_DB = -60.0
VAD_SMOOTH_FRAMES = 5

MIN_VOICED_RUN_FRAMES = 3
TRANSITION_CHUNK_S = 0.080

SPEECH, SILENCE, VOICED, UNVOICED = "speech", "silence", "voiced", "unvoiced"
ONSET, OFFSET = "onset", "offset"


@dataclass(frozen=True)
class Waveform:
    """Mono audio: samples in [-1, 1] plus sample rate and an opaque source id."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D sample sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class FrameSeries:
    """Windowed analysis frames: matrix of shape (n_frames, frame_len)."""

    frames: np.ndarray
    frame_len_ms: float
    step_ms: float
    window_kind: str
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def step_samples(self) -> int:
        return round(self.step_ms * self.sample_rate / 1000.0)

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1] if self.frames.ndim == 2 else 0


@dataclass(frozen=True)
class SegmentSpan:
    """Half-open sample span [start_sample, end_sample) of one segment kind."""

    start_sample: int
    end_sample: int
    kind: str

    def __post_init__(self):
        if not self.start_sample < self.end_sample:
            raise ValueError("span must satisfy start < end")
        if self.kind not in (SPEECH, SILENCE, VOICED, UNVOICED):
            raise ValueError(f"unknown span kind {self.kind!r}")

    @property
    def n_samples(self) -> int:
        return self.end_sample - self.start_sample


@dataclass(frozen=True)
class Transition:
    """Voicing boundary with an 80 ms chunk of samples centered on it."""

    center_sample: int
    direction: str  # onset: unvoiced -> voiced; offset: voiced -> unvoiced
    chunk: np.ndarray = field(repr=False)


def load_wav(path) -> Waveform:
    """Read a PCM RIFF/WAVE file (8/16-bit, mono or stereo) as a mono Waveform.

    Stereo channels are averaged; integer samples are scaled to [-1, 1].
    Raises FileNotFoundError, MalformedWavError, or UnsupportedWavError.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWavError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise MalformedWavError(f"{path}: missing fmt or data chunk")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedWavError(f"{path}: non-PCM format tag {audio_format}")
    if bits not in (8, 16):
        raise UnsupportedWavError(f"{path}: {bits}-bit PCM not supported")
    if n_channels < 1 or sample_rate <= 0:
        raise MalformedWavError(f"{path}: invalid fmt fields")

    if bits == 8:
        x = (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    else:
        usable = len(data) - (len(data) % 2)
        x = np.frombuffer(data[:usable], dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        usable = x.size - (x.size % n_channels)
        x = x[:usable].reshape(-1, n_channels).mean(axis=1)
    if x.size == 0:
        raise MalformedWavError(f"{path}: empty data chunk")
    return Waveform(x, int(sample_rate), source_id=str(path))


def save_wav(path, w: Waveform) -> None:
    """Write a Waveform as 16-bit mono PCM (test/tooling helper)."""
    x = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, w.sample_rate,
                                 w.sample_rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(pcm))
    with open(path, "wb") as fh:
        fh.write(hdr + pcm)


def _design_decimation_filter(op_rate: int) -> np.ndarray:
    """Windowed-sinc low-pass for the polyphase resampler.

    Passband holds to ~3.9 kHz, stopband from ~4.04 kHz; the -6 dB point sits
    just under the 4 kHz target Nyquist so near-Nyquist content survives.
    """
    cutoff_hz = 3970.0
    width_hz = 140.0
    numtaps, beta = sps.kaiserord(80.0, 2.0 * width_hz / op_rate)
    numtaps |= 1
    return sps.firwin(numtaps, 2.0 * cutoff_hz / op_rate, window=("kaiser", beta))


def resample_to_8k(w: Waveform) -> Waveform:
    """Band-limit below 4 kHz and decimate to the common 8 kHz rate."""
    if w.sample_rate == TARGET_RATE:
        return w
    if w.sample_rate < TARGET_RATE:
        raise UpsamplingError(
            f"{w.source_id or 'waveform'}: rate {w.sample_rate} < {TARGET_RATE}; "
            "upsampling not supported")
    g = math.gcd(TARGET_RATE, w.sample_rate)
    up, down = TARGET_RATE // g, w.sample_rate // g
    taps = _design_decimation_filter(w.sample_rate * up)
    y = sps.resample_poly(w.samples, up, down, window=taps)
    return Waveform(np.clip(y, -1.0, 1.0), TARGET_RATE, source_id=w.source_id)


def make_window(kind: str, length: int) -> np.ndarray:
    if kind == "hann":
        return np.hanning(length)
    if kind == "gaussian":
        return sps.windows.gaussian(length, std=length / 6.0)
    if kind == "rectangular":
        return np.ones(length)
    raise ValueError(f"unknown window kind {kind!r}")


def frame_count(n_samples: int, frame_len: int, step: int) -> int:
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // step + 1


def frame_signal(w: Waveform, frame_len_ms: float = FRAME_MS,
                 step_ms: float = STEP_MS, window_kind: str = "hann") -> FrameSeries:
    """Slice the waveform into overlapping windowed frames."""
    if not frame_len_ms >= step_ms > 0:
        raise ValueError("require frame_len_ms >= step_ms > 0")
    frame_len = round(frame_len_ms * w.sample_rate / 1000.0)
    step = round(step_ms * w.sample_rate / 1000.0)
    n = frame_count(w.samples.size, frame_len, step)
    if n == 0:
        frames = np.zeros((0, frame_len))
    else:
        idx = np.arange(frame_len)[None, :] + step * np.arange(n)[:, None]
        frames = w.samples[idx] * make_window(window_kind, frame_len)[None, :]
    return FrameSeries(frames, frame_len_ms, step_ms, window_kind, w.sample_rate)


def frame_log_energy_db(w: Waveform, frame_len_ms: float = FRAME_MS,
                        step_ms: float = STEP_MS) -> np.ndarray:
    """Per-frame energy in dBFS on the rectangular 25/10 ms grid."""
    fs = frame_signal(w, frame_len_ms, step_ms, "rectangular")
    if fs.n_frames == 0:
        return np.zeros(0)
    return 10.0 * np.log10(np.mean(fs.frames ** 2, axis=1) + 1e-12)


def _runs(labels: np.ndarray):
    """Run-length encode a 1-D bool/int label array into (start, end, value)."""
    out = []
    start = 0
    for t in range(1, labels.size + 1):
        if t == labels.size or labels[t] != labels[start]:
            out.append((start, t, labels[start]))
            start = t
    return out


def _frame_runs_to_spans(runs, step: int, n_samples: int, kind_of) -> list[SegmentSpan]:
    spans = []
    for i, (s, e, v) in enumerate(runs):
        lo = s * step
        hi = e * step if i < len(runs) - 1 else n_samples
        spans.append(SegmentSpan(lo, hi, kind_of(v)))
    return spans


def detect_speech(w: Waveform) -> list[SegmentSpan]:
    """Energy + periodicity VAD: speech/silence spans on the 25/10 ms grid.

    A frame is speech when it clears the noise floor by 10 dB or carries a
    pitch; decisions are smoothed with a 5-frame majority vote.
    """
    from .dsp import estimate_f0

    n = w.samples.size
    energy_db = frame_log_energy_db(w)
    if energy_db.size == 0:
        return [SegmentSpan(0, n, SILENCE)]
    floor = min(np.percentile(energy_db, VAD_NOISE_PERCENTILE), VAD_FLOOR_CAP_DB)
    voiced = estimate_f0(w).values > 0
    speech = (energy_db > floor + VAD_MARGIN_DB) | voiced

    if speech.size >= 2:
        half = VAD_SMOOTH_FRAMES // 2
        padded = np.pad(speech.astype(int), half, mode="edge")
        votes = np.convolve(padded, np.ones(VAD_SMOOTH_FRAMES, dtype=int), "valid")
        speech = votes > VAD_SMOOTH_FRAMES // 2

    step = round(STEP_MS * w.sample_rate / 1000.0)
    return _frame_runs_to_spans(_runs(speech), step, n,
                                lambda v: SPEECH if v else SILENCE)


def voiced_segments(w: Waveform, f0: "F0Track"):
    """Split the frame grid into voiced/unvoiced spans and boundary transitions.

    Voicing runs shorter than 3 frames are absorbed by their neighbors; each
    remaining boundary yields a Transition with an 80 ms centered chunk
    (zero-padded at the signal edges).
    """
    labels = np.asarray(f0.values) > 0
    if labels.size == 0:
        return [], []
    runs = _runs(labels)
    # Flip short runs (leftmost first) until every surviving run is long enough.
    while len(runs) > 1:
        short = next((i for i, (s, e, _) in enumerate(runs)
                      if e - s < MIN_VOICED_RUN_FRAMES), None)
        if short is None:
            break
        s, e, v = runs[short]
        merged = np.concatenate([np.full(en - st, bool(kv)) for st, en, kv in runs])
        merged[s:e] = not v
        runs = _runs(merged)

    step = round(f0.step_ms * w.sample_rate / 1000.0)
    spans = _frame_runs_to_spans(runs, step, w.samples.size,
                                 lambda v: VOICED if v else UNVOICED)
    chunk_len = round(TRANSITION_CHUNK_S * w.sample_rate)
    transitions = []
    for prev, cur in zip(spans[:-1], spans[1:]):
        center = cur.start_sample
        direction = ONSET if cur.kind == VOICED else OFFSET
        chunk = np.zeros(chunk_len)
        lo = center - chunk_len // 2
        src_lo, src_hi = max(lo, 0), min(lo + chunk_len, w.samples.size)
        chunk[src_lo - lo:src_hi - lo] = w.samples[src_lo:src_hi]
        transitions.append(Transition(center, direction, chunk))
    return spans, transitions
