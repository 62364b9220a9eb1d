"""Stats-pooling TDNN forward pass for utterance embeddings.

Five frame-level layers with spliced/dilated context windows map 24-dim MFCC
frames to 1500-dim representations; mean and population standard deviation are
pooled over time and a final affine layer (before its nonlinearity) yields the
512-dim embedding.  Only the forward pass lives here — weights are loaded from
a model file or randomly initialized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..errors import ModelFormatError

N_INPUT_CEPS = 24
EMBEDDING_DIM = 512
MIN_FRAMES = 15
MEAN_NORM_FRAMES = 300  # 3 s at the 10 ms frame step

LAYER_SHAPES = {
    "frame1": (N_INPUT_CEPS * 5, 512),
    "frame2": (512 * 3, 512),
    "frame3": (512 * 3, 512),
    "frame4": (512, 512),
    "frame5": (512, 1500),
    "segment6": (2 * 1500, EMBEDDING_DIM),
    "segment7": (EMBEDDING_DIM, 512),
}
SPLICE_OFFSETS = {
    "frame1": (-2, -1, 0, 1, 2),
    "frame2": (-2, 0, 2),
    "frame3": (-3, 0, 3),
}
_FRAME_LAYERS = ("frame1", "frame2", "frame3", "frame4", "frame5")


@dataclass(frozen=True)
class XVectorWeights:
    """Per-layer (weight, bias) pairs, shape-checked on construction.

    Weight matrices are stored input-major: layer output = h @ W + b.  The
    ``softmax`` layer may have any output width (the class count).
    """

    layers: Dict[str, Tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        checked = {}
        for name in list(LAYER_SHAPES) + ["softmax"]:
            if name not in self.layers:
                raise ModelFormatError("missing x-vector layer %r" % name)
            w = np.asarray(self.layers[name][0], dtype=np.float64)
            b = np.asarray(self.layers[name][1], dtype=np.float64)
            if name == "softmax":
                expected = (512, b.shape[0] if b.ndim == 1 else -1)
                ok = w.ndim == 2 and w.shape[0] == 512 and w.shape[1] >= 1
            else:
                expected = LAYER_SHAPES[name]
                ok = w.shape == expected
            if not ok:
                raise ModelFormatError(
                    "layer %r weight shape %s, expected %s" % (name, w.shape, expected)
                )
            if b.shape != (w.shape[1],):
                raise ModelFormatError(
                    "layer %r bias shape %s, expected (%d,)" % (name, b.shape, w.shape[1])
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ModelFormatError("layer %r has non-finite parameters" % name)
            w = w.copy()
            b = b.copy()
            w.setflags(write=False)
            b.setflags(write=False)
            checked[name] = (w, b)
        extra = set(self.layers) - set(checked)
        if extra:
            raise ModelFormatError("unknown x-vector layers: %s" % sorted(extra))
        object.__setattr__(self, "layers", checked)

    @property
    def n_classes(self) -> int:
        return self.layers["softmax"][0].shape[1]


def random_xvector_weights(n_classes: int = 8, seed: int = 0, scale: float = 0.05) -> XVectorWeights:
    """Random small-Gaussian weights, e.g. for tests or a toy training start."""
    rng = np.random.default_rng(seed)
    layers = {}
    for name, (n_in, n_out) in LAYER_SHAPES.items():
        layers[name] = (
            rng.standard_normal((n_in, n_out)) * scale,
            rng.standard_normal(n_out) * scale,
        )
    layers["softmax"] = (
        rng.standard_normal((512, n_classes)) * scale,
        rng.standard_normal(n_classes) * scale,
    )
    return XVectorWeights(layers)


def zero_xvector_weights(n_classes: int = 8) -> XVectorWeights:
    layers = {
        name: (np.zeros((n_in, n_out)), np.zeros(n_out))
        for name, (n_in, n_out) in LAYER_SHAPES.items()
    }
    layers["softmax"] = (np.zeros((512, n_classes)), np.zeros(n_classes))
    return XVectorWeights(layers)


def sliding_mean_normalize(frames, max_window: int = MEAN_NORM_FRAMES) -> np.ndarray:
    """Subtract a per-frame mean over a centered window of min(max_window, n) frames.

    The window keeps its full length near the edges by sliding inward, so
    utterances no longer than the window get exact global mean subtraction.
    """
    x = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n = x.shape[0]
    win = min(int(max_window), n)
    half = win // 2
    start = np.clip(np.arange(n) - half, 0, n - win)
    csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    means = (csum[start + win] - csum[start]) / win
    return x - means


def _splice(h, offsets):
    """Stack context rows h[t+o] for each offset; only full-context rows survive."""
    lo = -min(offsets)
    hi = max(offsets)
    n = h.shape[0] - lo - hi
    return np.concatenate([h[lo + off : lo + off + n] for off in offsets], axis=1)


def _run_frame_layers(weights, h):
    for name in _FRAME_LAYERS:
        w, b = weights.layers[name]
        if name in SPLICE_OFFSETS:
            h = _splice(h, SPLICE_OFFSETS[name])
        h = np.maximum(h @ w + b, 0.0)
    return h


def frame_representations(weights: XVectorWeights, mfcc) -> np.ndarray:
    """Run the frame-level layers; output has 14 fewer rows than the input."""
    x = np.atleast_2d(np.asarray(mfcc, dtype=np.float64))
    if x.shape[1] != N_INPUT_CEPS:
        raise ValueError("expected %d-dim input frames, got %d" % (N_INPUT_CEPS, x.shape[1]))
    if not np.all(np.isfinite(x)):
        raise ValueError("input frames contain non-finite values")
    if x.shape[0] < MIN_FRAMES:
        raise ValueError(
            "need at least %d frames for the full context window, got %d"
            % (MIN_FRAMES, x.shape[0])
        )
    h = sliding_mean_normalize(x)
    if np.all(h == h[0]):
        # Identical frames must give identical representations, but BLAS matmul
        # rounding depends on row position; evaluate one row and tile instead.
        row = _run_frame_layers(weights, h[:MIN_FRAMES])
        return np.tile(row, (x.shape[0] - (MIN_FRAMES - 1), 1))
    return _run_frame_layers(weights, h)


def stats_pool(representations) -> np.ndarray:
    """Concatenated per-dimension mean and population std over frames.

    Column sums run over sorted values, which makes the pooled vector exactly
    invariant to the order of the frame representations; constant columns give
    an exact zero std.
    """
    h = np.atleast_2d(np.asarray(representations, dtype=np.float64))
    n = h.shape[0]
    ordered = np.sort(h, axis=0)
    constant = ordered[0] == ordered[-1]
    mean = np.where(constant, ordered[0], ordered.sum(axis=0) / n)
    var = np.sort((h - mean) ** 2, axis=0).sum(axis=0) / n
    std = np.sqrt(np.where(constant, 0.0, var))
    return np.concatenate([mean, std])


def xvector_forward(weights: XVectorWeights, mfcc) -> np.ndarray:
    """512-dim embedding: the segment6 affine output before its nonlinearity."""
    pooled = stats_pool(frame_representations(weights, mfcc))
    w, b = weights.layers["segment6"]
    return pooled @ w + b


def xvector_logits(weights: XVectorWeights, mfcc) -> np.ndarray:
    """Class logits through segment7 and the softmax affine layer."""
    h = np.maximum(xvector_forward(weights, mfcc), 0.0)
    w, b = weights.layers["segment7"]
    h = np.maximum(h @ w + b, 0.0)
    w, b = weights.layers["softmax"]
    return h @ w + b
