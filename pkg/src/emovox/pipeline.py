"""Batch feature extraction: manifest rows -> FeatureVectors, with caching.

The cache key folds in the extractor version and, for embedding schemes, a
digest of the model file bytes, so stale entries can never be returned after
either changes.  Per-file failures are collected, not raised; callers decide
how to report them.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import audio
from .cache import FeatureCache, feature_key
from .config import ExperimentConfig
from .dsp import mfcc_frames
from .embeddings import baum_welch_stats, extract_ivector, xvector_forward
from .errors import ConfigError, EmovoxError
from .features import EXTRACTORS, FeatureVector, FusionSpec, fuse
from .manifest import Manifest
from . import modelio

EXTRACTOR_VERSION = "1"
EMBEDDING_N_CEPS = 24


@dataclass(frozen=True)
class EmbeddingModels:
    ubm: Optional[object] = None
    tv: Optional[object] = None
    xvector: Optional[object] = None
    tags: dict = None  # scheme -> short digest of the model file bytes

    def tag(self, scheme: str) -> str:
        if self.tags and scheme in self.tags:
            return f"{scheme}@{self.tags[scheme]}"
        return scheme


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def load_embedding_models(config: ExperimentConfig) -> EmbeddingModels:
    """Load whichever model files the configured scheme needs."""
    schemes = config.fusion_schemes()
    ubm = tv = xvec = None
    tags = {}
    if "ivector" in schemes:
        if not config.tv_model:
            raise ConfigError("scheme 'ivector' requires tv_model in the config")
        tv = modelio.load_tv(config.tv_model)
        ubm = tv.ubm
        tags["ivector"] = _file_digest(config.tv_model)
    if "xvector" in schemes:
        if not config.xvector_model:
            raise ConfigError(
                "scheme 'xvector' requires xvector_model in the config")
        xvec = modelio.load_xvector(config.xvector_model)
        tags["xvector"] = _file_digest(config.xvector_model)
    return EmbeddingModels(ubm=ubm, tv=tv, xvector=xvec, tags=tags)


def load_audio(path) -> audio.Waveform:
    """Read a WAV file and bring it to the 8 kHz processing rate."""
    return audio.resample_to_8k(audio.load_wav(path))


def embedding_mfcc(w: audio.Waveform) -> np.ndarray:
    """24-dim MFCC matrix used as input to both embedding extractors."""
    frames = audio.frame_signal(w)
    return mfcc_frames(frames.frames, w.sample_rate,
                       n_mels=EMBEDDING_N_CEPS, n_ceps=EMBEDDING_N_CEPS)


def extract_scheme(w: audio.Waveform, scheme: str,
                   models: EmbeddingModels | None = None,
                   source_id: str = "") -> FeatureVector:
    """One feature vector for one base scheme."""
    if scheme in EXTRACTORS:
        vec = EXTRACTORS[scheme](w)
        return FeatureVector(scheme, vec.values, source_id=source_id,
                             warning=vec.warning)
    if scheme == "ivector":
        if models is None or models.tv is None:
            raise ConfigError("i-vector extraction needs a loaded TV model")
        stats = baum_welch_stats(models.tv.ubm, embedding_mfcc(w))
        return FeatureVector("ivector", extract_ivector(models.tv, stats),
                             source_id=source_id)
    if scheme == "xvector":
        if models is None or models.xvector is None:
            raise ConfigError("x-vector extraction needs loaded weights")
        return FeatureVector("xvector",
                             xvector_forward(models.xvector, embedding_mfcc(w)),
                             source_id=source_id)
    raise ConfigError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class ExtractionFailure:
    path: str
    reason: str


@dataclass
class ExtractionResult:
    vectors: list
    failures: list
    cache_hits: int
    computed: int

    @property
    def total(self) -> int:
        return len(self.vectors) + len(self.failures)


def _extract_row(row, spec: FusionSpec, models, cache: FeatureCache | None):
    with open(row.path, "rb") as fh:
        raw = fh.read()
    waveform = None
    parts = []
    hits = computed = 0
    for scheme in spec.schemes:
        tag = models.tag(scheme) if models else scheme
        key = feature_key(raw, tag, EXTRACTOR_VERSION) if cache else None
        vec = cache.get(key) if cache else None
        if vec is not None:
            hits += 1
            vec = FeatureVector(vec.scheme, vec.values, source_id=row.path,
                                warning=vec.warning)
        else:
            if waveform is None:
                waveform = load_audio(row.path)
            vec = extract_scheme(waveform, scheme, models, source_id=row.path)
            computed += 1
            if cache:
                cache.put(key, vec)
        parts.append(vec)
    return fuse(parts, spec), hits, computed


def extract_for_manifest(manifest: Manifest, config: ExperimentConfig,
                         cache: FeatureCache | None = None,
                         models: EmbeddingModels | None = None) -> ExtractionResult:
    """Extract the configured scheme for every manifest row.

    Rows whose audio cannot be read or processed become ExtractionFailures;
    the returned vectors keep manifest order.
    """
    spec = config.fusion_spec()
    if models is None:
        models = load_embedding_models(config)

    def work(row):
        try:
            return _extract_row(row, spec, models, cache)
        except (EmovoxError, OSError, ValueError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            return ExtractionFailure(row.path, reason)

    rows = list(manifest)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, rows))
    else:
        outcomes = [work(row) for row in rows]

    vectors, failures = [], []
    hits = computed = 0
    for out in outcomes:
        if isinstance(out, ExtractionFailure):
            failures.append(out)
        else:
            vec, h, c = out
            vectors.append(vec)
            hits += h
            computed += c
    return ExtractionResult(vectors, failures, hits, computed)


def feature_csv(vectors) -> str:
    """Full-precision CSV: source_id column plus f0..f{d-1}."""
    import csv as _csv
    import io

    if not vectors:
        raise ValueError("no feature vectors to serialize")
    dim = vectors[0].dim
    for v in vectors:
        if v.dim != dim:
            raise ValueError("feature vectors have mixed dimensionality")
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_id"] + ["f%d" % i for i in range(dim)])
    for v in vectors:
        writer.writerow([v.source_id] + ["%.17g" % x for x in v.values])
    return buf.getvalue()
