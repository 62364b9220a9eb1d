"""Per-utterance feature families and fusion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FeatureSchemeError

# Fixed output dimensionality per scheme; i-vectors vary with the model rank
# and fusion with its member list.
SCHEME_DIMS = {
    "phonation": 28,
    "articulation": 488,
    "prosody": 78,
    "i2010pc": 1596,
    "xvector": 512,
}
KNOWN_SCHEMES = ("phonation", "articulation", "prosody", "i2010pc",
                 "ivector", "xvector", "fusion")


@dataclass(frozen=True)
class FeatureVector:
    scheme: str
    values: np.ndarray
    source_id: str = ""
    warning: str = ""

    def __post_init__(self):
        if self.scheme not in KNOWN_SCHEMES:
            raise FeatureSchemeError(f"unknown scheme {self.scheme!r}")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise FeatureSchemeError("feature values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise FeatureSchemeError(f"{self.scheme}: non-finite feature values")
        want = SCHEME_DIMS.get(self.scheme)
        if want is not None and values.size != want:
            raise FeatureSchemeError(
                f"{self.scheme}: expected {want} values, got {values.size}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FusionSpec:
    """Ordered list of schemes whose vectors are concatenated."""

    schemes: tuple

    def __post_init__(self):
        if not self.schemes:
            raise FeatureSchemeError("fusion spec must name at least one scheme")
        if len(set(self.schemes)) != len(self.schemes):
            raise FeatureSchemeError("duplicate scheme in fusion spec")
        for s in self.schemes:
            if s not in KNOWN_SCHEMES or s == "fusion":
                raise FeatureSchemeError(f"cannot fuse scheme {s!r}")


def fuse(vectors: list, spec: FusionSpec) -> FeatureVector:
    """Concatenate one vector per scheme in spec order (identity for one)."""
    by_scheme = {}
    for v in vectors:
        if v.scheme in by_scheme:
            raise FeatureSchemeError(f"duplicate vector for scheme {v.scheme!r}")
        by_scheme[v.scheme] = v
    missing = [s for s in spec.schemes if s not in by_scheme]
    extra = [s for s in by_scheme if s not in spec.schemes]
    if missing or extra:
        raise FeatureSchemeError(
            f"fusion mismatch: missing {missing}, unexpected {extra}")
    sources = {v.source_id for v in vectors}
    if len(sources) > 1:
        raise FeatureSchemeError(f"fusion across different sources: {sources}")
    if len(spec.schemes) == 1:
        return by_scheme[spec.schemes[0]]
    parts = [by_scheme[s] for s in spec.schemes]
    return FeatureVector(
        "fusion", np.concatenate([p.values for p in parts]),
        source_id=parts[0].source_id,
        warning="; ".join(p.warning for p in parts if p.warning))


from .phonation import phonation_features  # noqa: E402
from .articulation import articulation_features  # noqa: E402
from .prosody import prosody_features  # noqa: E402
from .i2010pc import i2010pc_features  # noqa: E402

EXTRACTORS = {
    "phonation": phonation_features,
    "articulation": articulation_features,
    "prosody": prosody_features,
    "i2010pc": i2010pc_features,
}
