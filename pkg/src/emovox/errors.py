"""Exception types shared across the package."""


class EmovoxError(Exception):
    """Base class for all errors raised by this package."""


class MalformedWavError(EmovoxError):
    """File exists but is not a parseable RIFF/WAVE container."""


class UnsupportedWavError(EmovoxError):
    """Valid WAV container with a codec we do not read (non-PCM, exotic widths)."""


class UpsamplingError(EmovoxError):
    """Input sample rate below the 8 kHz target; upsampling is not supported."""


class ManifestError(EmovoxError):
    """Manifest file is missing, malformed, or violates its invariants."""


class ConfigError(EmovoxError):
    """Experiment config is malformed or contains unknown keys."""


class ModelFormatError(EmovoxError):
    """Binary model/cache container is malformed or has unexpected shapes."""


class TrainingError(EmovoxError):
    """Classifier or embedding training cannot proceed (bad labels, too little data)."""


class EvaluationError(EmovoxError):
    """Fold construction or metric computation is impossible for the given data."""


class FeatureSchemeError(EmovoxError):
    """Feature scheme mismatch (fusion spec violations, model/feature disagreement)."""
