"""Experiment configuration: flat key=value text, unknown keys fatal.

Example file::

    scheme = articulation+prosody+phonation
    mode = speaker_independent
    k_outer = 5
    k_inner = 5
    seed = 17
    cache_dir = .emovox_cache

Grid bounds are decimal exponents; the grid enumerates whole decades, so the
defaults give C in 10^-3..10^4 and gamma in 10^-6..10^3.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from .errors import ConfigError
from .evaluation import Grid, MODES, SPEAKER_INDEPENDENT
from .features import KNOWN_SCHEMES, FusionSpec

_BASE_SCHEMES = tuple(s for s in KNOWN_SCHEMES if s != "fusion")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "phonation"
    mode: str = SPEAKER_INDEPENDENT
    k_outer: int = 5
    k_inner: int = 5
    c_exp_min: int = -3
    c_exp_max: int = 4
    gamma_exp_min: int = -6
    gamma_exp_max: int = 3
    seed: int = 0
    cache_dir: str = ".emovox_cache"
    workers: int = 1
    positive_label: Optional[str] = None
    ubm_model: Optional[str] = None
    tv_model: Optional[str] = None
    xvector_model: Optional[str] = None
    train_c: float = 1.0
    train_gamma: float = 0.1

    def __post_init__(self):
        self.fusion_schemes()  # validates the scheme string
        if self.mode not in MODES:
            raise ConfigError(
                f"mode must be one of {'/'.join(MODES)}, got {self.mode!r}")
        for name in ("k_outer", "k_inner"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2")
        if self.c_exp_min > self.c_exp_max:
            raise ConfigError("c_exp_min must not exceed c_exp_max")
        if self.gamma_exp_min > self.gamma_exp_max:
            raise ConfigError("gamma_exp_min must not exceed gamma_exp_max")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not (self.train_c > 0.0 and self.train_gamma > 0.0):
            raise ConfigError("train_c and train_gamma must be positive")

    def fusion_schemes(self) -> tuple:
        """Member schemes, in order ('a+b+c' syntax; single scheme is itself)."""
        parts = tuple(p.strip() for p in self.scheme.split("+"))
        for p in parts:
            if p not in _BASE_SCHEMES:
                raise ConfigError(
                    f"unknown scheme {p!r}; known: {', '.join(_BASE_SCHEMES)}")
        if len(parts) != len(set(parts)):
            raise ConfigError(f"duplicate scheme in {self.scheme!r}")
        return parts

    def fusion_spec(self) -> FusionSpec:
        return FusionSpec(self.fusion_schemes())

    def grid(self) -> Grid:
        c_values = tuple(10.0 ** e for e in
                         range(self.c_exp_min, self.c_exp_max + 1))
        gamma_values = tuple(10.0 ** e for e in
                             range(self.gamma_exp_min, self.gamma_exp_max + 1))
        return Grid(c_values, gamma_values)


_INT_KEYS = {"k_outer", "k_inner", "c_exp_min", "c_exp_max",
             "gamma_exp_min", "gamma_exp_max", "seed", "workers"}
_FLOAT_KEYS = {"train_c", "train_gamma"}
_KNOWN_KEYS = {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str, origin: str = "config") -> ExperimentConfig:
    values = {}
    seen_lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}: line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{origin}: line {lineno}: unknown key {key!r}")
        if key in seen_lines:
            raise ConfigError(
                f"{origin}: line {lineno}: duplicate key {key!r} "
                f"(first set on line {seen_lines[key]})")
        seen_lines[key] = lineno
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(
                    f"{origin}: line {lineno}: {key} must be an integer, "
                    f"got {value!r}")
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(
                    f"{origin}: line {lineno}: {key} must be a number, "
                    f"got {value!r}")
        else:
            values[key] = value
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text, origin=str(path))
