"""Statistical functionals that map per-frame descriptor tracks to vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALL_FUNCTIONALS = (
    "mean", "std", "skewness", "kurtosis", "max", "min",
    "position_max", "position_min",
    "lin_reg_slope", "lin_reg_offset",
    "lin_reg_err_quadratic", "lin_reg_err_absolute",
    "quartile1", "quartile2", "quartile3",
    "iqr12", "iqr23", "iqr13",
    "percentile1", "percentile99", "percentile_range_99_1",
    "uplevel_time75", "uplevel_time90",
)

# The paralinguistic-challenge set: everything except plain max/min.
IS10_FUNCTIONALS = tuple(f for f in ALL_FUNCTIONALS if f not in ("max", "min"))
SIX_BASIC = ("mean", "std", "skewness", "kurtosis", "max", "min")
FOUR_MOMENTS = ("mean", "std", "skewness", "kurtosis")


@dataclass(frozen=True)
class FunctionalSet:
    names: tuple

    def __post_init__(self):
        for name in self.names:
            if name not in ALL_FUNCTIONALS:
                raise ValueError(f"unknown functional {name!r}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate functional names")

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True)
class FeatureTrack:
    """Per-frame descriptor matrix (n_frames x d); NaN marks an absent value."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if values.shape[1] != len(self.names):
            raise ValueError("descriptor count does not match names")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def _column_stats(x: np.ndarray) -> dict:
    """All supported functionals of one finite non-empty column."""
    n = x.size
    t = np.arange(n, dtype=np.float64)
    if n > 1:
        slope, offset = np.polyfit(t, x, 1)
    else:
        slope, offset = 0.0, float(x[0])
    resid = x - (slope * t + offset)
    m = x.mean()
    c = x - m
    q1, q2, q3, p1, p99 = np.percentile(x, [25, 50, 75, 1, 99])
    lo, hi = x.min(), x.max()
    rng = hi - lo
    # Exactly-constant columns: define all dispersion/shape statistics as 0
    # rather than amplifying float rounding noise.
    m2 = np.mean(c ** 2) if rng > 0 else 0.0

    def uplevel(frac):
        # Zero-range columns count as never exceeding the level; keeps
        # all-zero descriptor tracks mapping to all-zero functionals.
        return float(np.mean(x >= lo + frac * rng)) if rng > 0 else 0.0

    return {
        "mean": float(m),
        "std": float(x.std(ddof=1)) if n > 1 and rng > 0 else 0.0,
        "skewness": float(np.mean(c ** 3) / m2 ** 1.5) if m2 > 0 else 0.0,
        "kurtosis": float(np.mean(c ** 4) / m2 ** 2 - 3.0) if m2 > 0 else 0.0,
        "max": float(hi),
        "min": float(lo),
        "position_max": float(np.argmax(x) / (n - 1)) if n > 1 else 0.0,
        "position_min": float(np.argmin(x) / (n - 1)) if n > 1 else 0.0,
        "lin_reg_slope": float(slope),
        "lin_reg_offset": float(offset),
        "lin_reg_err_quadratic": float(np.mean(resid ** 2)),
        "lin_reg_err_absolute": float(np.mean(np.abs(resid))),
        "quartile1": float(q1),
        "quartile2": float(q2),
        "quartile3": float(q3),
        "iqr12": float(q2 - q1),
        "iqr23": float(q3 - q2),
        "iqr13": float(q3 - q1),
        "percentile1": float(p1),
        "percentile99": float(p99),
        "percentile_range_99_1": float(p99 - p1),
        "uplevel_time75": uplevel(0.75),
        "uplevel_time90": uplevel(0.90),
    }


def column_functionals(column: np.ndarray, fs: FunctionalSet) -> np.ndarray:
    """Functionals of one descriptor column; absent (NaN) values are dropped.

    A column that is empty after dropping absences yields all zeros.
    """
    x = np.asarray(column, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return np.zeros(len(fs))
    stats = _column_stats(x)
    return np.array([stats[name] for name in fs.names])


def apply_functionals(track: FeatureTrack, fs: FunctionalSet) -> np.ndarray:
    """Summarize every descriptor column; descriptor-major, functional-minor."""
    blocks = [column_functionals(track.values[:, j], fs)
              for j in range(len(track.names))]
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)
