"""Trimmed-statistic normalization and additive score fusion.

Each score stream (one per patch size, plus the student-teacher branch) is
z-scored with the trimmed mean/std of its validation scores, then the
normalized streams are summed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TooFewScores, UnknownStream

TRIM_LOW = 0.20
TRIM_HIGH = 0.80
SIGMA_FLOOR = 1e-12


def trimmed_stats(scores, low: float = TRIM_LOW, high: float = TRIM_HIGH) -> tuple[float, float]:
    """Mean and population std of the [low, high) quantile slice by index."""
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    if n < 5:
        raise TooFewScores(f"need >= 5 scores, got {n}")
    if not (0 <= low < high <= 1):
        raise ValueError("trim fractions must satisfy 0 <= low < high <= 1")
    kept = np.sort(scores)[int(np.floor(low * n)):int(np.ceil(high * n))]
    mu = float(kept.mean())
    sigma = max(float(kept.std()), SIGMA_FLOOR)
    return mu, sigma


@dataclass(frozen=True)
class CalibrationProfile:
    streams: dict = field(default_factory=dict)  # name -> (mu, sigma)
    low: float = TRIM_LOW
    high: float = TRIM_HIGH

    def to_json(self) -> str:
        payload = {name: {"mu": mu, "sigma": sigma, "low": self.low, "high": self.high}
                   for name, (mu, sigma) in self.streams.items()}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationProfile":
        raw = json.loads(text)
        streams = {name: (v["mu"], v["sigma"]) for name, v in raw.items()}
        low = next(iter(raw.values()))["low"] if raw else TRIM_LOW
        high = next(iter(raw.values()))["high"] if raw else TRIM_HIGH
        return cls(streams=streams, low=low, high=high)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "CalibrationProfile":
        return cls.from_json(Path(path).read_text())


def calibrate(validation_scores: dict, low: float = TRIM_LOW,
              high: float = TRIM_HIGH) -> CalibrationProfile:
    """Trimmed stats per stream from validation-set scores."""
    streams = {name: trimmed_stats(scores, low, high)
               for name, scores in validation_scores.items()}
    return CalibrationProfile(streams=streams, low=low, high=high)


def normalize(profile: CalibrationProfile, stream: str, score: float) -> float:
    if stream not in profile.streams:
        raise UnknownStream(f"stream {stream!r} not in calibration profile")
    mu, sigma = profile.streams[stream]
    return (score - mu) / sigma


def fuse(profile: CalibrationProfile, raw: dict) -> float:
    """Sum of per-stream normalized scores."""
    return sum(normalize(profile, name, s) for name, s in raw.items())
