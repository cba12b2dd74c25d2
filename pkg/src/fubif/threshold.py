"""Threshold distributions over a node's function values."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_ETA = 1.5


class ThresholdKind(str, enum.Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"

    @property
    def code(self) -> int:
        return 0 if self is ThresholdKind.UNIFORM else 1

    @classmethod
    def parse(cls, value) -> "ThresholdKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"unif": "uniform", "u": "uniform", "norm": "normal", "n": "normal"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown threshold kind {value!r}") from None


@dataclass(frozen=True)
class ThresholdModel:
    kind: ThresholdKind
    lo: float = 0.0
    hi: float = 0.0
    mean: float = 0.0
    sigma: float = 0.0
    eta: float = DEFAULT_ETA

    @property
    def degenerate(self) -> bool:
        if self.kind is ThresholdKind.UNIFORM:
            return self.lo == self.hi
        return self.sigma == 0.0

    def sample(self, rng: np.random.Generator) -> float:
        return sample_threshold(self, rng)

    def cdf(self, t: float) -> float:
        return cdf(self, t)

    def pdf(self, t: float) -> float:
        """Density of the threshold; infinite mass points are reported as 0."""
        if self.kind is ThresholdKind.UNIFORM:
            if self.hi == self.lo or not self.lo <= t <= self.hi:
                return 0.0
            return 1.0 / (self.hi - self.lo)
        if self.sigma == 0.0:
            return 0.0
        z = (t - self.mean) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


def fit_threshold_model(values, kind=ThresholdKind.NORMAL, eta: float = DEFAULT_ETA) -> ThresholdModel:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("no sample values")
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    kind = ThresholdKind.parse(kind)
    if kind is ThresholdKind.UNIFORM:
        return ThresholdModel(kind, lo=float(values.min()), hi=float(values.max()), eta=eta)
    # population standard deviation, so a single value gives sigma = 0; identical
    # values are pinned to exactly 0 since the two-pass std can leave roundoff
    sigma = 0.0 if values.min() == values.max() else float(eta * values.std())
    return ThresholdModel(kind, mean=float(values.mean()), sigma=sigma, eta=eta)


def sample_threshold(model: ThresholdModel, rng: np.random.Generator) -> float:
    if model.kind is ThresholdKind.UNIFORM:
        return float(rng.uniform(model.lo, model.hi))
    return float(rng.normal(model.mean, model.sigma))


def cdf(model: ThresholdModel, t: float) -> float:
    """P(tau <= t): the probability that a point with ``f(x) = t`` goes right."""
    if model.kind is ThresholdKind.UNIFORM:
        if model.hi == model.lo:
            return 0.5
        return min(1.0, max(0.0, (t - model.lo) / (model.hi - model.lo)))
    if model.sigma == 0.0:
        return 1.0 if t >= model.mean else 0.0
    return 0.5 * (1.0 + math.erf((t - model.mean) / (model.sigma * math.sqrt(2.0))))
