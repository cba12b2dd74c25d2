"""Flat run configuration shared by the command-line tools.

A run config is a JSON object with the keys of :class:`RunConfig`. Keys
not listed there are rejected, and every value is checked before any
work starts. Command-line flags override values read from a file.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from .data import Scenario
from .errors import ConfigError
from .forest import ForestConfig
from .splitting import SplitFamilyDescriptor
from .threshold import DEFAULT_ETA, ThresholdKind


@dataclass(frozen=True)
class RunConfig:
    family: str = "EIF"
    quad_lambda: float = 1.0
    nn_hidden_widths: tuple[int, ...] | None = None
    threshold_kind: str = "normal"
    eta: float = DEFAULT_ETA
    n_trees: int = 100
    subsample: int = 256
    max_depth: int | str = "auto"
    seed: int = 0
    # None lets each command pick: fit/score use I, benchmark uses II
    scenario: str | None = None
    contamination: float | None = None
    runs: int = 10

    def __post_init__(self):
        _require(isinstance(self.runs, int) and not isinstance(self.runs, bool) and self.runs >= 1,
                 f"runs must be a positive integer, got {self.runs!r}")
        _require(isinstance(self.seed, int) and not isinstance(self.seed, bool),
                 f"seed must be an integer, got {self.seed!r}")
        if self.contamination is not None:
            _require(_is_number(self.contamination) and 0.0 < self.contamination < 1.0,
                     f"contamination must lie in (0, 1), got {self.contamination!r}")
        if self.scenario is not None:
            object.__setattr__(self, "scenario", Scenario.parse(self.scenario).value)
        if self.nn_hidden_widths is not None:
            widths = self.nn_hidden_widths
            _require(isinstance(widths, (list, tuple)) and widths
                     and all(isinstance(w, int) and not isinstance(w, bool) and w >= 1 for w in widths),
                     f"nn_hidden_widths must be a list of positive integers, got {widths!r}")
            object.__setattr__(self, "nn_hidden_widths", tuple(widths))
        for name in ("n_trees", "subsample"):
            v = getattr(self, name)
            _require(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer, got {v!r}")
        _require(_is_number(self.eta), f"eta must be a number, got {self.eta!r}")
        _require(_is_number(self.quad_lambda), f"quad_lambda must be a number, got {self.quad_lambda!r}")
        # builds and discards a ForestConfig so family/threshold/depth errors surface now
        self.forest_config()

    def descriptor(self) -> SplitFamilyDescriptor:
        if not isinstance(self.family, str):
            raise ConfigError(f"family must be a string, got {self.family!r}")
        quad_lambda = None if "(" in self.family else self.quad_lambda
        return SplitFamilyDescriptor.parse(self.family, quad_lambda, self.nn_hidden_widths)

    def forest_config(self) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees, subsample_size=self.subsample, max_depth=self.max_depth,
            family=self.descriptor(), threshold_kind=ThresholdKind.parse(self.threshold_kind),
            eta=float(self.eta), seed=self.seed)

    def scenario_or(self, default: str) -> str:
        return self.scenario or default

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["nn_hidden_widths"] is not None:
            d["nn_hidden_widths"] = list(d["nn_hidden_widths"])
        return d


KEYS = tuple(f.name for f in fields(RunConfig))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def from_mapping(values: dict, base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return replace(base or RunConfig(), **values)


def load_config(path) -> dict:
    """Read a JSON config file into a plain dict (validated later)."""
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(values, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return values
