"""Splitting-function families.

Every family shares one contract: draw parameters from the node's points,
evaluate ``f(x)`` and its analytic gradient. Parameters of a sampled
function are stored as one flat float vector whose layout depends on the
family and the dimension (see :func:`param_layout`), so trees can keep all
node parameters in a single 2-d array that the numba kernels read directly.

The numpy evaluators below reduce along the last axis with broadcasting
instead of calling BLAS; this keeps each row's value independent of how
many rows are evaluated together, so routing a point alone or in a batch
gives bitwise-identical decisions.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DimensionMismatchError

# Below this distance the unit-vector term (x - c)/|x - c| is taken as zero.
RADIAL_EPS = 1e-12


class Family(str, enum.Enum):
    IF = "IF"
    EIF = "EIF"
    HIF = "HIF"
    ELLIPSE = "Ellipse"
    HYPER = "Hyper"
    PARA = "Para"
    QUAD = "Quad"
    NN = "NN"
    SINE = "Sine"

    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {f: i for i, f in enumerate(Family)}
FAMILIES = tuple(Family)

# Families whose parameters are drawn inside range(Y).
_RANGED = {Family.HIF, Family.ELLIPSE, Family.HYPER, Family.PARA}


@dataclass(frozen=True)
class SplitFamilyDescriptor:
    """A family from the framing table plus its sampling hyperparameters.

    ``nn_hidden_widths=None`` means the default two hidden layers of
    ``max(8, d)`` units each, resolved once the dimension is known.
    """

    family_id: Family = Family.EIF
    quad_lambda: float = 1.0
    nn_hidden_widths: tuple[int, ...] | None = None

    def __post_init__(self):
        try:
            fam = Family(self.family_id)
        except ValueError:
            raise ConfigError(f"unknown family {self.family_id!r}") from None
        object.__setattr__(self, "family_id", fam)
        if fam is Family.QUAD and not self.quad_lambda >= 0:
            raise ConfigError(f"quad_lambda must be >= 0, got {self.quad_lambda}")
        if self.nn_hidden_widths is not None:
            widths = tuple(int(w) for w in self.nn_hidden_widths)
            if fam is Family.NN and (not widths or min(widths) < 1):
                raise ConfigError("nn_hidden_widths must be a nonempty list of positive integers")
            object.__setattr__(self, "nn_hidden_widths", widths)

    @classmethod
    def parse(cls, name: str, quad_lambda: float | None = None,
              nn_hidden_widths=None) -> "SplitFamilyDescriptor":
        """Build a descriptor from a name such as ``"EIF"`` or ``"Quad(100)"``."""
        m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*", str(name))
        if not m:
            raise ConfigError(f"unknown family {name!r}")
        lookup = {f.value.lower(): f for f in Family}
        fam = lookup.get(m.group(1).lower())
        if fam is None:
            raise ConfigError(f"unknown family {name!r}")
        lam = 1.0 if quad_lambda is None else float(quad_lambda)
        if m.group(2) is not None:
            if fam is not Family.QUAD:
                raise ConfigError(f"family {fam.value} takes no argument")
            lam = float(m.group(2))
        return cls(fam, lam, None if nn_hidden_widths is None else tuple(nn_hidden_widths))

    @property
    def name(self) -> str:
        if self.family_id is Family.QUAD:
            return f"Quad({self.quad_lambda:g})"
        return self.family_id.value

    @property
    def needs_range(self) -> bool:
        return self.family_id in _RANGED

    def widths(self, d: int) -> tuple[int, ...]:
        if self.family_id is not Family.NN:
            return ()
        if self.nn_hidden_widths is not None:
            return self.nn_hidden_widths
        return (max(8, d), max(8, d))

    def check_dim(self, d: int) -> None:
        if d < 1:
            raise DimensionMismatchError("dimension must be >= 1")
        if self.family_id is Family.SINE and d != 2:
            raise DimensionMismatchError(f"Sine family requires d = 2, got d = {d}")

    def param_len(self, d: int) -> int:
        return sum(int(np.prod(shape)) for _, shape in param_layout(self, d))


def param_layout(desc: SplitFamilyDescriptor, d: int) -> list[tuple[str, tuple[int, ...]]]:
    """Names and shapes of the flat parameter vector, in storage order."""
    fam = desc.family_id
    if fam is Family.IF:
        return [("feature", ())]
    if fam is Family.EIF:
        return [("v", (d,))]
    if fam is Family.HIF:
        return [("c", (d,))]
    if fam in (Family.ELLIPSE, Family.HYPER):
        return [("c1", (d,)), ("c2", (d,))]
    if fam is Family.PARA:
        return [("c", (d,)), ("v", (d,))]
    if fam is Family.QUAD:
        return [("A", (d, d)), ("v", (d,))]
    if fam is Family.NN:
        dims = (d, *desc.widths(d), 1)
        out = []
        for layer in range(len(dims) - 1):
            out.append((f"W{layer}", (dims[layer + 1], dims[layer])))
            out.append((f"b{layer}", (dims[layer + 1],)))
        return out
    return []


def unpack(desc: SplitFamilyDescriptor, params: np.ndarray, d: int) -> dict[str, np.ndarray]:
    out, pos = {}, 0
    for name, shape in param_layout(desc, d):
        size = int(np.prod(shape))
        out[name] = params[pos:pos + size].reshape(shape)
        pos += size
    if "feature" in out:
        out["feature"] = int(out["feature"])
    return out


def pack(desc: SplitFamilyDescriptor, d: int, **fields) -> np.ndarray:
    parts = []
    for name, shape in param_layout(desc, d):
        if name not in fields:
            raise ConfigError(f"missing parameter {name!r} for family {desc.name}")
        arr = np.asarray(fields[name], dtype=np.float64)
        if arr.shape != shape:
            raise DimensionMismatchError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
        parts.append(arr.ravel())
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True)
class HyperRectangle:
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(self.lower <= x) and np.all(x <= self.upper))


def compute_range(Y) -> HyperRectangle:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise DataError("empty node set")
    return HyperRectangle(Y.min(axis=0), Y.max(axis=0))


@dataclass(frozen=True)
class SplitInstance:
    """A sampled splitting function with its threshold."""

    descriptor: SplitFamilyDescriptor
    n_features: int
    params: np.ndarray
    threshold: float = float("nan")
    fields: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        params = np.ascontiguousarray(self.params, dtype=np.float64)
        expected = self.descriptor.param_len(self.n_features)
        if params.shape != (expected,):
            raise DimensionMismatchError(
                f"{self.descriptor.name} in d={self.n_features} needs {expected} parameters, got {params.shape}")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "fields", unpack(self.descriptor, params, self.n_features))

    @classmethod
    def make(cls, descriptor, n_features: int, threshold: float = float("nan"), **fields):
        if not isinstance(descriptor, SplitFamilyDescriptor):
            descriptor = SplitFamilyDescriptor.parse(descriptor)
        return cls(descriptor, n_features, pack(descriptor, n_features, **fields), threshold)

    def with_threshold(self, threshold: float) -> "SplitInstance":
        return SplitInstance(self.descriptor, self.n_features, self.params, float(threshold))


# -- sampling ---------------------------------------------------------------

def _sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(d)
        norm = np.sqrt(np.sum(v * v))
        if norm > 0.0:
            return v / norm


def sample_params(desc: SplitFamilyDescriptor, Y, rng: np.random.Generator,
                  bounds: HyperRectangle | None = None) -> np.ndarray:
    """Draw one function's flat parameter vector.

    The draw order is mirrored exactly by the numba sampler; change both or
    neither.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise DataError("empty node set")
    d = Y.shape[1]
    desc.check_dim(d)
    fam = desc.family_id
    if desc.needs_range and bounds is None:
        bounds = compute_range(Y)

    def in_range():
        return bounds.lower + (bounds.upper - bounds.lower) * rng.random(d)

    if fam is Family.IF:
        return np.array([float(rng.integers(0, d))])
    if fam is Family.EIF:
        return _sphere(rng, d)
    if fam is Family.HIF:
        return in_range()
    if fam in (Family.ELLIPSE, Family.HYPER):
        c1 = in_range()
        return np.concatenate([c1, in_range()])
    if fam is Family.PARA:
        c = in_range()
        return np.concatenate([c, _sphere(rng, d)])
    if fam is Family.QUAD:
        lam = desc.quad_lambda
        A = rng.standard_normal(d * d)
        return np.concatenate([A, rng.uniform(-lam, lam, d)])
    if fam is Family.NN:
        dims = (d, *desc.widths(d), 1)
        parts = []
        for layer in range(len(dims) - 1):
            parts.append(rng.standard_normal(dims[layer + 1] * dims[layer]))
            parts.append(rng.uniform(-1.0, 1.0, dims[layer + 1]))
        return np.concatenate(parts)
    return np.zeros(0)


# -- batch evaluation -------------------------------------------------------

def _dist(X, c):
    diff = X - c
    return diff, np.sqrt(np.sum(diff * diff, axis=-1))


def _unit(diff, dist):
    safe = np.where(dist < RADIAL_EPS, 1.0, dist)
    return np.where((dist < RADIAL_EPS)[:, None], 0.0, diff / safe[:, None])


def _matvec(X, M):
    # X @ M.T computed row-wise without BLAS.
    return np.sum(X[:, None, :] * M[None, :, :], axis=-1)


def _nn_forward(layers, X):
    acts = [X]
    h = X
    for k, (W, b) in enumerate(layers):
        z = _matvec(h, W) + b
        h = z if k == len(layers) - 1 else np.tanh(z)
        acts.append(h)
    return acts


def _nn_layers(p):
    n_layers = sum(1 for k in p if k.startswith("W"))
    return [(p[f"W{k}"], p[f"b{k}"]) for k in range(n_layers)]


def evaluate_batch(desc: SplitFamilyDescriptor, params: np.ndarray, X) -> np.ndarray:
    """Values of ``f`` on every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    d = X.shape[1]
    p = unpack(desc, np.asarray(params, dtype=np.float64), d)
    fam = desc.family_id
    if fam is Family.IF:
        return X[:, p["feature"]].copy()
    if fam is Family.EIF:
        return np.sum(X * p["v"], axis=-1)
    if fam is Family.HIF:
        diff = X - p["c"]
        return np.sum(diff * diff, axis=-1)
    if fam is Family.ELLIPSE:
        return _dist(X, p["c1"])[1] + _dist(X, p["c2"])[1]
    if fam is Family.HYPER:
        return _dist(X, p["c1"])[1] - _dist(X, p["c2"])[1]
    if fam is Family.PARA:
        return _dist(X, p["c"])[1] + np.sum(X * p["v"], axis=-1)
    if fam is Family.QUAD:
        S = p["A"] + p["A"].T
        return np.sum(_matvec(X, S) * X, axis=-1) + np.sum(X * p["v"], axis=-1)
    if fam is Family.NN:
        return _nn_forward(_nn_layers(p), X)[-1][:, 0]
    return X[:, 1] - np.sin(X[:, 0])


def gradient_batch(desc: SplitFamilyDescriptor, params: np.ndarray, X) -> np.ndarray:
    """Analytic input gradients of ``f``, one row per point."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    p = unpack(desc, np.asarray(params, dtype=np.float64), d)
    fam = desc.family_id
    if fam is Family.IF:
        g = np.zeros((n, d))
        g[:, p["feature"]] = 1.0
        return g
    if fam is Family.EIF:
        return np.broadcast_to(p["v"], (n, d)).copy()
    if fam is Family.HIF:
        return 2.0 * (X - p["c"])
    if fam is Family.ELLIPSE:
        return _unit(*_dist(X, p["c1"])) + _unit(*_dist(X, p["c2"]))
    if fam is Family.HYPER:
        return _unit(*_dist(X, p["c1"])) - _unit(*_dist(X, p["c2"]))
    if fam is Family.PARA:
        return _unit(*_dist(X, p["c"])) + p["v"]
    if fam is Family.QUAD:
        S = p["A"] + p["A"].T
        return 2.0 * _matvec(X, S) + p["v"]
    if fam is Family.NN:
        # Reverse-mode pass: seed with d(out)/d(out) = 1 and walk layers back.
        layers = _nn_layers(p)
        acts = _nn_forward(layers, X)
        g = np.ones((n, 1))
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            if k < len(layers) - 1:
                g = g * (1.0 - acts[k + 1] ** 2)
            g = np.sum(g[:, :, None] * W[None, :, :], axis=1)
        return g
    g = np.empty((n, 2))
    g[:, 0] = -np.cos(X[:, 0])
    g[:, 1] = 1.0
    return g


def _check_point(inst: SplitInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n_features,):
        raise DimensionMismatchError(f"point has shape {x.shape}, model expects ({inst.n_features},)")
    return x


def evaluate(inst: SplitInstance, x) -> float:
    x = _check_point(inst, x)
    return float(evaluate_batch(inst.descriptor, inst.params, x[None, :])[0])


def gradient(inst: SplitInstance, x) -> np.ndarray:
    x = _check_point(inst, x)
    return gradient_batch(inst.descriptor, inst.params, x[None, :])[0]
