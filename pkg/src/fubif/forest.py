"""Function-based isolation trees and forests.

A tree is stored as flat arrays in preorder (children always have larger
indices than their parent). Leaves have ``left == right == -1`` and a NaN
threshold. Each tree keeps the training points it was grown on because
the explainer re-routes them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _backend
from . import _numpy_kernels as npk
from .errors import ConfigError, DataError, DimensionMismatchError
from .splitting import Family, SplitFamilyDescriptor, SplitInstance
from .threshold import DEFAULT_ETA, ThresholdKind

EULER_GAMMA = 0.5772156649
_EXACT_HARMONIC_LIMIT = 10_000


def _kernels():
    from . import _kernels
    return _kernels


@lru_cache(maxsize=None)
def _harmonic_table() -> np.ndarray:
    h = np.zeros(_EXACT_HARMONIC_LIMIT + 1)
    acc = 0.0
    for k in range(1, _EXACT_HARMONIC_LIMIT + 1):
        acc += 1.0 / k
        h[k] = acc
    return h


def harmonic(m: int) -> float:
    if m <= _EXACT_HARMONIC_LIMIT:
        return float(_harmonic_table()[m])
    return math.log(m) + EULER_GAMMA


def c_factor(n: int) -> float:
    """Average path length of an unsuccessful BST search among ``n`` points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


def c_table(n_max: int) -> np.ndarray:
    return np.array([c_factor(k) for k in range(n_max + 1)])


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    subsample_size: int = 256
    max_depth: int | str = "auto"
    family: SplitFamilyDescriptor = field(default_factory=SplitFamilyDescriptor)
    threshold_kind: ThresholdKind = ThresholdKind.NORMAL
    eta: float = DEFAULT_ETA
    seed: int = 0
    max_resample_attempts: int = 8

    def __post_init__(self):
        if isinstance(self.family, str):
            object.__setattr__(self, "family", SplitFamilyDescriptor.parse(self.family))
        object.__setattr__(self, "threshold_kind", ThresholdKind.parse(self.threshold_kind))
        if int(self.n_trees) < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if int(self.subsample_size) < 2:
            raise ConfigError(f"subsample_size must be >= 2, got {self.subsample_size}")
        if self.max_depth != "auto" and (not isinstance(self.max_depth, (int, np.integer)) or self.max_depth < 1):
            raise ConfigError(f"max_depth must be a positive integer or 'auto', got {self.max_depth!r}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if int(self.max_resample_attempts) < 1:
            raise ConfigError("max_resample_attempts must be >= 1")

    def depth_limit(self, n_points: int) -> int:
        if self.max_depth == "auto":
            return max(1, math.ceil(math.log2(max(n_points, 2))))
        return int(self.max_depth)

    def replace(self, **changes) -> "ForestConfig":
        from dataclasses import replace
        return replace(self, **changes)


def tree_seed(master_seed: int, index: int) -> int:
    """Per-tree seed mixed from the master seed and the tree index."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFF_FFFF_FFFF_FFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _node_depths(left, right) -> np.ndarray:
    depth = np.zeros(left.shape[0], dtype=np.int64)
    for k in range(left.shape[0]):
        if left[k] >= 0:
            depth[left[k]] = depth[k] + 1
            depth[right[k]] = depth[k] + 1
    return depth


@dataclass(eq=False)
class Tree:
    family: SplitFamilyDescriptor
    n_features: int
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    threshold: np.ndarray
    params: np.ndarray
    train: np.ndarray
    seed: int | None = None
    depth: np.ndarray = field(init=False, repr=False)
    _tables: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.left = np.ascontiguousarray(self.left, dtype=np.int64)
        self.right = np.ascontiguousarray(self.right, dtype=np.int64)
        self.size = np.ascontiguousarray(self.size, dtype=np.int64)
        self.threshold = np.ascontiguousarray(self.threshold, dtype=np.float64)
        self.params = np.ascontiguousarray(np.atleast_2d(self.params), dtype=np.float64)
        self.train = np.ascontiguousarray(self.train, dtype=np.float64).reshape(-1, self.n_features)
        self.depth = _node_depths(self.left, self.right)
        self.widths = np.array(self.family.widths(self.n_features), dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return int(self.left.shape[0])

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def split(self, node: int) -> SplitInstance:
        if self.is_leaf(node):
            raise ValueError(f"node {node} is a leaf")
        n_params = self.family.param_len(self.n_features)
        return SplitInstance(self.family, self.n_features, self.params[node, :n_params],
                             float(self.threshold[node]))

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def max_depth(self) -> int:
        return int(self.depth[self.leaves()].max())

    def audit(self) -> None:
        """Raise if any internal node's size differs from its children's sum."""
        internal = np.flatnonzero(self.left >= 0)
        bad = self.size[internal] != self.size[self.left[internal]] + self.size[self.right[internal]]
        if np.any(bad):
            raise AssertionError(f"size conservation violated at nodes {internal[bad].tolist()}")

    def path_lengths(self, X, table_c: np.ndarray, backend: str | None = None) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if _backend.resolve(backend) == _backend.NUMBA:
            return _kernels().path_lengths(self.left, self.right, self.size, self.threshold, self.params,
                                           self.family.family_id.code, self.widths, table_c, X)
        return npk.path_lengths(self.left, self.right, self.size, self.threshold, self.params,
                                self.family, table_c, X, self.depth)

    def influence_tables(self, backend: str | None = None):
        backend = _backend.resolve(backend)
        if backend not in self._tables:
            if backend == _backend.NUMBA:
                tab = _kernels().influence_table(self.left, self.right, self.threshold, self.params,
                                                 self.family.family_id.code, self.widths, self.train)
            else:
                tab = npk.influence_table(self.left, self.right, self.threshold, self.params,
                                          self.family, self.train)
            for arr in tab:
                arr.setflags(write=False)
            self._tables[backend] = tab
        return self._tables[backend]

    def importance(self, X, backend: str | None = None) -> np.ndarray:
        backend = _backend.resolve(backend)
        X = np.ascontiguousarray(X, dtype=np.float64)
        table, counts = self.influence_tables(backend)
        if backend == _backend.NUMBA:
            return _kernels().tree_importance(self.left, self.right, self.size, self.threshold, self.params,
                                              self.family.family_id.code, self.widths, table, counts, X)
        return npk.tree_importance(self.left, self.right, self.size, self.threshold, self.params,
                                   self.family, table, counts, X)


@dataclass(eq=False)
class Forest:
    trees: list[Tree]
    config: ForestConfig
    n_features: int
    subsample_size: int

    def __post_init__(self):
        self._c_table = c_table(self.subsample_size)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"data has {X.shape[-1]} features, model was fit on {self.n_features}")
        return np.ascontiguousarray(X)

    def path_length_matrix(self, X, backend: str | None = None) -> np.ndarray:
        """Path lengths with shape ``(n_points, n_trees)``."""
        X = self._check(X)
        return np.stack([t.path_lengths(X, self._c_table, backend) for t in self.trees], axis=1)

    def mean_path_length(self, X, backend: str | None = None) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.path_lengths(X, self._c_table, backend)
        return total / len(self.trees)

    def score_samples(self, X, backend: str | None = None) -> np.ndarray:
        """Anomaly scores in (0, 1); higher is more anomalous."""
        return score_from_path_length(self.mean_path_length(X, backend), self.subsample_size)


def score_from_path_length(mean_path, n: int):
    return np.power(2.0, -np.asarray(mean_path, dtype=np.float64) / c_factor(n))


def _grow(Xs, config: ForestConfig, rng, max_depth: int, backend: str, seed=None) -> Tree:
    d = Xs.shape[1]
    desc = config.family
    if backend == _backend.NUMBA:
        widths = np.array(desc.widths(d), dtype=np.int64)
        arrays = _kernels().build_tree(
            Xs, desc.family_id.code, widths, float(desc.quad_lambda), desc.needs_range,
            desc.param_len(d), config.threshold_kind.code, float(config.eta), int(max_depth),
            int(config.max_resample_attempts), rng)
    else:
        arrays = npk.build_tree(Xs, desc, config.threshold_kind, float(config.eta), int(max_depth),
                                int(config.max_resample_attempts), rng)
    return Tree(desc, d, *arrays, train=Xs, seed=seed)


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("expected a nonempty 2-d point array")
    if not np.all(np.isfinite(X)):
        raise DataError("data contains non-finite values")
    return np.ascontiguousarray(X)


def build_tree(Y, config: ForestConfig, seed: int, backend: str | None = None) -> Tree:
    """Grow one tree on all of ``Y`` with its own seeded stream."""
    Y = _as_points(Y)
    config.family.check_dim(Y.shape[1])
    rng = np.random.default_rng(seed)
    return _grow(Y, config, rng, config.depth_limit(Y.shape[0]), _backend.resolve(backend), seed)


def fit(X, config: ForestConfig | None = None, backend: str | None = None) -> Forest:
    config = config or ForestConfig()
    X = _as_points(X)
    n, d = X.shape
    if n < 2:
        raise DataError("dataset too small")
    config.family.check_dim(d)
    backend = _backend.resolve(backend)
    psi = min(int(config.subsample_size), n)
    max_depth = config.depth_limit(psi)
    trees = []
    for t in range(int(config.n_trees)):
        seed = tree_seed(config.seed, t)
        rng = np.random.default_rng(seed)
        sub = rng.choice(n, size=psi, replace=False)
        trees.append(_grow(np.ascontiguousarray(X[sub]), config, rng, max_depth, backend, seed))
    return Forest(trees, config, d, psi)


def path_length(tree: Tree, x, backend: str | None = None) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n_features,):
        raise DimensionMismatchError(f"point has shape {x.shape}, tree expects ({tree.n_features},)")
    table = c_table(int(tree.size[0]))
    return float(tree.path_lengths(x[None, :], table, backend)[0])


def anomaly_score(forest: Forest, x, backend: str | None = None) -> float:
    return float(forest.score_samples(np.asarray(x, dtype=np.float64)[None, :], backend)[0])


__all__ = [
    "Family", "Forest", "ForestConfig", "Tree", "anomaly_score", "build_tree", "c_factor",
    "c_table", "fit", "path_length", "score_from_path_length", "tree_seed",
]
