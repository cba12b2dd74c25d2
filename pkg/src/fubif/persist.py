"""FUBIF1: a line-oriented text format for fitted forests.

Layout (one record per line, fields separated by single spaces)::

    FUBIF1
    config {json}                  forest settings, keys as in ForestConfig
    forest <d> <psi> <n_trees> <n_params>
    tree <index> <seed> <n_nodes> <n_train>
    node <family_id> <left> <right> <size> <threshold> <p_1> ... <p_n_params>
    ...                            n_nodes node lines in preorder
    train <x_1> ... <x_d>
    ...                            n_train rows of the tree's subsample
    end

Floats are written with ``repr`` so they parse back to the same bits;
leaf thresholds are ``nan``. ``family_id`` is the family's declaration
index. The training rows are kept because explanations re-route them.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .data import _atomic_write
from .errors import DataError
from .forest import Forest, ForestConfig, Tree
from .splitting import Family, SplitFamilyDescriptor
from .threshold import ThresholdKind

MAGIC = "FUBIF1"


def config_to_dict(config: ForestConfig) -> dict:
    fam = config.family
    return {
        "family": fam.family_id.value,
        "quad_lambda": float(fam.quad_lambda),
        "nn_hidden_widths": None if fam.nn_hidden_widths is None else list(fam.nn_hidden_widths),
        "threshold_kind": config.threshold_kind.value,
        "eta": float(config.eta),
        "n_trees": int(config.n_trees),
        "subsample_size": int(config.subsample_size),
        "max_depth": config.max_depth if config.max_depth == "auto" else int(config.max_depth),
        "seed": int(config.seed),
        "max_resample_attempts": int(config.max_resample_attempts),
    }


def config_from_dict(d: dict) -> ForestConfig:
    fam = SplitFamilyDescriptor(Family(d["family"]), float(d["quad_lambda"]),
                                None if d["nn_hidden_widths"] is None else tuple(d["nn_hidden_widths"]))
    return ForestConfig(
        n_trees=int(d["n_trees"]), subsample_size=int(d["subsample_size"]),
        max_depth=d["max_depth"], family=fam, threshold_kind=ThresholdKind(d["threshold_kind"]),
        eta=float(d["eta"]), seed=int(d["seed"]),
        max_resample_attempts=int(d["max_resample_attempts"]))


def _f(v: float) -> str:
    return repr(float(v))


def dumps_lines(forest: Forest):
    """Yield the lines of the FUBIF1 encoding of ``forest``."""
    n_params = max(t.params.shape[1] for t in forest.trees)
    yield MAGIC
    yield "config " + json.dumps(config_to_dict(forest.config), sort_keys=True)
    yield f"forest {forest.n_features} {forest.subsample_size} {len(forest.trees)} {n_params}"
    for index, tree in enumerate(forest.trees):
        seed = -1 if tree.seed is None else tree.seed
        yield f"tree {index} {seed} {tree.n_nodes} {tree.train.shape[0]}"
        code = tree.family.family_id.code
        for k in range(tree.n_nodes):
            p = np.zeros(n_params)
            p[:tree.params.shape[1]] = tree.params[k]
            fields = [str(code), str(tree.left[k]), str(tree.right[k]), str(tree.size[k]),
                      _f(tree.threshold[k])]
            yield "node " + " ".join(fields + [_f(v) for v in p])
        for row in tree.train:
            yield "train " + " ".join(_f(v) for v in row)
    yield "end"


def save_forest(forest: Forest, path) -> None:
    def write(fh):
        for line in dumps_lines(forest):
            fh.write(line + "\n")
    _atomic_write(path, write)


class _Reader:
    def __init__(self, lines, source):
        self.lines = lines
        self.pos = 0
        self.source = source

    def fail(self, msg):
        raise DataError(f"{self.source}: line {self.pos}: {msg}")

    def next(self, tag: str, n_fields: int | None = None) -> list[str]:
        if self.pos >= len(self.lines):
            raise DataError(f"{self.source}: unexpected end of file, expected {tag!r}")
        parts = self.lines[self.pos].rstrip("\n").split(" ")
        self.pos += 1
        if parts[0] != tag:
            self.fail(f"expected {tag!r} record, found {parts[0]!r}")
        if n_fields is not None and len(parts) - 1 != n_fields:
            self.fail(f"{tag!r} record has {len(parts) - 1} fields, expected {n_fields}")
        return parts[1:]

    def ints(self, fields):
        try:
            return [int(v) for v in fields]
        except ValueError:
            self.fail("malformed integer field")

    def floats(self, fields):
        try:
            return [float(v) for v in fields]
        except ValueError:
            self.fail("malformed float field")


def loads(text: str, source: str = "<string>") -> Forest:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise DataError(f"{source}: not a {MAGIC} model file")
    r = _Reader(lines, source)
    r.pos = 1
    if r.pos >= len(lines) or not lines[r.pos].startswith("config "):
        r.pos += 1
        r.fail("expected 'config' record")
    try:
        config = config_from_dict(json.loads(lines[r.pos][len("config "):]))
    except (KeyError, TypeError, ValueError) as exc:
        r.pos += 1
        r.fail(f"bad config record: {exc}")
    r.pos += 1
    d, psi, n_trees, n_params = r.ints(r.next("forest", 4))
    desc = config.family
    own = max(desc.param_len(d), 1)
    if n_params < own:
        r.fail(f"{n_params} parameter slots, family {desc.name} needs {own}")
    trees = []
    for t in range(n_trees):
        index, seed, n_nodes, n_train = r.ints(r.next("tree", 4))
        if index != t:
            r.fail(f"tree index {index}, expected {t}")
        left = np.empty(n_nodes, dtype=np.int64)
        right = np.empty(n_nodes, dtype=np.int64)
        size = np.empty(n_nodes, dtype=np.int64)
        thr = np.empty(n_nodes)
        params = np.empty((n_nodes, own))
        for k in range(n_nodes):
            fields = r.next("node", 5 + n_params)
            code, left[k], right[k], size[k] = r.ints(fields[:4])
            if code != desc.family_id.code:
                r.fail(f"node family id {code} does not match config family {desc.name}")
            values = r.floats(fields[4:])
            thr[k] = values[0]
            params[k] = values[1:1 + own]
        train = np.empty((n_train, d))
        for i in range(n_train):
            train[i] = r.floats(r.next("train", d))
        _check_tree(r, left, right, size, thr)
        trees.append(Tree(desc, d, left, right, size, thr, params, train,
                          seed=None if seed < 0 else seed))
    r.next("end", 0)
    if len(trees) != config.n_trees:
        raise DataError(f"{source}: {len(trees)} trees stored, config says {config.n_trees}")
    return Forest(trees, config, d, psi)


def _check_tree(r: _Reader, left, right, size, thr) -> None:
    m = left.shape[0]
    if m == 0:
        r.fail("tree has no nodes")
    for k in range(m):
        if (left[k] < 0) != (right[k] < 0):
            r.fail(f"node {k} has exactly one child")
        if left[k] >= 0:
            if not (k < left[k] < m and k < right[k] < m):
                r.fail(f"node {k} has out-of-order children")
            if size[k] != size[left[k]] + size[right[k]]:
                r.fail(f"node {k} size is not the sum of its children")
            if math.isnan(thr[k]):
                r.fail(f"internal node {k} has no threshold")


def load_forest(path) -> Forest:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    return loads(text, str(path))


def dumps(forest: Forest) -> str:
    return "\n".join(dumps_lines(forest)) + "\n"
