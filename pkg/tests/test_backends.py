import os
import subprocess
import sys

import numpy as np
import pytest

from fubif import _backend
from fubif.forest import ForestConfig, fit
from fubif.importance import global_importance, local_importance_matrix
from helpers import ALL_FAMILIES, HAVE_NUMBA, family_dim

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("name", ALL_FAMILIES)
@pytest.mark.parametrize("kind", ["uniform", "normal"])
def test_backends_agree(name, kind):
    d = family_dim(name, 4)
    rng = np.random.default_rng(11)
    X = rng.standard_normal((200, d))
    Q = np.vstack([X[:50], 3 * rng.standard_normal((30, d))])
    cfg = ForestConfig(family=name, threshold_kind=kind, n_trees=8, seed=21)
    a, b = fit(X, cfg, _backend.NUMBA), fit(X, cfg, _backend.NUMPY)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.left, tb.left) and np.array_equal(ta.size, tb.size)
        assert np.allclose(ta.threshold, tb.threshold, rtol=1e-12, atol=1e-12, equal_nan=True)
    # score each forest with the other backend too
    sa = a.score_samples(Q, _backend.NUMPY)
    assert np.allclose(sa, a.score_samples(Q, _backend.NUMBA), rtol=0, atol=1e-12)
    assert np.allclose(sa, b.score_samples(Q, _backend.NUMPY), rtol=0, atol=1e-12)
    la = local_importance_matrix(a, Q[:20], _backend.NUMBA)
    lb = local_importance_matrix(a, Q[:20], _backend.NUMPY)
    assert np.allclose(la, lb, rtol=0, atol=1e-12)


def test_if_uniform_is_bitwise_identical():
    X = np.random.default_rng(3).standard_normal((300, 5))
    cfg = ForestConfig(family="IF", threshold_kind="uniform", n_trees=10, seed=2)
    a, b = fit(X, cfg, _backend.NUMBA), fit(X, cfg, _backend.NUMPY)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.threshold, tb.threshold, equal_nan=True)
        assert np.array_equal(ta.params, tb.params)
    assert np.array_equal(a.score_samples(X, _backend.NUMBA), b.score_samples(X, _backend.NUMPY))


def test_global_importance_agrees():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.standard_normal((150, 3)), rng.standard_normal((15, 3)) + [5, 0, 0]])
    y = np.r_[np.zeros(150), np.ones(15)]
    f = fit(X, ForestConfig(n_trees=10))
    assert np.allclose(global_importance(f, X, y, backend=_backend.NUMBA),
                       global_importance(f, X, y, backend=_backend.NUMPY), rtol=1e-12, atol=0)


def test_resolve():
    assert _backend.resolve("numpy") == "numpy"
    with pytest.raises(ValueError):
        _backend.resolve("cuda")


@pytest.mark.parametrize("value,expected", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba")])
def test_env_flag_selects_default(value, expected):
    env = dict(os.environ, FUBIF_DISABLE_NUMBA=value)
    out = subprocess.run([sys.executable, "-c", "from fubif._backend import default_backend; print(default_backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
