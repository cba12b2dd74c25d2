import math

import numpy as np
import pytest

from fubif import _kernels
from fubif.errors import ConfigError, DataError, DimensionMismatchError
from fubif.splitting import (
    Family,
    SplitFamilyDescriptor,
    SplitInstance,
    compute_range,
    evaluate,
    evaluate_batch,
    gradient,
    gradient_batch,
    pack,
    param_layout,
    sample_params,
    unpack,
)
from helpers import ALL_FAMILIES, HAVE_NUMBA, desc, family_dim, finite_diff, grad_rel_error


def test_compute_range_examples():
    r = compute_range([[1.0, 2.0]])
    assert r.lower.tolist() == [1.0, 2.0] and r.upper.tolist() == [1.0, 2.0]
    r = compute_range([[0.0, 0.0], [3.0, -1.0]])
    assert r.lower.tolist() == [0.0, -1.0] and r.upper.tolist() == [3.0, 0.0]
    pts = np.random.default_rng(0).random((100, 2))
    r = compute_range(pts)
    assert np.all(r.lower >= 0) and np.all(r.upper <= 1)


def test_compute_range_empty():
    with pytest.raises(DataError, match="empty node set"):
        compute_range(np.zeros((0, 3)))


@pytest.mark.parametrize("text,fam,lam", [
    ("EIF", Family.EIF, 1.0), ("eif", Family.EIF, 1.0), ("Quad(100)", Family.QUAD, 100.0),
    ("quad", Family.QUAD, 1.0), ("Sine", Family.SINE, 1.0), ("ellipse", Family.ELLIPSE, 1.0),
])
def test_descriptor_parse(text, fam, lam):
    d = SplitFamilyDescriptor.parse(text)
    assert d.family_id is fam and d.quad_lambda == lam


@pytest.mark.parametrize("bad", ["Foo", "EIF(2)", "Quad(x)", "", "Quad(-1)"])
def test_descriptor_parse_rejects(bad):
    with pytest.raises(ConfigError):
        SplitFamilyDescriptor.parse(bad)


def test_nn_widths_validation():
    assert SplitFamilyDescriptor.parse("NN").widths(3) == (8, 8)
    assert SplitFamilyDescriptor.parse("NN").widths(12) == (12, 12)
    assert SplitFamilyDescriptor.parse("NN", nn_hidden_widths=[4]).widths(3) == (4,)
    with pytest.raises(ConfigError):
        SplitFamilyDescriptor(Family.NN, nn_hidden_widths=())
    with pytest.raises(ConfigError):
        SplitFamilyDescriptor(Family.NN, nn_hidden_widths=(3, 0))


def test_sine_requires_two_dims():
    with pytest.raises(DimensionMismatchError):
        desc("Sine").check_dim(3)
    with pytest.raises(DimensionMismatchError):
        sample_params(desc("Sine"), np.zeros((4, 3)), np.random.default_rng(0))


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_pack_unpack_roundtrip(name, rng):
    d = family_dim(name, 4)
    ds = desc(name)
    p = sample_params(ds, rng.standard_normal((10, d)), rng)
    assert p.shape == (ds.param_len(d),)
    fields = unpack(ds, p, d)
    assert [k for k, _ in param_layout(ds, d)] == list(fields)
    assert np.array_equal(pack(ds, d, **fields), p)


# -- evaluate / gradient examples --------------------------------------------

def test_evaluate_examples():
    assert evaluate(SplitInstance.make("HIF", 2, c=[0, 0]), [3, 4]) == 25.0
    assert evaluate(SplitInstance.make("Ellipse", 2, c1=[0, 0], c2=[2, 0]), [1, 0]) == 2.0
    assert evaluate(SplitInstance.make("Hyper", 2, c1=[0, 0], c2=[2, 0]), [1, 0]) == 0.0
    assert evaluate(SplitInstance.make("Quad", 2, A=np.eye(2), v=[0, 0]), [1, 1]) == 4.0
    assert evaluate(SplitInstance.make("IF", 3, feature=2), [1, 2, 3]) == 3.0
    assert evaluate(SplitInstance.make("EIF", 2, v=[0.6, 0.8]), [1, 1]) == pytest.approx(1.4)
    assert evaluate(SplitInstance.make("Para", 2, c=[0, 0], v=[1, 0]), [3, 4]) == pytest.approx(8.0)
    assert evaluate(SplitInstance.make("Sine", 2), [math.pi / 2, 3]) == pytest.approx(2.0)


def test_gradient_examples():
    assert gradient(SplitInstance.make("HIF", 2, c=[0, 0]), [3, 4]).tolist() == [6.0, 8.0]
    g = gradient(SplitInstance.make("Ellipse", 2, c1=[0, 0], c2=[2, 0]), [1, 1])
    assert g == pytest.approx([0.0, math.sqrt(2)], abs=1e-15)
    assert gradient(SplitInstance.make("IF", 4, feature=1), np.zeros(4)).tolist() == [0, 1, 0, 0]
    assert gradient(SplitInstance.make("Sine", 2), [0.0, 5.0]).tolist() == [-1.0, 1.0]
    A = np.array([[1.0, 2.0], [0.0, 3.0]])
    g = gradient(SplitInstance.make("Quad", 2, A=A, v=[1, -1]), [1.0, 2.0])
    assert g.tolist() == (2 * (A + A.T) @ [1.0, 2.0] + [1, -1]).tolist()


def test_radial_singularity_is_zero_contribution():
    inst = SplitInstance.make("Ellipse", 2, c1=[1, 1], c2=[3, 1])
    assert gradient(inst, [1.0, 1.0]).tolist() == [-1.0, 0.0]
    inst = SplitInstance.make("Para", 2, c=[0, 0], v=[0.6, 0.8])
    assert gradient(inst, [0.0, 0.0]).tolist() == [0.6, 0.8]


def test_degenerate_foci():
    x = np.random.default_rng(1).standard_normal((20, 3))
    c = np.array([0.5, -0.2, 0.1])
    e = SplitInstance.make("Ellipse", 3, c1=c, c2=c)
    h = SplitInstance.make("Hyper", 3, c1=c, c2=c)
    assert np.allclose(evaluate_batch(e.descriptor, e.params, x), 2 * np.linalg.norm(x - c, axis=1))
    assert np.all(evaluate_batch(h.descriptor, h.params, x) == 0.0)


def test_dimension_mismatch():
    inst = SplitInstance.make("HIF", 2, c=[0, 0])
    with pytest.raises(DimensionMismatchError):
        evaluate(inst, [1, 2, 3])
    with pytest.raises(DimensionMismatchError):
        gradient(inst, [1])
    with pytest.raises(DimensionMismatchError):
        SplitInstance(desc("EIF"), 3, np.zeros(2))


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_gradient_matches_finite_differences(name, rng):
    ds = desc(name)
    worst = 0.0
    for _ in range(100):
        d = family_dim(name, int(rng.integers(1, 6)))
        p = sample_params(ds, rng.standard_normal((8, d)), rng)
        x = 2.0 * rng.standard_normal(d)
        g = gradient_batch(ds, p, x[None, :])[0]
        fd = finite_diff(ds, p, x, 1e-6 * (1 + np.linalg.norm(x)))
        worst = max(worst, grad_rel_error(g, fd))
    assert worst < 1e-4


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_evaluate_is_batch_independent(name, rng):
    d = family_dim(name, 5)
    ds = desc(name)
    p = sample_params(ds, rng.standard_normal((8, d)), rng)
    X = rng.standard_normal((30, d))
    full = evaluate_batch(ds, p, X)
    single = np.array([evaluate_batch(ds, p, X[i:i + 1])[0] for i in range(30)])
    assert np.array_equal(full, single)
    assert np.array_equal(full, evaluate_batch(ds, p, X))


# -- sampling ------------------------------------------------------------------

def test_if_feature_uniform():
    rng = np.random.default_rng(7)
    Y = np.zeros((2, 6))
    counts = np.bincount([int(sample_params(desc("IF"), Y, rng)[0]) for _ in range(100_000)], minlength=6)
    assert np.all(np.abs(counts / 100_000 - 1 / 6) < 0.02)


def test_eif_sphere_statistics():
    rng = np.random.default_rng(8)
    Y = np.zeros((2, 3))
    V = np.array([sample_params(desc("EIF"), Y, rng) for _ in range(100_000)])
    assert np.all(np.abs(np.linalg.norm(V, axis=1) - 1) < 1e-9)
    assert np.all(np.abs(V.mean(axis=0)) < 0.02)


@pytest.mark.parametrize("name", ["HIF", "Ellipse", "Hyper", "Para"])
def test_centers_inside_range(name, rng):
    ds = desc(name)
    Y = np.column_stack([rng.random(20), 2 + rng.random(20)])
    box = compute_range(Y)
    for _ in range(500):
        fields = unpack(ds, sample_params(ds, Y, rng), 2)
        for key in ("c", "c1", "c2"):
            if key in fields:
                assert box.contains(fields[key])
        if "v" in fields:
            assert abs(np.linalg.norm(fields["v"]) - 1) < 1e-9


def test_quad_lambda_scales_linear_term(rng):
    Y = np.zeros((3, 4))
    for lam in (0.0, 1.0, 100.0):
        ds = SplitFamilyDescriptor(Family.QUAD, lam)
        vs = np.array([unpack(ds, sample_params(ds, Y, rng), 4)["v"] for _ in range(2000)])
        if lam == 0.0:
            assert np.all(vs == 0.0)
        else:
            assert np.all(np.abs(vs) <= lam) and np.abs(vs).max() > 0.9 * lam


def test_nn_parameter_distributions(rng):
    ds = desc("NN")
    fields = unpack(ds, sample_params(ds, np.zeros((2, 3)), rng), 3)
    assert fields["W0"].shape == (8, 3) and fields["W2"].shape == (1, 8)
    for k in range(3):
        assert np.all(np.abs(fields[f"b{k}"]) <= 1.0)


def test_sampling_is_seed_deterministic():
    Y = np.random.default_rng(0).standard_normal((10, 3))
    for name in ["IF", "EIF", "HIF", "Ellipse", "Hyper", "Para", "Quad", "NN"]:
        a = sample_params(desc(name), Y, np.random.default_rng(5))
        b = sample_params(desc(name), Y, np.random.default_rng(5))
        assert np.array_equal(a, b)


def test_empty_node_rejected():
    with pytest.raises(DataError):
        sample_params(desc("EIF"), np.zeros((0, 2)), np.random.default_rng(0))


# -- numba parity --------------------------------------------------------------

@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_numba_kernels_match_numpy(name, rng):
    d = family_dim(name, 4)
    ds = desc(name)
    widths = np.array(ds.widths(d), dtype=np.int64)
    for _ in range(20):
        Y = rng.standard_normal((6, d))
        box = compute_range(Y)
        seed = int(rng.integers(1 << 32))
        p = sample_params(ds, Y, np.random.default_rng(seed))
        q = _kernels.sample_one(ds.family_id.code, d, box.lower, box.upper, float(ds.quad_lambda),
                                widths, ds.param_len(d), np.random.default_rng(seed))
        assert np.array_equal(p, q)
        X = rng.standard_normal((25, d))
        pk = np.zeros(max(p.size, 1))
        pk[:p.size] = p
        assert np.allclose(_kernels.evaluate_rows(ds.family_id.code, pk, X, widths),
                           evaluate_batch(ds, p, X), rtol=1e-13, atol=1e-13)
        assert np.allclose(_kernels.gradient_rows(ds.family_id.code, pk, X, widths),
                           gradient_batch(ds, p, X), rtol=1e-12, atol=1e-13)
