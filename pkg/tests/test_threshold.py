import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from fubif.errors import ConfigError, DataError
from fubif.threshold import ThresholdKind, ThresholdModel, cdf, fit_threshold_model, sample_threshold

U, N = ThresholdKind.UNIFORM, ThresholdKind.NORMAL


def test_fit_examples():
    m = fit_threshold_model([5, 5, 5], U)
    assert (m.lo, m.hi) == (5.0, 5.0) and m.degenerate
    m = fit_threshold_model([0, 10], U)
    assert (m.lo, m.hi) == (0.0, 10.0) and not m.degenerate
    m = fit_threshold_model([-1, 1], N, eta=2)
    assert (m.mean, m.sigma) == (0.0, 2.0)


def test_single_value_normal_is_degenerate():
    assert fit_threshold_model([3.0], N).degenerate


def test_fit_errors():
    with pytest.raises(DataError, match="no sample values"):
        fit_threshold_model([], U)
    with pytest.raises(ConfigError):
        fit_threshold_model([1, 2], N, eta=0)
    with pytest.raises(ConfigError):
        ThresholdKind.parse("gamma")


def test_kind_aliases():
    assert ThresholdKind.parse("Normal") is N
    assert ThresholdKind.parse("unif") is U
    assert ThresholdKind.parse(U) is U


def test_sample_examples():
    rng = np.random.default_rng(3)
    assert all(sample_threshold(ThresholdModel(U, 5.0, 5.0), rng) == 5.0 for _ in range(100))
    draws = np.array([sample_threshold(ThresholdModel(U, 0.0, 10.0), rng) for _ in range(100_000)])
    assert abs(draws.mean() - 5.0) < 0.1
    assert draws.min() >= 0.0 and draws.max() <= 10.0
    draws = np.array([sample_threshold(ThresholdModel(N, mean=0.0, sigma=2.0), rng) for _ in range(100_000)])
    assert abs(draws.std() - 2.0) < 0.1
    assert abs(np.mean(draws < 0.0) - 0.5) < 0.01


def test_cdf_examples():
    assert cdf(ThresholdModel(U, 0.0, 10.0), 5.0) == 0.5
    assert cdf(ThresholdModel(U, 0.0, 10.0), -3.0) == 0.0
    assert cdf(ThresholdModel(U, 0.0, 10.0), 30.0) == 1.0
    assert cdf(ThresholdModel(U, 4.0, 4.0), 100.0) == 0.5
    assert cdf(ThresholdModel(N, mean=0.0, sigma=1.0), 0.0) == 0.5
    assert cdf(ThresholdModel(N, mean=1.0, sigma=0.0), 0.5) == 0.0
    assert cdf(ThresholdModel(N, mean=1.0, sigma=0.0), 1.0) == 1.0


def test_normal_cdf_accuracy():
    # Phi at a few standard quantiles
    m = ThresholdModel(N, mean=0.0, sigma=1.0)
    for z, p in [(1.0, 0.8413447460685429), (-1.959963984540054, 0.025), (3.0, 0.9986501019683699)]:
        assert abs(cdf(m, z) - p) < 1e-7


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20))
def test_cdf_monotone_and_limits(mean, sigma, ts):
    for m in (ThresholdModel(N, mean=mean, sigma=sigma), ThresholdModel(U, mean, mean + sigma)):
        vals = [cdf(m, t) for t in sorted(ts)]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert cdf(m, -1e12) == 0.0 and cdf(m, 1e12) == 1.0


def test_pdf_integrates_to_one():
    for m in (ThresholdModel(N, mean=1.0, sigma=0.5), ThresholdModel(U, -1.0, 3.0)):
        ts = np.linspace(-5, 7, 200_001)
        assert math.isclose(trapezoid([m.pdf(t) for t in ts], ts), 1.0, rel_tol=1e-3)
