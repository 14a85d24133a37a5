import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special as sp
from scipy import stats

from dpalab.special import gamma_cdf, gamma_sf, log_nb_pmf, nb_pmf


def test_gamma_cdf_exponential_case():
    x = np.linspace(0, 30, 301)
    assert np.allclose(gamma_cdf(1.0, x), -np.expm1(-x), rtol=1e-12, atol=1e-300)


def test_gamma_cdf_erlang_value():
    assert gamma_cdf(2.0, 2.0) == pytest.approx(1 - 3 * math.exp(-2), rel=1e-13)
    assert gamma_cdf(2.0, 2.0) == pytest.approx(0.59399415, abs=1e-8)


def test_gamma_cdf_boundaries():
    assert gamma_cdf(0.7, 0.0) == 0.0
    assert gamma_cdf(3.0, 1e4) == 1.0
    assert gamma_cdf(3.0, np.inf) == 1.0


@pytest.mark.parametrize("shape", [0.05, 0.5, 1.0, 2.5, 10.0, 80.0, 400.0])
def test_gamma_cdf_relative_error(shape):
    x = np.geomspace(1e-3, 1, 200) * shape * 4
    ref = sp.gammainc(shape, x)
    keep = ref > 1e-280
    assert np.max(np.abs(gamma_cdf(shape, x)[keep] - ref[keep]) / ref[keep]) < 1e-10
    refq = sp.gammaincc(shape, x)
    keep = refq > 1e-280
    assert np.max(np.abs(gamma_sf(shape, x)[keep] - refq[keep]) / refq[keep]) < 1e-10


@pytest.mark.parametrize("shape", [0.6, 1.0, 3.3])
def test_gamma_cdf_matches_density(shape):
    # central differences of the cdf against the Gamma(shape, 1) density at 1000 points
    x = np.linspace(0.05, 12, 1000)
    h = 1e-5
    deriv = (gamma_cdf(shape, x + h) - gamma_cdf(shape, x - h)) / (2 * h)
    assert np.max(np.abs(deriv - stats.gamma.pdf(x, shape))) < 1e-6


@given(st.floats(0.01, 200), st.floats(0, 500), st.floats(0, 500))
def test_gamma_cdf_monotone(shape, x, y):
    lo, hi = sorted((x, y))
    assert gamma_cdf(shape, lo) <= gamma_cdf(shape, hi) + 1e-15


@pytest.mark.parametrize("shape,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
def test_gamma_cdf_domain(shape, x):
    with pytest.raises(ValueError):
        gamma_cdf(shape, x)


def test_nb_pmf_against_scipy():
    k = np.arange(0, 200)
    for a, p in [(0.3, 0.2), (2.0, 0.5), (7.5, 0.9), (1.0, 1e-3)]:
        assert np.allclose(nb_pmf(a, p, k), stats.nbinom.pmf(k, a, p), rtol=1e-10, atol=1e-300)


def test_nb_pmf_edge_cases():
    assert nb_pmf(2.0, 1.0, 0) == 1.0
    assert nb_pmf(2.0, 1.0, 3) == 0.0
    assert log_nb_pmf(2.0, 0.5, -1) == -np.inf
    with pytest.raises(ValueError):
        nb_pmf(0.0, 0.5, 1)
    with pytest.raises(ValueError):
        nb_pmf(1.0, 0.0, 1)
    with pytest.raises(ValueError):
        nb_pmf(1.0, 0.5, 1.5)


def test_nb_pmf_large_arguments_stay_finite():
    v = log_nb_pmf(3.0, 1e-5, np.array([1e5, 1e6]))
    assert np.all(np.isfinite(v))
