import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from dirmax.bump import KINDS, chi, normalizer, phi, sample_bump


@pytest.mark.parametrize("kind", KINDS)
def test_phi_normalized_even_supported(kind):
    total, _ = quad(lambda t: float(phi(t, kind)), -1, 1, epsabs=1e-13)
    assert abs(total - 1) < 1e-10
    t = np.linspace(-1.5, 1.5, 301)
    vals = phi(t, kind)
    assert np.all(vals >= 0)
    assert np.allclose(vals, vals[::-1], atol=0)
    assert np.all(vals[np.abs(t) >= 1] == 0)


def test_normalizer_value_frozen():
    # 1 / int exp(1/(t^2-1)) dt, adaptive quadrature
    assert abs(normalizer("exp") - 2.2522836210435813) < 1e-12


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("k", range(0, 10))
def test_sample_bump_definition(kind, k):
    sl = sample_bump(kind, k)
    assert len(sl.n) == 2 ** (k + 1) + 1
    assert sl.weights[2 ** k] == pytest.approx(2.0 ** -k * float(phi(0.0, kind)), rel=1e-15)
    assert np.array_equal(sl.weights, sl.weights[::-1])


def test_bump_mass_converges():
    # |sum_n phi_k(n) - 1| <= C 2^-k with a fitted C <= 10
    C = max(abs(sample_bump("exp", k).mass - 1) * 2 ** k for k in range(0, 13))
    assert C <= 10


def test_bump_negative_scale():
    with pytest.raises(ValueError):
        sample_bump("exp", -1)
    with pytest.raises(ValueError):
        phi(0.0, "box")


@given(st.floats(-10, 10), st.floats(0.1, 3))
def test_chi_sandwich(x, c):
    v = float(chi(x, c))
    assert (1.0 if abs(x) <= c else 0.0) <= v <= (1.0 if abs(x) <= 2 * c else 0.0) + 0.0


def test_chi_smooth_monotone():
    x = np.linspace(0, 3, 3001)
    v = chi(x)
    assert np.all(np.diff(v) <= 0)
    assert v[0] == 1 and v[-1] == 0
