import math

import numpy as np
import pytest

from wavebreak.profile import BurgersProfile, Cutoff, chi_bar_bridge


@pytest.mark.parametrize("k", [1, 2, 3])
def test_implicit_relation(k):
    prof = BurgersProfile(k)
    y = np.linspace(-50.0, 50.0, 777)
    u = prof(y)
    assert np.max(np.abs(y + u + prof.h1 * u ** (2 * k + 1))) < 1e-10 * (
        1.0 + np.max(np.abs(y))
    )


@pytest.mark.parametrize("k", [1, 2])
def test_profile_shape(k):
    prof = BurgersProfile(k)
    y = np.linspace(-10.0, 10.0, 401)
    u = prof(y)
    assert np.allclose(u, -prof(-y), atol=1e-12)
    assert np.all(prof.deriv(y, 1) < 0.0)
    assert prof.residual(y) < 1e-9


def test_profile_rejects_bad_k():
    with pytest.raises(ValueError):
        BurgersProfile(0)


def test_chi_bar_slope_bound():
    cut = Cutoff(BurgersProfile(1))
    assert cut.chi_bar_slope_min() >= -0.25
    y = np.linspace(-12.0, 12.0, 1001)
    cb = cut.chi_bar(y)
    assert np.all(cb[np.abs(y) <= 1.0] == 1.0)
    assert np.all(cb[np.abs(y) >= 8.0] == 0.0)


def test_chi_bar_bridge_endpoints():
    t = np.array([-0.5, 0.0, 1.0, 1.5])
    v = chi_bar_bridge(t)
    assert v[0] == 0.0 and v[1] == 0.0
    assert v[2] == 1.0 and v[3] == 1.0


def test_transported_cutoff():
    cut = Cutoff(BurgersProfile(1))
    y = np.linspace(-40.0, 40.0, 801)
    assert np.allclose(cut.chi(0.0, y), cut.chi_bar(y), atol=1e-14)
    s = 0.8
    lo, hi = cut._transition_edges(s)
    assert hi > lo > cut.inner
    assert cut.chi(s, 0.5 * lo) == 1.0
    assert cut.chi(s, -(hi + 1.0)) == 0.0
    mid = cut.chi(s, 0.5 * (lo + hi))
    assert 0.0 < mid < 1.0


def test_flow_inversion():
    cut = Cutoff(BurgersProfile(1))
    y0 = np.array([1.5, 4.0, -7.0])
    s = 0.6
    fwd = cut.flow_forward(y0, s)
    back = cut.flow_backward(fwd, s)
    assert np.max(np.abs(back - y0)) < 1e-7


def test_support_constant():
    cut = Cutoff(BurgersProfile(1))
    b = cut.profile.b
    for s in (0.5, 2.0):
        C = cut.support_constant(s)
        edge = C * math.exp(b * s)
        assert cut.chi(s, edge) == 0.0
        assert cut.chi(s, -edge) == 0.0
