import math

import numpy as np
import pytest

from wavebreak.grid import Grid
from wavebreak.initial_data import (
    AnsatzBuilder,
    DataConstraintError,
    DataParams,
    DomainTooSmallError,
    W0,
    build_physical_data,
    build_selfsim_data,
    calibrated_W0,
    make_W0,
    signed_data,
)


def test_dataparams_validation():
    with pytest.raises(ValueError):
        DataParams(k=1, tau0=-0.1)
    with pytest.raises(ValueError):
        DataParams(k=2, tau0=0.1, w0=(0.1,))     # needs 2 entries for k = 2
    with pytest.raises(DataConstraintError):
        DataParams(k=2, tau0=0.05, w0=(0.9, 0.0)).validate()


def test_perturbation_flatness_and_cap():
    k, tau0 = 1, 0.05
    pert = calibrated_W0("bump_odd_order", 1.0, k, tau0)
    p = DataParams(k=k, tau0=tau0, perturbation=pert).validate()
    for j in range(2 * k + 1):
        assert abs(float(pert.deriv(np.array(0.0), j))) < 1e-12
    big = make_W0("bump_odd_order", 1e6 * pert.amplitude, 1.0, k)
    with pytest.raises(DataConstraintError):
        DataParams(k=k, tau0=tau0, perturbation=big).validate()
    assert p.sigma0 == pytest.approx(-math.log(tau0))


def test_w0_shapes():
    with pytest.raises(ValueError):
        make_W0("unknown_shape", 1.0, 1.0, 1)
    packet = make_W0("mode_packet", 0.5, 1.2, 1, carrier=3.0)
    y = np.array([0.7])
    expect = 0.5 * y**3 * np.exp(-((y / 1.2) ** 2)) * np.cos(3.0 * y)
    assert abs(packet(y)[0] - expect[0]) < 1e-12
    assert packet.l2_norm() > 0.0


def test_physical_data_map():
    p = DataParams(k=1, tau0=0.2, xi0=0.4, kappa0=0.3)
    g = Grid(2**14, 16.0)
    u0 = build_physical_data(p, g)
    # the data map pins u(xi0) = kappa0 and u'(xi0) = -1/tau0
    assert abs(u0.sample(p.xi0) - p.kappa0) < 1e-8
    slope = u0.sample_deriv(p.xi0, 1)
    assert abs(slope + 1.0 / p.tau0) / (1.0 / p.tau0) < 1e-6


def test_selfsim_vs_physical_consistency():
    p = DataParams(k=1, tau0=0.2)
    b = p.b
    gs = Grid(2**12, 100.0)
    U = build_selfsim_data(p, gs)
    gp = Grid(2**14, 16.0)
    u = build_physical_data(p, gp)
    lam = p.tau0**b
    y = np.linspace(-3.0, 3.0, 41)
    mapped = p.tau0 ** (1.0 - b) * u.sample(p.xi0 + lam * y)
    assert np.max(np.abs(mapped - U.sample(y))) < 1e-6


def test_domain_too_small():
    p = DataParams(k=1, tau0=0.05)
    with pytest.raises(DomainTooSmallError):
        build_physical_data(p, Grid(1024, 3.0))
    with pytest.raises(DomainTooSmallError):
        build_selfsim_data(p, Grid(1024, 30.0))


def test_signed_data():
    p = DataParams(k=1, tau0=0.05,
                   perturbation=calibrated_W0("bump_odd_order", 1.0, 1, 0.05))
    g = Grid(2**15, 24.0)
    for sign in (+1, -1):
        ps = signed_data(p, sign, g)
        u0 = build_physical_data(ps, g)
        if sign > 0:
            assert float(np.min(u0.values)) >= 0.0
            assert ps.kappa0 > 0.0
        else:
            assert float(np.max(u0.values)) <= 0.0
            assert ps.kappa0 < 0.0
    with pytest.raises(ValueError):
        signed_data(p, 2, g)


def test_support_radius_scaling():
    ab = AnsatzBuilder(1)
    r1 = ab.support_radius(0.0)
    r2 = ab.support_radius(1.0)
    assert r1 == pytest.approx(8.0)
    # the support grows at least like the frame stretching e^(b s)
    assert r2 > r1 * math.exp(1.0)
