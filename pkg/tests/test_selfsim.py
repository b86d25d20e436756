import math

import numpy as np
import pytest

from wavebreak.grid import Field, Grid
from wavebreak.initial_data import DataParams
from wavebreak.profile import BurgersProfile
from wavebreak.selfsim import (
    ModulationState,
    SelfSimEvolution,
    SelfSimParams,
    initial_state,
    merge_records,
    reanchor_frame,
    run_selfsim,
    shoot_unstable,
)
from wavebreak.symbols import LinearSymbol


def make_evolution(sym=None, k=1, tau0=0.05, n=2048, L=36.0, **kw):
    par = SelfSimParams(k=k, sigma0=-math.log(tau0), **kw)
    ev = SelfSimEvolution(Grid(n, L), sym or LinearSymbol.burgers(), par)
    return par, ev


def test_parameter_guards():
    with pytest.raises(ValueError):
        SelfSimParams(k=0, sigma0=1.0)
    with pytest.raises(ValueError):
        SelfSimParams(k=1, sigma0=1.0, gamma=0.0)
    # gamma must stay below the neutral decay exponent mu0
    with pytest.raises(ValueError):
        make_evolution(gamma=0.6)
    with pytest.raises(ValueError):
        SelfSimEvolution(Grid(1024, 36.0, center=1.0), LinearSymbol.burgers(),
                         SelfSimParams(k=1, sigma0=3.0))
    with pytest.raises(ValueError):
        make_evolution(taper_fraction=0.2, sponge_fraction=0.3)


def test_window_geometry():
    par, ev = make_evolution()
    L = ev.grid.half_length
    inner = (1.0 - par.taper_fraction) * L
    edge = (1.0 - par.sponge_fraction) * L
    y = ev.y
    assert np.all(ev.taper[np.abs(y) <= inner] == 1.0)
    assert np.all(ev.taper[np.abs(y) >= edge] == 0.0)
    assert np.all(ev.sponge[np.abs(y) <= edge] == 0.0)
    assert np.all(ev.sponge[np.abs(y) >= L - 1e-9] >= 0.99 * par.sponge_strength)
    assert np.all(ev.interior == (np.abs(y) <= inner))


def test_profile_data_is_stationary():
    """100 steps at the stable step leave the core of the profile fixed."""
    par, ev = make_evolution()
    pd = DataParams(k=1, tau0=0.05)
    U = ev.initial_field(pd)
    st = initial_state(pd, par)
    core = np.abs(ev.y) <= 1.0
    u0 = U.values.copy()
    tau0 = st.tau
    for _ in range(100):
        ds = ev.stable_ds(U.values, st.s, 0.0, 0.0)
        U, st = ev.step(U, st, ds)
    assert np.max(np.abs(U.values[core] - u0[core])) < 1e-6
    assert abs(st.tau - tau0) < 1e-6


def test_modulation_rates_vanish_on_profile():
    par, ev = make_evolution()
    pd = DataParams(k=1, tau0=0.05)
    U = ev.initial_field(pd)
    st = initial_state(pd, par)
    P, Q, R = ev.solve_modulation(U, st)
    assert abs(P) < 1e-6
    assert abs(Q) < 1e-6
    assert abs(R) < 1e-6
    w = ev.taylor_at_origin(U)
    assert abs(w[0]) < 1e-8 and abs(w[1]) < 1e-8


def test_monitors_on_profile_data():
    par, ev = make_evolution()
    pd = DataParams(k=1, tau0=0.05)
    U = ev.initial_field(pd)
    st = initial_state(pd, par)
    ev.solve_modulation(U, st)
    rep = ev.monitors(U, st)
    names = [e.name for e in rep.entries]
    assert names[:7] == ["B1", "B2", "B3", "B4", "B5", "B6", "B7"]
    assert rep["B1"].ok and rep["B2"].ok and rep["B6"].ok and rep["B7"].ok
    with pytest.raises(KeyError):
        rep["missing"]


def test_run_records_cadence():
    par, ev = make_evolution(record_ds=0.05)
    pd = DataParams(k=1, tau0=0.05)
    U = ev.initial_field(pd)
    st = initial_state(pd, par)
    s_end = par.sigma0 + 0.3
    rec, _, st = run_selfsim(U, st, LinearSymbol.burgers(), par, s_end,
                             evolution=ev, track_sigmas=(1.0,))
    assert rec.stop_reason == "s_end"
    assert st.s == pytest.approx(s_end, abs=1e-9)
    assert 5 <= len(rec.s) <= 9
    assert len(rec.holder[1.0]) == len(rec.s)
    assert np.all(np.diff(rec.s) > 0)


def test_reanchor_algebra():
    """Re-anchoring on a steeper scaled profile recovers the exact profile."""
    par, ev = make_evolution(n=4096)
    b = ev.b
    prof = BurgersProfile(1)
    mm, y0, c = 2.0, 0.5, 0.3
    # tapered like an evolved state, so the box-periodic sampling is clean
    vals = ev.taper * (mm ** (1.0 - b) * prof(mm**b * (ev.y - y0)) + c)
    U = Field(ev.grid, vals)
    st = ModulationState(s=par.sigma0, tau=0.05, xi=0.1, kappa=0.0)
    U2, st2 = reanchor_frame(ev, U, st)
    trel = math.exp(-par.sigma0)
    assert st2.s == pytest.approx(par.sigma0 + math.log(mm), abs=1e-6)
    assert st2.kappa == pytest.approx(trel ** (b - 1.0) * c, rel=1e-5)
    assert st2.xi == pytest.approx(0.1 + trel**b * y0, rel=1e-5)
    assert st2.tau == pytest.approx((st.tau - trel) + trel / mm, rel=1e-6)
    yy = np.linspace(-4.0, 4.0, 81)
    assert np.max(np.abs(U2.sample(yy) - prof(yy))) < 1e-3


def test_reanchor_requires_steeper_slope():
    par, ev = make_evolution()
    U = ev.initial_field(DataParams(k=1, tau0=0.05))
    from wavebreak.selfsim import ModulationDegeneracyError

    with pytest.raises(ModulationDegeneracyError):
        reanchor_frame(ev, U, ModulationState(s=par.sigma0, tau=0.05))


def test_merge_records():
    from wavebreak.selfsim import SelfSimRecord

    a = SelfSimRecord()
    a.s = [1.0, 2.0]
    a.grad = [0.5, 0.6]
    a.holder[1.0] = [1.0, 1.1]
    b = SelfSimRecord(stop_reason="s_end")
    b.s = [2.5]
    b.grad = [0.7]
    b.holder[1.0] = [1.2]
    b.trapped_until = 2.5
    merged = merge_records([a, b])
    assert merged.s == [1.0, 2.0, 2.5]
    assert merged.grad == [0.5, 0.6, 0.7]
    assert merged.holder[1.0] == [1.0, 1.1, 1.2]
    assert merged.stop_reason == "s_end"
    assert merged.trapped_until == 2.5


def test_shoot_empty_for_k1():
    res = shoot_unstable(lambda w: 0.0, 1, 0.1, 3.0)
    assert res.w0_best == ()
    assert res.trapped_until == float("inf")
    assert res.evaluations == 0


def test_shoot_budget_and_recentering():
    calls = []

    def fake_run(w0):
        calls.append(w0)
        # exit horizon peaks at a planted optimum
        target = np.array([0.02, -0.01])
        return 5.0 - float(np.linalg.norm(np.array(w0) - target))

    res = shoot_unstable(fake_run, 2, 0.1, 3.0, budget=40)
    assert res.evaluations <= 40
    assert len(calls) == res.evaluations
    assert res.boundary_horizons
    best = np.array(res.w0_best)
    assert np.linalg.norm(best - np.array([0.02, -0.01])) < 0.2
