"""Shared fixtures; the heavy self-similar runs are session-scoped."""

import math

import numpy as np
import pytest

from wavebreak.diagnostics import final_window_rates
from wavebreak.grid import Grid
from wavebreak.initial_data import DataParams, calibrated_W0
from wavebreak.selfsim import (
    ModulationState,
    SelfSimEvolution,
    SelfSimParams,
    staged_selfsim,
)
from wavebreak.symbols import LinearSymbol

SIGMAS = (1.0 / 3.0, 2.0 / 3.0, 1.0)
K1_TAU0 = 0.05

K1_EQUATIONS = {
    "whitham": LinearSymbol.whitham(),
    "fkdv": LinearSymbol.fkdv(0.5),
    "fburgers": LinearSymbol.fburgers(0.5),
    "bh": LinearSymbol.fkdv(0.0),
}


def staged_rate_run(sym, kappa0=0.0, s_span=5.2):
    """One k=1 blow-up run in the self-similar frame with rate tracking."""
    tau0 = K1_TAU0
    s0 = -math.log(tau0)
    par = SelfSimParams(k=1, sigma0=s0)
    g = Grid(2048, 36.0)
    ev = SelfSimEvolution(g, sym, par)
    pd = DataParams(
        k=1, tau0=tau0, kappa0=kappa0,
        perturbation=calibrated_W0("bump_odd_order", 1.0, 1, tau0),
    )
    U0 = ev.initial_field(pd)
    st0 = ModulationState(s=s0, tau=tau0, kappa=kappa0)
    rec, stages, _, st = staged_selfsim(
        U0, st0, sym, par, s_end=s0 + s_span,
        track_sigmas=SIGMAS, evolution=ev,
    )
    return rec, par, st


def windowed_report(rec, par):
    return final_window_rates(
        rec.physical_times(), rec.physical_grad(),
        holders={s: rec.physical_holder(s, par.b) for s in SIGMAS},
        bounded_sigmas=(SIGMAS[0],),
    )


@pytest.fixture(scope="session")
def k1_rate_records():
    """Self-similar blow-up runs for the four k=1 equations."""
    out = {}
    for name, sym in K1_EQUATIONS.items():
        rec, par, st = staged_rate_run(sym)
        out[name] = (rec, par, windowed_report(rec, par))
    return out


@pytest.fixture(scope="session")
def k2_evolution():
    """Shared k=2 Burgers self-similar machinery (planting and shooting)."""
    tau0 = K1_TAU0
    s0 = -math.log(tau0)
    par = SelfSimParams(k=2, sigma0=s0)
    g = Grid(2048, 24.0)
    ev = SelfSimEvolution(g, LinearSymbol.burgers(), par)
    return par, ev


def k2_planted_run(par, ev, w0, s_span, stop_on_trap_exit=False,
                   with_monitors=False):
    from wavebreak.selfsim import run_selfsim

    pd = DataParams(k=2, tau0=K1_TAU0, w0=tuple(w0))
    U0 = ev.initial_field(pd)
    st0 = ModulationState(s=par.sigma0, tau=K1_TAU0, w=tuple(w0))
    return run_selfsim(
        U0, st0, LinearSymbol.burgers(), par, s_end=par.sigma0 + s_span,
        stop_on_trap_exit=stop_on_trap_exit, evolution=ev,
        with_monitors=with_monitors or stop_on_trap_exit,
    )
