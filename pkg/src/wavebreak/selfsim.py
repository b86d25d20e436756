"""Self-similar frame evolution with modulation, monitors and shooting.

Evolves

  dU/ds + (b y - Q) dU/dy - (b-1) U + e^{(b-1)s} kappa_s
        + (1 + P) U dU/dy
  = (1 + P) (e^{-mu s} H(U) + e^{-s} L(U + e^{(b-1)s} kappa)),

with P = e^s tau_s and Q = e^{bs} xi_s - (1+P) e^{(b-1)s} kappa solved each
step from the vanishing of the Taylor coefficients w_0, w_1, w_{2k} of
W = U - profile at the origin.  The multiplier part is diagonal in Fourier
space and advanced by the exponential-integrator weights; for the Burgers
family it vanishes and the stage set reduces to classical RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from wavebreak.grid import Field, Grid
from wavebreak.profile import BurgersProfile, Cutoff
from wavebreak.symbols import FreqSplit, LinearSymbol, hl_symbols, mu_exponents, smooth_bridge


class ModulationDegeneracyError(RuntimeError):
    """The (2k)! + w_{2k+1} coefficient left its non-degeneracy range."""


class ConstraintOverflowError(RuntimeError):
    """The per-step orthogonality correction grew beyond validity."""


@dataclass(frozen=True)
class SelfSimParams:
    """Frame constants, monitor thresholds and discretization policy."""

    k: int
    sigma0: float
    gamma: float = 0.1
    y0: float = 0.1
    A: float = 10.0
    eps0: float = 1e-3
    ds_max: float = 0.02
    cfl: float = 0.5
    fit_radius: float = 0.5
    sponge_fraction: float = 0.3
    sponge_strength: float = 300.0
    taper_fraction: float = 0.45
    constraint_tol: float = 1e-7
    record_ds: float = 0.05

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 < self.gamma):
            raise ValueError("gamma must be positive")

    @property
    def b(self):
        return (2 * self.k + 1) / (2 * self.k)


@dataclass
class ModulationState:
    """Modulation parameters, their rates and the unstable coefficients."""

    s: float
    tau: float
    xi: float = 0.0
    kappa: float = 0.0
    tau_s: float = 0.0
    xi_s: float = 0.0
    kappa_s: float = 0.0
    w: tuple = ()
    w_top: float = 0.0

    def rescaled_rates(self, b):
        """(P, Q, R) = the exponentially weighted modulation rates."""
        P = math.exp(self.s) * self.tau_s
        amb = math.exp((b - 1.0) * self.s) * self.kappa
        Q = math.exp(b * self.s) * self.xi_s - (1.0 + P) * amb
        R = math.exp((b - 1.0) * self.s) * self.kappa_s
        return P, Q, R


@dataclass
class MonitorEntry:
    name: str
    ok: bool
    margin: float


@dataclass
class MonitorReport:
    entries: list

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def all_ok(self):
        return all(e.ok for e in self.entries)

    def failed(self):
        return [e.name for e in self.entries if not e.ok]


@dataclass
class SelfSimRecord:
    stop_reason: str = "running"
    s: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    kappa: list = field(default_factory=list)
    P: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    R: list = field(default_factory=list)
    w: list = field(default_factory=list)
    w_top: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    grad: list = field(default_factory=list)
    holder: dict = field(default_factory=dict)
    trapped_until: float = float("nan")

    def physical_times(self):
        """t(s) = tau(s) - e^{-s} along the run."""
        s = np.asarray(self.s, float)
        return np.asarray(self.tau, float) - np.exp(-s)

    def physical_grad(self):
        """sup |du/dx| over the resolved core: e^s times the frame value."""
        return np.exp(np.asarray(self.s, float)) * np.asarray(self.grad, float)

    def physical_holder(self, sigma, b):
        """[u]_{C^sigma} over the core via the exact change of variables."""
        s = np.asarray(self.s, float)
        scale = np.exp((b * sigma - b + 1.0) * s)
        return scale * np.asarray(self.holder[sigma], float)


class SelfSimEvolution:
    """Owns the grid-bound machinery of one self-similar evolution."""

    def __init__(self, grid: Grid, sym: LinearSymbol, params: SelfSimParams,
                 cutoff: Cutoff | None = None):
        if abs(grid.center) > 1e-12:
            raise ValueError("self-similar grid must be centered at y = 0")
        self.grid = grid
        self.sym = sym
        self.p = params
        self.profile = BurgersProfile(params.k)
        self.cutoff = cutoff or Cutoff(self.profile)
        self.split = FreqSplit()
        self.b, self.mu, self.mu0 = mu_exponents(sym, params.k)
        if not (params.gamma < self.mu0):
            raise ValueError(
                f"gamma = {params.gamma} must be below mu0 = {self.mu0}"
            )
        y = grid.x
        self.y = y
        self.i0 = grid.n // 2          # grid point sitting exactly at y = 0
        assert abs(y[self.i0]) < 1e-12
        self.profile_vals = self.profile(y)
        self.chi_bar_vals = self.cutoff.chi_bar(y)
        # narrow bump for the constraint projection: flat on |y| <= 1, gone
        # by |y| = 2, so the y^{2k} correction polynomial stays O(1) and
        # origin-fit noise is not amplified into the far field
        self.proj_bump = smooth_bridge(2.0 - np.abs(y))
        ik = 1j * grid.xi
        ik[grid.n // 2] = 0.0
        self._ik = ik
        self._mask = grid.dealias_mask()
        self._has_symbol = sym.has_dispersion or sym.has_dissipation
        L = grid.half_length
        edge = (1.0 - params.sponge_fraction) * L
        inner = (1.0 - params.taper_fraction) * L
        if inner >= edge:
            raise ValueError(
                "taper_fraction must exceed sponge_fraction so the taper "
                "finishes before the sponge zone begins"
            )
        ay = np.abs(y)
        self.interior_edge = inner
        self.interior = ay <= inner
        self.taper = smooth_bridge((edge - ay) / (edge - inner))
        self.sponge = params.sponge_strength * smooth_bridge(
            (ay - edge) / (L - edge)
        )
        self._fit_window(params.fit_radius)
        self._chi_cache_s = None
        self._chi_grid = None
        self._plateau_done = False

    def initial_field(self, p_data):
        """Truncated-ansatz data on this grid at s = sigma0.

        Same map as the untruncated data builder, with the box taper in
        place of the flowed cutoff: at sigma0 the cutoff plateau already
        covers any desk-scale box, so truncation is the only difference,
        and the sponge reference absorbs exactly that far field.
        """
        b = self.b
        amb = math.exp((b - 1.0) * p_data.sigma0) * p_data.kappa0
        chi = self._chi_on_grid(p_data.sigma0)
        if chi is None:
            chi = 1.0
        vals = self.taper * (chi * self.profile_vals + amb * (chi - 1.0))
        if p_data.w0:
            poly = np.zeros_like(self.y)
            for j, w in enumerate(p_data.w0, start=2):
                poly += w / math.factorial(j) * self.y**j
            vals = vals + self.chi_bar_vals * poly
        if p_data.perturbation is not None:
            vals = vals + p_data.perturbation(self.y)
        return Field(self.grid, vals)

    # -- local Taylor machinery -------------------------------------------
    def _fit_window(self, radius):
        deg = 2 * self.p.k + 3
        mask = np.abs(self.y) <= radius
        if mask.sum() < 4 * (deg + 1):
            raise ValueError(
                f"fit window radius {radius} holds {int(mask.sum())} points; "
                f"need at least {4 * (deg + 1)}"
            )
        self._fit_mask = mask
        z = self.y[mask] / radius
        van = np.vander(z, deg + 1, increasing=True)
        self._fit_pinv = np.linalg.pinv(van)
        self._fit_scale = np.array(
            [math.factorial(j) / radius**j for j in range(deg + 1)]
        )

    def taylor_at_origin(self, U: Field):
        """w_0 ... w_{2k+3}: Taylor data of U minus the profile at y = 0."""
        W = U.values[self._fit_mask] - self.profile_vals[self._fit_mask]
        return (self._fit_pinv @ W) * self._fit_scale

    # -- cutoff-referenced ambient field ----------------------------------
    def _chi_on_grid(self, s):
        if self._plateau_done:
            return None
        if self._chi_cache_s is None or s - self._chi_cache_s > 0.1:
            lo, _ = self.cutoff._transition_edges(s)
            if lo >= self.grid.half_length:
                self._plateau_done = True
                self._chi_grid = None
                return None
            self._chi_grid = self.cutoff.chi(s, self.y)
            self._chi_cache_s = s
        return self._chi_grid

    def reference_field(self, s, amb):
        """Sponge target: tapered cutoff profile with its ambient dip.

        While the data cutoff still varies inside the box the target keeps
        the matching chi-shaped deviation from the uniform background; once
        the cutoff plateau covers the box the background is exactly uniform
        there, rides in the kappa modulation, and the target reduces to the
        tapered profile.
        """
        chi = self._chi_on_grid(s)
        if chi is None:
            return self.taper * self.profile_vals
        return self.taper * (chi * self.profile_vals + amb * (chi - 1.0))

    # -- frequency-side pieces ---------------------------------------------
    def _hl(self, s):
        H, L = hl_symbols(self.sym, self.split, s, self.b, self.grid.xi)
        return H, L

    def multiplier_symbol(self, s, P):
        """Diagonal generator (1+P)(e^{-mu s} H + e^{-s} L) on grid.xi."""
        if not self._has_symbol:
            return None
        H, L = self._hl(s)
        return (1.0 + P) * (np.exp(-self.mu * s) * H + np.exp(-s) * L)

    def forcing_values(self, U: Field, s, amb):
        """F^{(j)}(s, 0) for j in {0, 1, 2k}, by spectral point sampling."""
        if not self._has_symbol:
            return {0: 0.0, 1: 0.0, 2 * self.p.k: 0.0}
        H, L = self._hl(s)
        hat = U.hat
        out = {}
        for j in (0, 1, 2 * self.p.k):
            dj = self._ik**j * hat
            hval = float(np.fft.ifft(H * dj).real[self.i0])
            lval = float(np.fft.ifft(L * dj).real[self.i0])
            if j == 0:
                lval += float(np.real(L[0])) * amb
            out[j] = math.exp(-self.mu * s) * hval + math.exp(-s) * lval
        return out

    # -- modulation ---------------------------------------------------------
    def solve_modulation(self, U: Field, st: ModulationState):
        """Update the rates in ``st`` from the orthogonality conditions."""
        k = self.p.k
        b = self.b
        s = st.s
        amb = math.exp((b - 1.0) * s) * st.kappa
        w = self.taylor_at_origin(U)
        w_top = float(w[2 * k + 1])
        fact = math.factorial(2 * k)
        if abs(fact + w_top) <= fact / 2.0:
            raise ModulationDegeneracyError(
                f"(2k)! + w_(2k+1) = {fact + w_top:.3e} degenerates at s = {s:.3f}"
            )
        F = self.forcing_values(U, s, amb)
        n2k = 0.0
        for i in range(2 * k + 1):
            n2k += math.comb(2 * k, i) * w[i] * w[2 * k - i + 1]
        n2k -= w[0] * w[2 * k + 1]
        w2 = float(w[2]) if k > 1 else 0.0
        A = np.array([
            [1.0 - F[1], -w2],
            [F[2 * k], fact + w_top],
        ])
        rhs = np.array([F[1], n2k - F[2 * k]])
        P, Q = np.linalg.solve(A, rhs)
        R = (1.0 + P) * F[0] - Q
        st.tau_s = math.exp(-s) * P
        st.xi_s = math.exp(-b * s) * (Q + (1.0 + P) * amb)
        st.kappa_s = math.exp(-(b - 1.0) * s) * R
        st.w = tuple(float(w[j]) for j in range(2, 2 * k))
        st.w_top = w_top
        return float(P), float(Q), float(R)

    # -- right-hand side ----------------------------------------------------
    def rhs(self, values, s, P, Q, R, amb, ref):
        """Explicit part of dU/ds (everything except the multiplier)."""
        hat = np.fft.fft(values)
        Uy = np.fft.ifft(self._ik * hat).real
        u_da = np.fft.ifft(hat * self._mask).real
        nonlin = np.fft.ifft(
            self._ik * (np.fft.fft(0.5 * u_da * u_da) * self._mask)
        ).real
        return (
            -(self.b * self.y - Q) * Uy
            + (self.b - 1.0) * values
            - R
            - (1.0 + P) * nonlin
            - self.sponge * (values - ref)
        )

    def _lin_const_term(self, s, P, amb):
        """Scalar forcing from L applied to the ambient constant."""
        if not self._has_symbol:
            return 0.0
        _, L = self._hl(s)
        return (1.0 + P) * math.exp(-s) * float(np.real(L[0])) * amb

    def max_speed(self, values, P, Q):
        return float(np.max(np.abs(
            self.b * self.y - Q + (1.0 + P) * values
        )))

    def stable_ds(self, values, s, P, Q):
        xi_lim = (2.0 / 3.0) * np.pi / self.grid.dx
        adv = 2.82 * self.p.cfl / (self.max_speed(values, P, Q) * xi_lim)
        ds = min(self.p.ds_max, adv, 2.0 / self.p.sponge_strength)
        if self._has_symbol:
            m = self.multiplier_symbol(s, P)
            top = float(np.max(np.abs(np.real(m)))) if m is not None else 0.0
            if top > 0:
                # only the dissipative real part limits the explicit stages
                ds = min(ds, 2.0 / top)
        return ds

    # -- one step -----------------------------------------------------------
    def step(self, U: Field, st: ModulationState, ds):
        """Advance (U, state) by ds with frozen modulation rates."""
        P, Q, R = self.solve_modulation(U, st)
        s = st.s
        b = self.b
        amb = math.exp((b - 1.0) * s) * st.kappa
        ref = self.reference_field(s, amb)
        const = self._lin_const_term(s, P, amb)
        mult = self.multiplier_symbol(s, P)
        v = U.values

        if mult is None:
            # classical RK4 on the fully explicit right-hand side
            f = lambda vals: self.rhs(vals, s, P, Q, R, amb, ref) + const
            k1 = f(v)
            k2 = f(v + 0.5 * ds * k1)
            k3 = f(v + 0.5 * ds * k2)
            k4 = f(v + ds * k3)
            new = v + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            new = self._etdrk4(v, ds, mult, s, P, Q, R, amb, ref, const)
        if not np.all(np.isfinite(new)):
            raise ConstraintOverflowError(f"field blew up at s = {s:.3f}")
        # project the state back onto the dealiased band: the linear drift
        # ramp b y is not periodic and seeds the aliased top third, which
        # otherwise accumulates and destabilizes the explicit stages
        new = np.fft.ifft(np.fft.fft(new) * self._mask).real

        st.s = s + ds
        st.tau += ds * st.tau_s
        st.xi += ds * st.xi_s
        st.kappa += ds * st.kappa_s
        out = Field(self.grid, new)
        out = self._project_constraints(out)
        return out, st

    def _etdrk4(self, v, ds, mult, s, P, Q, R, amb, ref, const):
        E = np.exp(ds * mult)
        E2 = np.exp(ds * mult / 2.0)
        M = 32
        r = np.exp(2j * np.pi * (np.arange(1, M + 1) - 0.5) / M)
        LR = ds * mult[:, None] + r[None, :]
        Qc = ds * np.real(np.mean((np.exp(LR / 2.0) - 1.0) / LR, axis=1))
        f1 = ds * np.real(np.mean(
            (-4.0 - LR + np.exp(LR) * (4.0 - 3.0 * LR + LR**2)) / LR**3, axis=1))
        f2 = ds * np.real(np.mean(
            (2.0 + LR + np.exp(LR) * (-2.0 + LR)) / LR**3, axis=1))
        f3 = ds * np.real(np.mean(
            (-4.0 - 3.0 * LR - LR**2 + np.exp(LR) * (4.0 - LR)) / LR**3, axis=1))

        def N(vals):
            return np.fft.fft(self.rhs(vals, s, P, Q, R, amb, ref) + const)

        vh = np.fft.fft(v)
        N1 = N(v)
        a = np.fft.ifft(E2 * vh + Qc * N1).real
        Na = N(a)
        bb = np.fft.ifft(E2 * vh + Qc * Na).real
        Nb = N(bb)
        c = np.fft.ifft(E2 * np.fft.fft(a) + Qc * (2.0 * Nb - N1)).real
        Nc = N(c)
        out = E * vh + N1 * f1 + 2.0 * (Na + Nb) * f2 + Nc * f3
        return np.fft.ifft(out).real

    def _project_constraints(self, U: Field):
        """Remove constraint drift in w_0, w_1, w_{2k} by a localized
        polynomial subtraction; exact on the Taylor data since the bump is
        flat at the origin."""
        k = self.p.k
        w = self.taylor_at_origin(U)
        off = np.array([w[0], w[1], w[2 * k]])
        if np.max(np.abs(off)) > 1.0:
            raise ConstraintOverflowError(
                f"orthogonality drift {np.max(np.abs(off)):.3e} signals loss "
                "of validity"
            )
        corr = (
            off[0]
            + off[1] * self.y
            + off[2] * self.y ** (2 * k) / math.factorial(2 * k)
        ) * self.proj_bump
        return Field(self.grid, U.values - corr)

    # -- monitors ------------------------------------------------------------
    def monitors(self, U: Field, st: ModulationState):
        from wavebreak.diagnostics import WeightedNormSpec, weighted_seminorm
        import warnings

        p = self.p
        k, b, s = p.k, self.b, st.s
        dy = self.grid.dx
        # all norms are taken on the interior window |y| <= interior_edge;
        # outside it the field is deliberately tapered and sponged, so the
        # bootstrap quantities would measure the truncation, not the state
        win = self.interior
        Uy = U.derivative().values
        gsup = float(np.max(np.abs(Uy[win])))
        outer = win & (np.abs(self.y) >= p.y0)
        gsup_out = float(np.max(np.abs(Uy[outer])))
        dtop = U.derivative(2 * k + 3).values
        l2top = float(np.sqrt(dy * np.sum(dtop[win] ** 2)))
        Lcut = min(math.exp(b * s), self.interior_edge)
        d1 = np.where(win, Uy, 0.0)
        dtw = np.where(win, dtop, 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            h1 = weighted_seminorm(
                U, WeightedNormSpec(1, max(Lcut, 1.001), k), deriv_values=d1
            )
            htop = weighted_seminorm(
                U, WeightedNormSpec(2 * k + 3, max(Lcut, 1.001), k),
                deriv_values=dtw,
            )
        P, Q, R = st.rescaled_rates(b)
        mod = abs(P) + abs(R) + abs(Q)
        env = math.exp(-p.gamma * s)
        entries = [
            MonitorEntry("B1", gsup <= 1.0 + 2.0 * p.y0, 1.0 + 2.0 * p.y0 - gsup),
            MonitorEntry(
                "B2",
                gsup_out <= 1.0 - p.y0 ** (2 * k) / 4.0,
                1.0 - p.y0 ** (2 * k) / 4.0 - gsup_out,
            ),
            MonitorEntry("B3", l2top <= 2.0 * p.A, 2.0 * p.A - l2top),
            MonitorEntry("B4", h1 <= 2.0 * p.A, 2.0 * p.A - h1),
            MonitorEntry("B5", htop <= 2.0 * p.A, 2.0 * p.A - htop),
            MonitorEntry("B6", mod <= p.A * env, p.A * env - mod),
            MonitorEntry("B7", abs(st.w_top) <= 1.0, 1.0 - abs(st.w_top)),
        ]
        if k > 1:
            wnorm = float(np.sqrt(sum(x * x for x in st.w)))
            entries.append(MonitorEntry("T", wnorm <= env, env - wnorm))
        return MonitorReport(entries)


def initial_state(p_data, params: SelfSimParams):
    """Modulation state matching the initial-data parameters at s = sigma0."""
    return ModulationState(
        s=params.sigma0, tau=p_data.tau0, xi=p_data.xi0, kappa=p_data.kappa0,
        w=tuple(p_data.w0), w_top=0.0,
    )


def run_selfsim(U0: Field, st0: ModulationState, sym: LinearSymbol,
                params: SelfSimParams, s_end, stop_on_trap_exit=False,
                evolution: SelfSimEvolution | None = None,
                with_monitors=True, track_sigmas=()):
    """Evolve to s_end, recording modulation and monitor series.

    ``track_sigmas`` lists Holder exponents whose frame seminorms are
    recorded (over the interior window) alongside sup |dU/dy|; they feed
    the physical-frame rate reconstructions on :class:`SelfSimRecord`.
    """
    from wavebreak.diagnostics import holder_seminorm_values

    ev = evolution or SelfSimEvolution(U0.grid, sym, params)
    rec = SelfSimRecord()
    for sig in track_sigmas:
        rec.holder[sig] = []
    U = U0
    st = st0
    next_rec = st.s
    while st.s < s_end - 1e-12:
        if st.s >= next_rec - 1e-12:
            try:
                P, Q, R = ev.solve_modulation(U, st)
            except ModulationDegeneracyError as err:
                rec.stop_reason = f"aborted: {err}"
                if math.isnan(rec.trapped_until):
                    rec.trapped_until = st.s
                return rec, U, st
            rec.s.append(st.s)
            rec.tau.append(st.tau)
            rec.xi.append(st.xi)
            rec.kappa.append(st.kappa)
            rec.P.append(P)
            rec.Q.append(Q)
            rec.R.append(R)
            rec.w.append(st.w)
            rec.w_top.append(st.w_top)
            win = ev.interior
            rec.grad.append(float(np.max(np.abs(U.derivative().values[win]))))
            for sig in track_sigmas:
                rec.holder[sig].append(
                    holder_seminorm_values(U.values[win], U.grid.dx, sig))
            if with_monitors:
                rep = ev.monitors(U, st)
                rec.margins.append({e.name: e.margin for e in rep.entries})
                if params.k > 1 and not rep["T"].ok:
                    rec.stop_reason = "trap_exit"
                    rec.trapped_until = st.s
                    if stop_on_trap_exit:
                        return rec, U, st
            else:
                rec.margins.append({})
            next_rec += params.record_ds
        P, Q, _ = st.rescaled_rates(ev.b)
        ds = min(ev.stable_ds(U.values, st.s, P, Q), s_end - st.s,
                 next_rec - st.s + 1e-12)
        try:
            U, st = ev.step(U, st, ds)
        except (ConstraintOverflowError, ModulationDegeneracyError) as err:
            rec.stop_reason = f"aborted: {err}"
            if math.isnan(rec.trapped_until):
                rec.trapped_until = st.s
            return rec, U, st
    if rec.stop_reason == "running":
        rec.stop_reason = "s_end"
        if math.isnan(rec.trapped_until):
            rec.trapped_until = s_end
    return rec, U, st


def reanchor_frame(ev: SelfSimEvolution, U: Field, st: ModulationState):
    """Re-center the frame on the steepest interior inflection point.

    When a strong equation perturbation drives the neutral Taylor
    coefficient out of its non-degeneracy band, the singularity relocates
    to a nearby steeper inflection.  This rebuilds the self-similar frame
    there: the new field samples the old one through the exact change of
    variables, so the physical solution is untouched and the continued run
    keeps collecting its blow-up asymptotics.
    """
    b = ev.b
    Uy = U.derivative().values
    i = int(np.argmax(np.abs(Uy) * ev.interior))
    ystar = U.find_deriv_zero(2, U.grid.x[i])
    m = U.sample_deriv(ystar, 1)
    v = U.sample(ystar)
    mm = abs(m)
    if mm <= 1.0:
        raise ModulationDegeneracyError(
            "no steeper inflection to re-anchor on (|slope| <= 1)"
        )
    trel_old = math.exp(-st.s)
    t_now = st.tau - trel_old
    s2 = st.s + math.log(mm)
    kappa2 = trel_old ** (b - 1.0) * v + st.kappa
    vals = mm ** (b - 1.0) * (
        np.array([U.sample(q) for q in ystar + mm ** (-b) * ev.y]) - v
    )
    amb2 = math.exp((b - 1.0) * s2) * kappa2
    U2 = Field(U.grid, ev.taper * (vals + amb2) - amb2)
    st2 = ModulationState(
        s=s2, tau=t_now + trel_old / mm, xi=st.xi + trel_old**b * ystar,
        kappa=kappa2, w=tuple(0.0 for _ in st.w),
    )
    return U2, st2


def merge_records(records):
    """Concatenate staged run records into one physical-time series."""
    out = SelfSimRecord()
    out.stop_reason = records[-1].stop_reason
    out.trapped_until = records[-1].trapped_until
    for rec in records:
        for name in ("s", "tau", "xi", "kappa", "P", "Q", "R", "w", "w_top",
                     "margins", "grad"):
            getattr(out, name).extend(getattr(rec, name))
        for sig, series in rec.holder.items():
            out.holder.setdefault(sig, []).extend(series)
    return out


def staged_selfsim(U0: Field, st0: ModulationState, sym: LinearSymbol,
                   params: SelfSimParams, s_end, extra_span=4.0,
                   max_stages=3, track_sigmas=(),
                   evolution: SelfSimEvolution | None = None,
                   with_monitors=False):
    """Self-similar run that survives frame degeneracies by re-anchoring.

    Runs to ``s_end``; each time the modulation frame degenerates the frame
    is re-centered on the relocated steepest inflection and the evolution
    continues for ``extra_span`` self-similar units.  Returns the merged
    record plus the per-stage records and final state.
    """
    ev = evolution or SelfSimEvolution(U0.grid, sym, params)
    records = []
    U, st = U0, st0
    target = s_end
    for stage in range(max_stages):
        rec, U, st = run_selfsim(U, st, sym, params, target, evolution=ev,
                                 with_monitors=with_monitors,
                                 track_sigmas=track_sigmas)
        records.append(rec)
        if not rec.stop_reason.startswith("aborted"):
            break
        if stage == max_stages - 1:
            break
        U, st = reanchor_frame(ev, U, st)
        target = st.s + extra_span
    return merge_records(records), records, U, st


@dataclass
class ShootResult:
    w0_best: tuple
    trapped_until: float
    boundary_horizons: list
    evaluations: int
    budget_exhausted: bool


def shoot_unstable(make_run, k, gamma, sigma0, budget=50, rounds=None):
    """Recentering search for the best-trapped unstable initial vector.

    ``make_run(w0_vector) -> trapped_until`` evaluates the exit-time map.
    Starts from a coarse cross/corner pattern on the ball of radius
    e^{-gamma sigma0}, recenters on the longest-trapped candidate and
    shrinks the radius by 1/3 until the budget is spent.
    """
    dim = 2 * k - 2
    if dim == 0:
        return ShootResult((), float("inf"), [], 0, False)
    radius = math.exp(-gamma * sigma0)
    center = np.zeros(dim)
    best_w = tuple(center)
    best_h = -float("inf")
    boundary = []
    used = 0

    def offsets(r):
        out = []
        for i in range(dim):
            for sgn in (+1.0, -1.0):
                v = np.zeros(dim)
                v[i] = sgn * r
                out.append(v)
        if dim >= 2:
            for sx in (+1.0, -1.0):
                for sy in (+1.0, -1.0):
                    v = np.zeros(dim)
                    v[0] = sx * r / math.sqrt(2.0)
                    v[1] = sy * r / math.sqrt(2.0)
                    out.append(v)
        return out

    first_round = True
    r = radius
    while used < budget:
        cands = [center] + [center + o for o in offsets(r)]
        horizons = []
        for w in cands:
            if used >= budget:
                break
            if float(np.linalg.norm(w)) > radius:
                w = w * (radius / float(np.linalg.norm(w)))
            h = make_run(tuple(w))
            used += 1
            horizons.append((h, tuple(w)))
            if first_round and float(np.linalg.norm(np.array(w))) >= r * 0.99:
                boundary.append(h)
        if not horizons:
            break
        h_best, w_best = max(horizons, key=lambda t: t[0])
        if h_best > best_h:
            best_h, best_w = h_best, w_best
        center = np.array(w_best)
        r = r / 3.0
        first_round = False
        if rounds is not None:
            rounds -= 1
            if rounds <= 0:
                break
    return ShootResult(best_w, best_h, boundary, used, used >= budget)
