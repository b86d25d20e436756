"""Smooth self-similar Burgers profiles and the transported cutoff.

The k-th profile U(y) is defined implicitly by y = -U - h1 U^(2k+1) with
h1 = 1/(2k+1), which pins the Taylor data U(0) = 0, U'(0) = -1,
U^(2k+1)(0) = (2k)! and intermediate derivatives zero.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp


class ProfileConvergenceError(RuntimeError):
    """The safeguarded Newton iteration for the implicit relation failed."""


@functools.lru_cache(maxsize=None)
def _deriv_lambdas(k, jmax):
    """Closed forms for d^j U / dy^j as functions of the profile value U.

    Obtained by repeatedly differentiating U' = -1/(1 + U^(2k)) with
    dU/dy = U' itself; generated once per (k, jmax) with sympy.
    """
    import sympy as sp

    u = sp.Symbol("U")
    first = -1 / (1 + u ** (2 * k))
    exprs = [first]
    for _ in range(jmax - 1):
        exprs.append(sp.simplify(sp.diff(exprs[-1], u) * first))
    return [sp.lambdify(u, e, modules="numpy") for e in exprs]


@dataclass(frozen=True)
class BurgersProfile:
    """The k-th smooth self-similar Burgers profile."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("profile index k must be >= 1")

    @property
    def b(self):
        return (2 * self.k + 1) / (2 * self.k)

    @property
    def h1(self):
        return 1.0 / (2 * self.k + 1)

    def __call__(self, y):
        """Evaluate the profile by solving y = -U - h1 U^(2k+1)."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        ay = np.atleast_1d(np.abs(y))
        u = self._solve_positive(ay)
        out = -np.sign(np.atleast_1d(y)) * u
        return float(out[0]) if scalar else out

    def _solve_positive(self, ay):
        # root of F(u) = u + h1 u^(2k+1) - ay = 0 on [0, ay]; F is strictly
        # increasing so Newton with bracket clipping always converges
        k, h1 = self.k, self.h1
        p = 2 * k + 1
        u = np.where(ay <= 1.0, ay, (ay / h1) ** (1.0 / p))
        lo = np.zeros_like(ay)
        hi = np.maximum(ay, (ay / h1) ** (1.0 / p)) + 1.0
        tol = 1e-14 * (1.0 + ay)
        for _ in range(100):
            f = u + h1 * u**p - ay
            fp = 1.0 + u ** (2 * k)
            lo = np.where(f < 0, u, lo)
            hi = np.where(f > 0, u, hi)
            step = f / fp
            u_new = u - step
            bad = (u_new < lo) | (u_new > hi)
            u = np.where(bad, 0.5 * (lo + hi), u_new)
            if np.all(np.abs(f) <= tol):
                return u
        raise ProfileConvergenceError("implicit profile relation did not converge")

    def deriv(self, y, j=1):
        """j-th derivative of the profile, via the closed-form recursion."""
        if j < 1:
            raise ValueError("derivative order must be >= 1")
        u = self(y)
        fn = _deriv_lambdas(self.k, j)[j - 1]
        out = fn(np.asarray(u, dtype=float))
        return np.broadcast_to(np.asarray(out, float), np.shape(u)).copy() if np.ndim(u) else float(out)

    def residual(self, y_grid):
        """Max of |(1-b) U + (b y + U) U'| over the grid."""
        y = np.asarray(y_grid, dtype=float)
        u = self(y)
        up = self.deriv(y, 1)
        return float(np.max(np.abs((1.0 - self.b) * u + (self.b * y + u) * up)))


def chi_bar_bridge(t):
    """Gentle C-infinity bridge used for the transported cutoff.

    Uses f(t) = exp(-1/sqrt(t)) so the maximal slope of the unit bridge is
    about 0.72, giving cutoff slope > -1/4 over the width-7 transition.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.sqrt(np.where(t > 0.0, t, 1.0))), 0.0)
        c = np.where(
            t < 1.0, np.exp(-1.0 / np.sqrt(np.where(t < 1.0, 1.0 - t, 1.0))), 0.0
        )
    return a / (a + c)


@dataclass
class Cutoff:
    """Cutoff transported by the linearized profile flow.

    The base profile ``chi_bar`` is 1 on [-1, 1], 0 outside [-8, 8] and has
    slope >= -1/4.  ``chi(s, y)`` evaluates chi_bar at the backward image of
    y under dY/ds = b Y + U(Y).
    """

    profile: BurgersProfile
    inner: float = 1.0
    outer: float = 8.0
    rtol: float = 1e-10
    atol: float = 1e-12
    _cache: dict = field(default_factory=dict, repr=False)
    _edge_cache: dict = field(default_factory=dict, repr=False)

    def chi_bar(self, y):
        t = (self.outer - np.abs(np.asarray(y, dtype=float))) / (self.outer - self.inner)
        return chi_bar_bridge(t)

    def chi_bar_slope_min(self, samples=4001):
        y = np.linspace(self.inner, self.outer, samples)
        c = self.chi_bar(y)
        return float(np.min(np.diff(c) / np.diff(y)))

    # -- flow machinery ----------------------------------------------------
    def _velocity(self, _, y):
        return self.profile.b * y + self.profile(y)

    def flow_forward(self, y0, s):
        """Forward flow map of dY/ds = bY + U(Y) from time 0 to s."""
        if s == 0:
            return np.asarray(y0, dtype=float)
        y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        sol = solve_ivp(
            self._velocity, (0.0, s), y0, method="RK45",
            rtol=self.rtol, atol=self.atol, dense_output=False,
        )
        if not sol.success:
            raise RuntimeError(f"forward flow integration failed: {sol.message}")
        return sol.y[:, -1]

    def flow_backward(self, y, s):
        """Backward flow map: the time-0 preimage of y at time s."""
        if s == 0:
            return np.asarray(y, dtype=float)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        sol = solve_ivp(
            lambda r, z: -self._velocity(r, z), (0.0, s), y, method="RK45",
            rtol=self.rtol, atol=self.atol,
        )
        if not sol.success:
            raise RuntimeError(f"backward flow integration failed: {sol.message}")
        return sol.y[:, -1]

    def _transition_edges(self, s):
        key = round(float(s), 12)
        if key not in self._edge_cache:
            lo, hi = self.flow_forward(np.array([self.inner, self.outer]), s)
            self._edge_cache[key] = (float(lo), float(hi))
        return self._edge_cache[key]

    def chi(self, s, y):
        """Transported cutoff chi(s, y); memoized per (s, grid)."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        ya = np.atleast_1d(y)
        key = (round(float(s), 12), hashlib.sha1(ya.tobytes()).hexdigest())
        if key not in self._cache:
            self._cache[key] = self._chi_uncached(float(s), ya)
        out = self._cache[key]
        return float(out[0]) if scalar else out

    def _chi_uncached(self, s, y):
        if s == 0.0:
            return self.chi_bar(y)
        lo, hi = self._transition_edges(s)
        out = np.zeros_like(y)
        ay = np.abs(y)
        out[ay <= lo] = 1.0
        band = (ay > lo) & (ay < hi)
        if np.any(band):
            pre = self.flow_backward(ay[band], s)
            out[band] = self.chi_bar(pre)
        return out

    def support_constant(self, s):
        """Calibrated C with supp chi(s, .) inside [-C e^{bs}, C e^{bs}].

        Uses the forward flow of +/-10, following the support lemma's proof.
        """
        edge = float(self.flow_forward(np.array([10.0]), s)[0])
        return edge * np.exp(-self.profile.b * s)

    def clear_cache(self):
        self._cache.clear()
        self._edge_cache.clear()


def truncated_profile(profile: BurgersProfile, cutoff: Cutoff, s, y, nderiv=0):
    """Truncated profile chi(s, y) * U(y) and its first ``nderiv`` derivatives.

    Returns an array of shape (nderiv + 1, len(y)).  Cutoff derivatives in
    the transition band are evaluated by local polynomial fits of chi; on
    the plateau and outside the support they vanish identically.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    chi = cutoff.chi(s, y)
    u = profile(y)
    out = np.zeros((nderiv + 1, y.size))
    out[0] = chi * u
    if nderiv == 0:
        return out
    uder = np.empty((nderiv + 1, y.size))
    uder[0] = u
    for j in range(1, nderiv + 1):
        uder[j] = profile.deriv(y, j)
    if s == 0.0:
        lo, hi = cutoff.inner, cutoff.outer
    else:
        lo, hi = cutoff._transition_edges(s)
    band = (np.abs(y) > lo) & (np.abs(y) < hi)
    chider = np.zeros((nderiv + 1, y.size))
    chider[0] = chi
    if np.any(band):
        chider[1:, band] = _chi_band_derivs(cutoff, s, y[band], nderiv)
    for j in range(1, nderiv + 1):
        acc = np.zeros(y.size)
        for m in range(j + 1):
            from math import comb

            acc += comb(j, m) * chider[m] * uder[j - m]
        # off the band chi is locally constant (0 or 1)
        out[j] = np.where(band, acc, chi * uder[j])
    return out


def _chi_band_derivs(cutoff, s, y, nderiv, h=0.05):
    """Derivatives of chi(s, .) at band points via a local polynomial fit."""
    deg = nderiv + 2
    offsets = np.arange(-(deg + 2), deg + 3) * h
    vals = np.stack([cutoff.chi(s, y + d) for d in offsets])  # (npts, ny)
    van = np.vander(offsets, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(van, vals, rcond=None)
    fact = 1.0
    out = np.zeros((nderiv, y.size))
    for j in range(1, nderiv + 1):
        fact *= j
        out[j - 1] = coef[j] * fact
    return out
