"""Initial-data ansatz in physical and self-similar variables.

The data map sends modulation parameters (tau0, xi0, kappa0), unstable
Taylor coefficients w_j and a flat perturbation W0 to the field

  u0(x) = tau0^(b-1) [ chi(sigma0, y)(U(y) + tau0^(1-b) kappa0)
          + chi_bar(y) sum_j w_j y^j / j! + W0(y) ],   y = tau0^(-b)(x - xi0),

with sigma0 = -log tau0; its self-similar counterpart differs by the
ambient constant -e^((b-1) sigma0) kappa0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from wavebreak.grid import Field, Grid
from wavebreak.profile import BurgersProfile, Cutoff

W0_SHAPES = ("bump_odd_order", "mode_packet")


class DomainTooSmallError(ValueError):
    """The grid box does not contain the data support with margin."""


class DataConstraintError(ValueError):
    """A flatness, smallness or norm condition on the data fails."""


def _shape_lambdas(shape, k, width, carrier, jmax):
    import sympy as sp

    y = sp.Symbol("y")
    expr = y ** (2 * k + 1) * sp.exp(-((y / width) ** 2))
    if shape == "mode_packet":
        expr = expr * sp.cos(carrier * y)
    fns = [sp.lambdify(y, expr, modules="numpy")]
    d = expr
    for _ in range(jmax):
        d = sp.diff(d, y)
        fns.append(sp.lambdify(y, d, modules="numpy"))
    return fns


class W0:
    """Concrete perturbation function with derivative and norm helpers."""

    def __init__(self, shape, amplitude, width, k, carrier=2.0):
        if shape not in W0_SHAPES:
            raise ValueError(f"unknown perturbation shape {shape!r}")
        if width <= 0 or amplitude < 0:
            raise ValueError("amplitude must be >= 0 and width > 0")
        self.shape = shape
        self.amplitude = float(amplitude)
        self.width = float(width)
        self.k = int(k)
        self.carrier = float(carrier)
        self._fns = _shape_lambdas(shape, k, width, carrier, 2 * k + 4)

    def __call__(self, y):
        return self.deriv(y, 0)

    def deriv(self, y, j):
        if j >= len(self._fns):
            raise ValueError(f"derivatives precomputed only up to {len(self._fns) - 1}")
        y = np.asarray(y, dtype=float)
        out = self.amplitude * self._fns[j](y)
        return np.broadcast_to(np.asarray(out, float), y.shape).astype(float)

    def l2_norm(self, j=0):
        """L2 norm of the j-th derivative by adaptive quadrature."""
        if self.amplitude == 0.0:
            return 0.0
        cut = 12.0 * self.width + 1.0
        val, _ = quad(lambda y: self.deriv(np.array(y), j) ** 2, -cut, cut, limit=200)
        return float(np.sqrt(val))


def make_W0(shape, amplitude, width, k, carrier=2.0):
    """Build a perturbation from the named family."""
    return W0(shape, amplitude, width, k, carrier)


def calibrated_W0(shape, width, k, tau0, eps0=1e-3, margin=0.5, carrier=2.0):
    """Perturbation whose amplitude sits at ``margin`` times the norm cap.

    The weighted norm condition scales like width^(2k + 3/2) for wide
    envelopes, so the feasible amplitude is computed from the measured
    norms of the unit-amplitude shape rather than guessed.
    """
    unit = W0(shape, 1.0, width, k, carrier)
    b = (2 * k + 1) / (2 * k)
    s0 = -math.log(tau0)
    norm = unit.l2_norm(0) + math.exp(b * (2 * k + 3) * s0) * unit.l2_norm(2 * k + 3)
    cap = eps0 * math.exp((1.5 * b - 1.0) * s0)
    return W0(shape, margin * cap / norm, width, k, carrier)


@dataclass(frozen=True)
class DataParams:
    """Parameters of the blow-up initial-data ansatz."""

    k: int
    tau0: float
    xi0: float = 0.0
    kappa0: float = 0.0
    w0: tuple = ()
    perturbation: W0 | None = None
    eps0: float = 1e-3
    gamma: float = 0.1

    def __post_init__(self):
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if len(self.w0) != 2 * self.k - 2:
            raise ValueError(
                f"w0 must have {2 * self.k - 2} entries for k = {self.k}"
            )

    @property
    def sigma0(self):
        return -math.log(self.tau0)

    @property
    def b(self):
        return (2 * self.k + 1) / (2 * self.k)

    def validate(self):
        """Check the flatness, norm and smallness conditions; raise on failure."""
        k, s0, b = self.k, self.sigma0, self.b
        bound = math.exp(-self.gamma * s0)
        for j, w in enumerate(self.w0, start=2):
            if abs(w) > bound:
                raise DataConstraintError(
                    f"|w_{j}| = {abs(w):.3e} exceeds e^(-gamma sigma0) = {bound:.3e}"
                )
        if self.perturbation is not None:
            W = self.perturbation
            scale = max(W.amplitude, 1e-300)
            for j in range(2 * k + 1):
                if abs(float(W.deriv(np.array(0.0), j))) >= 1e-10 * scale:
                    raise DataConstraintError(
                        f"perturbation does not vanish to order {2 * k} at 0"
                    )
            norm = W.l2_norm(0) + math.exp(b * (2 * k + 3) * s0) * W.l2_norm(2 * k + 3)
            cap = self.eps0 * math.exp((1.5 * b - 1.0) * s0)
            if norm >= cap:
                raise DataConstraintError(
                    f"perturbation norm {norm:.3e} violates the smallness cap "
                    f"{cap:.3e}; reduce the amplitude or raise eps0"
                )
        return self


@dataclass
class AnsatzBuilder:
    """Shared profile/cutoff machinery for both data constructions."""

    k: int
    _profile: BurgersProfile = field(init=False, repr=False)
    _cutoff: Cutoff = field(init=False, repr=False)

    def __post_init__(self):
        self._profile = BurgersProfile(self.k)
        self._cutoff = Cutoff(self._profile)

    @property
    def profile(self):
        return self._profile

    @property
    def cutoff(self):
        return self._cutoff

    def support_radius(self, sigma0):
        """Outer edge of supp chi(sigma0, .) in the y variable."""
        return float(self._cutoff.flow_forward(np.array([self._cutoff.outer]), sigma0)[0])

    def selfsim_values(self, p: DataParams, y):
        """Right-hand side of the self-similar ansatz on the given y points."""
        s0, b = p.sigma0, p.b
        chi = self._cutoff.chi(s0, y)
        amb = math.exp((b - 1.0) * s0) * p.kappa0
        vals = chi * (self._profile(y) + amb) - amb
        if p.w0:
            poly = np.zeros_like(np.asarray(y, float))
            for j, w in enumerate(p.w0, start=2):
                poly += w / math.factorial(j) * np.asarray(y, float) ** j
            vals = vals + self._cutoff.chi_bar(y) * poly
        if p.perturbation is not None:
            vals = vals + p.perturbation(np.asarray(y, float))
        return vals

    def check_box(self, p: DataParams, y_min, y_max, margin=1.05):
        edge = self.support_radius(p.sigma0) * margin
        if y_min > -edge or y_max < edge:
            raise DomainTooSmallError(
                f"grid box [{y_min:.3g}, {y_max:.3g}] in self-similar units does "
                f"not contain the data support radius {edge:.3g}"
            )


def build_selfsim_data(p: DataParams, g: Grid, builder: AnsatzBuilder | None = None):
    """Initial field U(sigma0, y) of the self-similar evolution."""
    builder = builder or AnsatzBuilder(p.k)
    y = g.x
    builder.check_box(p, float(y.min()), float(y.max()))
    return Field(g, builder.selfsim_values(p, y))


def build_physical_data(p: DataParams, g: Grid, builder: AnsatzBuilder | None = None):
    """Initial field u0(x) of the physical evolution."""
    builder = builder or AnsatzBuilder(p.k)
    lam = p.tau0**p.b
    y = (g.x - p.xi0) / lam
    builder.check_box(p, float(y.min()), float(y.max()))
    amb = math.exp((p.b - 1.0) * p.sigma0) * p.kappa0
    vals = p.tau0 ** (p.b - 1.0) * (builder.selfsim_values(p, y) + amb)
    return Field(g, vals)


def signed_data(p: DataParams, sign, g: Grid, builder: AnsatzBuilder | None = None):
    """Raise |kappa0| until the physical data is single-signed on the grid.

    The ambient offset must beat C0 = max tau0^(b-1) |U| over the cutoff
    support; C0 is measured, not assumed.  Returns the adjusted parameters
    after verifying the sign on the grid, retrying once with a larger
    offset if the first margin fails.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    builder = builder or AnsatzBuilder(p.k)
    edge = builder.support_radius(p.sigma0)
    ys = np.linspace(-edge, edge, 4001)
    c0 = p.tau0 ** (p.b - 1.0) * float(np.max(np.abs(builder.profile(ys))))
    for factor in (2.0, 4.0):
        cand = replace(p, kappa0=sign * factor * max(c0, 1e-300))
        u0 = build_physical_data(cand, g, builder)
        ok = np.min(u0.values) >= 0 if sign > 0 else np.max(u0.values) <= 0
        if ok:
            return cand
    raise DataConstraintError(
        "signed data verification failed even after raising |kappa0|"
    )
