"""Fourier symbols for the dispersive/dissipative Burgers family.

Each equation in the family is determined by a pair of real multiplier
symbols: an odd dispersion symbol d(xi) and an even, nonnegative
dissipation symbol v(xi).  The module also provides the smooth low/high
frequency splitting and the rescaled high/low operators used by the
self-similar solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

FAMILIES = ("burgers", "fkdv", "whitham", "fburgers", "custom")

# e^{bs} xi must stay representable in double precision
_EXP_ARG_MAX = 700.0


class NonPerturbativeRegimeError(ValueError):
    """Dispersion/dissipation order too high for the requested profile index."""


class ParameterRangeError(ValueError):
    """A rescaling parameter left the numerically representable range."""


def smooth_bridge(t):
    """C-infinity monotone bridge B: B(t)=0 for t<=0, 1 for t>=1.

    Built from f(t) = exp(-1/t) as B = f(t) / (f(t) + f(1-t)).
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        bb = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + bb)


@dataclass(frozen=True)
class LinearSymbol:
    """The dispersion/dissipation pair defining one equation of the family.

    ``dispersion(xi)`` returns d(xi) = Gamma(xi) * xi (odd), and
    ``dissipation(xi)`` returns v(xi) = Upsilon(xi) (even, >= 0).
    """

    family: str
    alpha: float = 0.0
    beta: float = 0.0
    # only used by the custom family
    custom_dispersion: object = field(default=None, compare=False)
    custom_dissipation: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown symbol family {self.family!r}")
        if not (0.0 <= self.alpha < 1.0) or not (0.0 <= self.beta < 1.0):
            raise ValueError("alpha and beta must lie in [0, 1)")

    # -- constructors ------------------------------------------------------
    @classmethod
    def burgers(cls):
        return cls("burgers")

    @classmethod
    def fkdv(cls, alpha):
        return cls("fkdv", alpha=float(alpha))

    @classmethod
    def whitham(cls):
        # Gamma(xi) = sqrt(tanh(xi)/xi) is a symbol of order 1/2
        return cls("whitham", alpha=0.5)

    @classmethod
    def fburgers(cls, beta):
        return cls("fburgers", beta=float(beta))

    @classmethod
    def custom(cls, alpha, beta, dispersion=None, dissipation=None):
        """Custom family from callables or tabulated (xi, value) arrays.

        Tabulated symbols are interpolated with a cubic spline on |xi| and
        extended by odd (dispersion) / even (dissipation) symmetry.
        """
        return cls(
            "custom",
            alpha=float(alpha),
            beta=float(beta),
            custom_dispersion=_as_symbol_fn(dispersion, odd=True),
            custom_dissipation=_as_symbol_fn(dissipation, odd=False),
        )

    @classmethod
    def from_config(cls, family, alpha=0.0, beta=0.0):
        if family == "burgers":
            return cls.burgers()
        if family == "fkdv":
            return cls.fkdv(alpha)
        if family == "whitham":
            return cls.whitham()
        if family == "fburgers":
            return cls.fburgers(beta)
        raise ValueError(f"config cannot build symbol family {family!r}")

    # -- structure ---------------------------------------------------------
    @property
    def has_dispersion(self):
        if self.family in ("fkdv", "whitham"):
            return True
        if self.family == "custom":
            return self.custom_dispersion is not None
        return False

    @property
    def has_dissipation(self):
        if self.family == "fburgers":
            return True
        if self.family == "custom":
            return self.custom_dissipation is not None
        return False

    @property
    def alpha_eff(self):
        """Dispersion order, with an absent operator counted as order 0."""
        return self.alpha if self.has_dispersion else 0.0

    @property
    def beta_eff(self):
        return self.beta if self.has_dissipation else 0.0

    # -- symbol evaluation -------------------------------------------------
    def dispersion(self, xi):
        """d(xi) = Gamma(xi) * xi; odd and real."""
        xi = np.asarray(xi, dtype=float)
        if self.family == "fkdv":
            return np.sign(xi) * np.abs(xi) ** self.alpha
        if self.family == "whitham":
            return _whitham_dispersion(xi)
        if self.family == "custom" and self.custom_dispersion is not None:
            return self.custom_dispersion(xi)
        return np.zeros_like(xi)

    def dissipation(self, xi):
        """v(xi) = Upsilon(xi); even, real, nonnegative."""
        xi = np.asarray(xi, dtype=float)
        if self.family == "fburgers":
            return np.abs(xi) ** self.beta
        if self.family == "custom" and self.custom_dissipation is not None:
            return self.custom_dissipation(xi)
        return np.zeros_like(xi)

    def propagator(self, xi):
        """Linear generator m(xi) = -(i d(xi) + v(xi)); Re m <= 0."""
        return -(1j * self.dispersion(xi) + self.dissipation(xi))


def _whitham_dispersion(xi):
    # xi * sqrt(tanh(xi)/xi); series branch avoids the 0/0 at the origin
    axi = np.abs(xi)
    small = axi < 1e-4
    ratio = np.empty_like(axi)
    with np.errstate(invalid="ignore"):
        ratio[~small] = np.tanh(axi[~small]) / axi[~small]
    x2 = axi[small] ** 2
    ratio[small] = 1.0 - x2 / 3.0 + 2.0 * x2**2 / 15.0
    return xi * np.sqrt(ratio)


def _as_symbol_fn(spec, odd):
    if spec is None:
        return None
    if callable(spec):
        return spec
    from scipy.interpolate import CubicSpline

    nodes, values = np.asarray(spec[0], float), np.asarray(spec[1], float)
    if np.any(nodes < 0):
        raise ValueError("tabulate custom symbols on xi >= 0 only")
    spline = CubicSpline(nodes, values)

    def fn(xi):
        xi = np.asarray(xi, float)
        out = spline(np.abs(xi))
        return np.sign(xi) * out if odd else out

    return fn


@dataclass(frozen=True)
class FreqSplit:
    """Smooth Littlewood-Paley-type lowpass profile.

    ``lowpass(xi)`` equals 1 on [-1, 1], vanishes outside [-2, 2], and is a
    smooth monotone bridge in between.
    """

    transition: str = "exp_bridge"

    def lowpass(self, xi):
        axi = np.abs(np.asarray(xi, dtype=float))
        return smooth_bridge(2.0 - axi)

    def highpass(self, xi):
        return 1.0 - self.lowpass(xi)


def mu_exponents(sym: LinearSymbol, k: int):
    """Concentration-rate exponents (b, mu, mu0) for the k-th profile.

    Requires the perturbative regime alpha, beta < 2k/(2k+1); an absent
    operator contributes order 0.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    threshold = 2 * k / (2 * k + 1)
    a, c = sym.alpha_eff, sym.beta_eff
    if a >= threshold or c >= threshold:
        raise NonPerturbativeRegimeError(
            f"non-perturbative regime: max(alpha, beta) = {max(a, c)} >= "
            f"2k/(2k+1) = {threshold} for k = {k}"
        )
    b = (2 * k + 1) / (2 * k)
    mu = min(1.0 - b * a, 1.0 - b * c, 1.0)
    if abs(max(a, c) - 1.0 / (2 * k + 1)) < 1e-12:
        mu0 = (2 * k - 1.5) / (2 * k)
    else:
        mu0 = min(mu, (2 * k - 1) / (2 * k))
    return b, mu, mu0


def hl_symbols(sym: LinearSymbol, split: FreqSplit, s, b, xi):
    """Symbols of the rescaled high/low operators at frequency xi.

    Returns (H(xi), L(xi)) such that the full rescaled multiplier satisfies
    e^{-mu s} H + e^{-s} L = -e^{-s} (i d(e^{bs} xi) + v(e^{bs} xi))
    with mu from :func:`mu_exponents`.
    """
    if s < 0:
        raise ParameterRangeError("self-similar time s must be nonnegative")
    xi = np.asarray(xi, dtype=float)
    xmax = float(np.max(np.abs(xi))) if xi.size else 0.0
    if b * s + np.log(max(xmax, 1.0)) > _EXP_ARG_MAX:
        raise ParameterRangeError(f"e^(b s) overflows at s = {s}, b = {b}")
    big = np.exp(b * s) * xi
    full = 1j * sym.dispersion(big) + sym.dissipation(big)
    low = split.lowpass(big)
    top_order = max(sym.alpha_eff, sym.beta_eff, 0.0)
    h = -(1.0 - low) * np.exp(-top_order * b * s) * full
    low_sym = -low * full
    return h, low_sym


@dataclass
class SymbolOrderEntry:
    operator: str          # "dispersion" or "dissipation"
    order: int             # derivative order checked
    observed_exponent: float
    expected_exponent: float
    envelope_constant: float


@dataclass
class SymbolOrderReport:
    entries: list

    @property
    def max_envelope_constant(self):
        return max((e.envelope_constant for e in self.entries), default=0.0)

    def worst_exponent_error(self):
        return max(
            (abs(e.observed_exponent - e.expected_exponent) for e in self.entries),
            default=0.0,
        )


def verify_symbol_orders(sym: LinearSymbol, n, xi_grid):
    """Check the power-law envelopes of d, v and their first n derivatives.

    Finite-difference derivatives on the grid (which must lie in |xi| >= 1)
    are compared against C |xi|^(order - j).  Violations are reported, not
    raised.
    """
    xi = np.asarray(xi_grid, dtype=float)
    if np.any(np.abs(xi) < 1.0):
        raise ValueError("symbol-order grid must satisfy |xi| >= 1")
    if n > 3:
        raise ValueError("finite-difference check supports orders <= 3")
    entries = []
    for name, fn, order, present in (
        ("dispersion", sym.dispersion, sym.alpha_eff, sym.has_dispersion),
        ("dissipation", sym.dissipation, sym.beta_eff, sym.has_dissipation),
    ):
        if not present:
            continue
        for j in range(n + 1):
            vals = np.abs(_fd_derivative(fn, xi, j))
            expected = order - j
            mask = vals > 0
            if mask.sum() >= 2:
                slope = np.polyfit(np.log(np.abs(xi[mask])), np.log(vals[mask]), 1)[0]
            else:
                slope = expected
            const = float(np.max(vals / np.abs(xi) ** expected)) if mask.any() else 0.0
            entries.append(SymbolOrderEntry(name, j, float(slope), expected, const))
    return SymbolOrderReport(entries)


def _fd_derivative(fn, xi, j, rel_step=0.05):
    if j == 0:
        return fn(xi)
    h = rel_step * np.abs(xi)
    if j == 1:
        return (fn(xi + h) - fn(xi - h)) / (2 * h)
    if j == 2:
        return (fn(xi + h) - 2 * fn(xi) + fn(xi - h)) / h**2
    return (fn(xi + 2 * h) - 2 * fn(xi + h) + 2 * fn(xi - h) - fn(xi - 2 * h)) / (
        2 * h**3
    )
