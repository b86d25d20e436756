"""Measurement tools: Hölder and weighted seminorms, modulation-parameter
extraction from physical snapshots, and blow-up time/rate fitting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from wavebreak.grid import Field


class InsufficientSpanError(ValueError):
    """The time series does not span enough decades for a trustworthy fit."""


class ExtractionError(RuntimeError):
    """Modulation-parameter extraction failed (wrong-sign slope etc.)."""


# ---------------------------------------------------------------------------
# Hölder seminorm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderSpec:
    """Dyadic-separation estimator parameters for the C^sigma seminorm."""

    exponent: float
    max_separation_fraction: float = 0.25
    stride: int = 1

    def __post_init__(self):
        if not (0.0 < self.exponent <= 1.0):
            raise ValueError("Hölder exponent must lie in (0, 1]")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def separations(self, n, dx, domain_length):
        """Dyadic lags in grid points, from 2 to max_separation_fraction * box."""
        top = int(self.max_separation_fraction * domain_length / dx)
        lags = []
        m = 1
        while m <= max(top, 1):
            lags.append(m)
            m *= 2
        return [m for m in lags if m < n]


def holder_seminorm(f: Field, spec: HolderSpec):
    """Lower bound of sup |f(x+h)-f(x)| / h^sigma over dyadic separations.

    Non-periodic: only pairs with both points inside the box are compared,
    so the estimator is insensitive to the wrap-around jump.
    """
    u = f.values[:: spec.stride]
    dx = f.grid.dx * spec.stride
    best = 0.0
    for m in spec.separations(u.size, dx, 2 * f.grid.half_length):
        h = m * dx
        diff = np.abs(u[m:] - u[:-m])
        if diff.size:
            best = max(best, float(diff.max()) / h**spec.exponent)
    return best


def holder_seminorm_values(values, dx, exponent):
    """Array-based convenience wrapper used by the run recorders."""
    n = values.size
    spec = HolderSpec(exponent)
    best = 0.0
    for m in spec.separations(n, dx, n * dx):
        h = m * dx
        diff = np.abs(values[m:] - values[:-m])
        if diff.size:
            best = max(best, float(diff.max()) / h**exponent)
    return best


# ---------------------------------------------------------------------------
# Weighted dyadic-shell seminorm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedNormSpec:
    """Parameters of the dyadic-shell seminorm with tapered tail at L."""

    n: int
    cutoff: float
    k: int = 1

    def __post_init__(self):
        if self.cutoff <= 1.0:
            raise ValueError("cutoff L must exceed 1")
        if self.n < 0:
            raise ValueError("derivative order must be nonnegative")

    @property
    def decay_exponent(self):
        return 1.0 / (2 * self.k + 1)


def weighted_seminorm(f: Field, spec: WeightedNormSpec, center=0.0, deriv_values=None):
    """Shell supremum plus tail of the weighted homogeneous seminorm.

    sup over dyadic shells 2^{j-1} < |y| < 2^j with 2^j < L of the weighted
    L2 integral with weight |y|^{n - 1/(2k+1)} and measure dy/|y|, plus
    L^{n - 1/(2k+1) - 1/2} times the plain L2 norm of the n-th derivative
    over |y| > L/2.
    """
    shell, tail = weighted_seminorm_parts(f, spec, center, deriv_values)
    return shell + tail


def weighted_seminorm_parts(f: Field, spec: WeightedNormSpec, center=0.0,
                            deriv_values=None):
    """(shell supremum, tail term) of the weighted seminorm.

    ``deriv_values`` overrides the spectral derivative; use it for fields
    that are not genuinely periodic on the box.
    """
    if deriv_values is not None:
        der = Field(f.grid, np.asarray(deriv_values, float))
    else:
        der = f.derivative(spec.n) if spec.n > 0 else f
    y = f.grid.x - center
    ay = np.abs(y)
    w = spec.n - spec.decay_exponent
    L = spec.cutoff
    dx = f.grid.dx
    sup = 0.0
    jmax = int(np.floor(np.log2(L)))
    jmin = max(int(np.ceil(np.log2(max(2 * dx, 1e-300)))), jmax - 60)
    for j in range(jmin, jmax + 1):
        mask = (ay > 2.0 ** (j - 1)) & (ay < 2.0**j)
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        if cnt < 8:
            warnings.warn(
                f"shell 2^{j - 1} < |y| < 2^{j} resolved by only {cnt} points",
                RuntimeWarning,
            )
        integ = dx * np.sum((ay[mask] ** w * der.values[mask]) ** 2 / ay[mask])
        sup = max(sup, float(np.sqrt(integ)))
    tail_mask = ay > L / 2.0
    tail = 0.0
    if np.any(tail_mask):
        tail = L ** (w - 0.5) * np.sqrt(dx * np.sum(der.values[tail_mask] ** 2))
    return sup, float(tail)


# ---------------------------------------------------------------------------
# Modulation extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulationExtract:
    tau: float
    xi: float
    kappa: float
    w: tuple            # (w_2, ..., w_{2k-1}); empty for k = 1
    w_top: float        # w_{2k+1}


def extract_modulation(u: Field, k, x_guess, fit_radius=0.4):
    """Invert the data map at a near-profile snapshot.

    xi is the zero of the 2k-th derivative near x_guess, tau = -1/u'(xi)
    and kappa = u(xi).  The Taylor coefficients w_j are measured in the
    self-similar frame: the snapshot is rescaled to U(y), the exact profile
    is subtracted, and a degree-(2k+3) least-squares polynomial over
    |y| <= fit_radius supplies w_2 ... w_{2k-1} and w_{2k+1}.  Working on
    the profile-subtracted remainder avoids the catastrophic high-order
    derivative amplification of a direct physical-frame formula.
    """
    from wavebreak.profile import BurgersProfile

    b = (2 * k + 1) / (2 * k)
    xi = u.find_deriv_zero(2 * k, x_guess)
    slope = u.sample_deriv(xi, 1)
    if slope >= 0:
        raise ExtractionError(
            f"slope {slope:.3e} at xi = {xi:.6g} is not negative; "
            "snapshot is not in the steepening frame"
        )
    tau = -1.0 / slope
    kappa = u.sample(xi)
    lam = tau**b
    r = fit_radius
    deg = 2 * k + 3
    yv = np.linspace(-r, r, max(8 * (deg + 1), 64))
    Uv = tau ** (1.0 - b) * (u.sample(xi + lam * yv) - kappa)
    Wv = Uv - BurgersProfile(k)(yv)
    # fit in z = y/r for conditioning, then undo the scaling per coefficient
    van = np.vander(yv / r, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(van, Wv, rcond=None)
    taylor = [coef[j] * math.factorial(j) / r**j for j in range(deg + 1)]
    w = tuple(float(taylor[j]) for j in range(2, 2 * k))
    w_top = float(taylor[2 * k + 1])
    return ModulationExtract(float(tau), float(xi), float(kappa), w, w_top)


# ---------------------------------------------------------------------------
# Blow-up rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    blowup_time: float
    exponent: float
    prefactor: float
    r_squared: float
    window: tuple

    def as_dict(self):
        return {
            "blowup_time": self.blowup_time,
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "window": list(self.window),
        }


def _loglog_fit(logdt, logq):
    slope, intercept = np.polyfit(logdt, logq, 1)
    resid = logq - (slope * logdt + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((logq - logq.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return slope, intercept, r2


def fit_blowup_rate(t, q, min_rows=10, min_decades=1.5, t_plus_bounds=None):
    """Fit q ~ C (tau_plus - t)^(-p) by maximizing log-log linearity.

    Scans the singular time over (t_max, t_max + span] with a bounded scalar
    optimizer and returns the best-R² power-law fit.
    """
    t = np.asarray(t, float)
    q = np.asarray(q, float)
    keep = q > 0
    t, q = t[keep], q[keep]
    if t.size < min_rows:
        raise InsufficientSpanError(f"need at least {min_rows} rows, got {t.size}")
    t_max = float(t.max())
    span = float(t.max() - t.min())
    if t_plus_bounds is None:
        t_plus_bounds = (t_max + 1e-12 * max(1.0, abs(t_max)), t_max + 50.0 * span)
    logq = np.log(q)

    def neg_r2(tp):
        logdt = np.log(tp - t)
        return -_loglog_fit(logdt, logq)[2]

    # coarse log-spaced scan guards against local optima of the R2 landscape
    offsets = np.geomspace(
        t_plus_bounds[0] - t_max, t_plus_bounds[1] - t_max, 200
    )
    coarse = t_max + offsets[int(np.argmin([neg_r2(t_max + d) for d in offsets]))]
    lo = max(t_plus_bounds[0], coarse - 0.5 * (coarse - t_max))
    hi = min(t_plus_bounds[1], coarse + 1.0 * (coarse - t_max))
    res = minimize_scalar(
        neg_r2, bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-13 * max(1.0, abs(t_max))},
    )
    tp = float(res.x)
    dt = tp - t
    decades = float(np.log10(dt.max() / dt.min()))
    slope, intercept, r2 = _loglog_fit(np.log(dt), logq)
    # short-span data is only trusted when the power law is essentially exact
    if decades < min_decades and r2 < 1.0 - 1e-8:
        raise InsufficientSpanError(
            f"series spans {decades:.2f} decades of (tau_plus - t); "
            f"need {min_decades}"
        )
    return RateFit(tp, -slope, float(np.exp(intercept)), r2, (float(t.min()), t_max))


@dataclass(frozen=True)
class WindowedRateReport:
    """Power-law rates measured on the final decades before the singular time."""

    tau_plus: float
    grad_fit: RateFit
    sigma_fits: dict          # sigma -> RateFit with the singular time pinned
    bounded_variation: dict   # sigma -> max/min ratio over the fit window
    window: np.ndarray        # boolean row mask of the converged fit window

    def as_dict(self):
        return {
            "tau_plus": self.tau_plus,
            "grad_fit": self.grad_fit.as_dict(),
            "sigma_fits": {f"{s:.6g}": f.as_dict()
                           for s, f in self.sigma_fits.items()},
            "bounded_variation": {f"{s:.6g}": v
                                  for s, v in self.bounded_variation.items()},
            "rows_in_window": int(self.window.sum()),
        }


def final_window_rates(t, grad, holders=None, bounded_sigmas=(),
                       window_decades=1.5, iterations=5,
                       min_rows=8, min_decades=1.0):
    """Iterated windowed power-law fit near the singular time.

    A first fit of the gradient series over the whole run seeds tau_plus;
    the fit is then repeated on the rows within ``window_decades`` decades
    of the closest approach until the window stabilizes.  Seminorm series
    in ``holders`` (already rescaled to the physical frame) are fitted on
    the same window with the singular time pinned, which removes the
    tau_plus/exponent trade-off for the slowly-diverging quantities.
    Sigmas listed in ``bounded_sigmas`` are reported as max/min variation
    over the window instead of a rate.
    """
    t = np.asarray(t, float)
    grad = np.asarray(grad, float)
    fit = fit_blowup_rate(t, grad)
    tp = fit.blowup_time
    win = np.ones(t.size, bool)
    for _ in range(iterations):
        dt = tp - t
        win = dt <= dt.min() * 10.0**window_decades
        fit = fit_blowup_rate(t[win], grad[win], min_rows=min_rows,
                              min_decades=min_decades)
        tp = fit.blowup_time
    pinned = (tp - 1e-12, tp + 1e-12)
    sigma_fits = {}
    variation = {}
    for sig, series in (holders or {}).items():
        series = np.asarray(series, float)[win]
        if sig in bounded_sigmas:
            variation[sig] = float(series.max() / series.min())
        else:
            sigma_fits[sig] = fit_blowup_rate(
                t[win], series, min_rows=min_rows, min_decades=min_decades,
                t_plus_bounds=pinned)
    return WindowedRateReport(tp, fit, sigma_fits, variation, win)


# ---------------------------------------------------------------------------
# Bounded-versus-blow-up classification
# ---------------------------------------------------------------------------

@dataclass
class SigmaClassification:
    sigma: float
    verdict: str               # "bounded", "blowup", or "inconclusive"
    predicted_exponent: float
    fitted_exponent: float = np.nan
    r_squared: float = np.nan
    log_variation: float = np.nan


@dataclass
class BoundedVsBlowupReport:
    k: int
    blowup_time: float
    rows: list = field(default_factory=list)

    def verdict(self, sigma):
        for row in self.rows:
            if abs(row.sigma - sigma) < 1e-12:
                return row.verdict
        raise KeyError(f"sigma = {sigma} not tracked")

    def row(self, sigma):
        for row in self.rows:
            if abs(row.sigma - sigma) < 1e-12:
                return row
        raise KeyError(f"sigma = {sigma} not tracked")


def bounded_vs_blowup_report(record, k, exponent_tol=0.1, min_decades=1.5,
                             grad_min=10.0):
    """Classify each tracked Hölder exponent as bounded or blowing up.

    ``record`` must expose arrays ``t``, ``grad_max`` and a dict
    ``holder`` mapping sigma to the seminorm time series.  Boundedness is
    total variation of the log seminorm below log 2 over the final
    ``min_decades`` decades of (tau_plus - t); blow-up requires a power-law
    fit matching (2k+1)/(2k) (sigma - 1/(2k+1)) with R² > 0.98.  The
    singular time comes from the gradient series restricted to grad_max >=
    ``grad_min``: earlier rows belong to the pre-blow-up transient, whose
    flat stretch would drag the fitted time toward a degenerate optimum.
    """
    t = np.asarray(record.t, float)
    g = np.asarray(record.grad_max, float)
    grow = g >= grad_min
    fit = fit_blowup_rate(t[grow], g[grow], min_decades=min_decades)
    tp = fit.blowup_time
    dt = tp - t
    window = dt <= dt.min() * 10**min_decades
    b = (2 * k + 1) / (2 * k)
    report = BoundedVsBlowupReport(k, tp)
    for sigma, series in sorted(record.holder.items()):
        series = np.asarray(series, float)
        predicted = b * (sigma - 1.0 / (2 * k + 1))
        row = SigmaClassification(sigma, "inconclusive", predicted)
        sel = window & (series > 0)
        if sel.sum() >= 10 and np.log10(dt[sel].max() / dt[sel].min()) >= min_decades - 0.1:
            logs = np.log(series[sel])
            tv = float(np.sum(np.abs(np.diff(logs))))
            row.log_variation = tv
            slope, _, r2 = _loglog_fit(np.log(dt[sel]), logs)
            row.fitted_exponent = -slope
            row.r_squared = r2
            if tv < np.log(2.0):
                row.verdict = "bounded"
            elif r2 > 0.98 and abs(-slope - predicted) <= exponent_tol:
                row.verdict = "blowup"
        report.rows.append(row)
    return report
