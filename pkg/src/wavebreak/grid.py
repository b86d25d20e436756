"""Periodic pseudospectral grid and field containers.

All transforms use the full complex FFT; real fields are kept real by
construction and every multiplier application checks that the imaginary
residue stays at round-off level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RealityError(RuntimeError):
    """A nominally real field acquired a non-negligible imaginary part."""


class DegenerateRootError(RuntimeError):
    """Newton's method hit a vanishing derivative while locating a root."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L) with n points, n a power of two."""

    n: int
    half_length: float
    center: float = 0.0

    def __post_init__(self):
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ValueError("grid size must be a power of two, at least 16")
        if self.half_length <= 0:
            raise ValueError("half_length must be positive")

    @property
    def dx(self):
        return 2.0 * self.half_length / self.n

    @property
    def x(self):
        return self.center - self.half_length + self.dx * np.arange(self.n)

    @property
    def xi(self):
        """Angular wavenumbers pi * m / L in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def xi_max(self):
        return np.pi / self.dx

    def dealias_mask(self):
        """Two-thirds rule mask on integer mode numbers."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.abs(m) <= self.n // 3

    def refine(self, factor=2):
        return Grid(self.n * factor, self.half_length, self.center)

    def recenter(self, center):
        return Grid(self.n, self.half_length, float(center))


class Field:
    """Real field on a :class:`Grid` with a cached Fourier transform."""

    imag_tol = 1e-6

    def __init__(self, grid: Grid, values):
        self.grid = grid
        values = np.asarray(values)
        if values.shape != (grid.n,):
            raise ValueError(f"field shape {values.shape} does not match grid")
        if np.iscomplexobj(values):
            self._check_real(values, "field construction")
            values = values.real
        self.values = values.astype(float)
        self._hat = None

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.x))

    @classmethod
    def from_spectrum(cls, grid, hat):
        f = cls(grid, np.fft.ifft(hat))
        f._hat = np.asarray(hat, complex)
        return f

    @property
    def hat(self):
        if self._hat is None:
            self._hat = np.fft.fft(self.values)
        return self._hat

    def _check_real(self, arr, where):
        scale = max(float(np.max(np.abs(arr))), 1e-300)
        resid = float(np.max(np.abs(arr.imag))) / scale
        if resid > self.imag_tol:
            raise RealityError(
                f"imaginary residue {resid:.3e} exceeds {self.imag_tol:.1e} "
                f"during {where}"
            )

    def _to_field(self, hat, where):
        out = np.fft.ifft(hat)
        self._check_real(out, where)
        return Field(self.grid, out.real)

    def derivative(self, j=1):
        """Spectral j-th derivative; the Nyquist mode is zeroed for odd j.

        Computed on the half spectrum so the result is exactly real even
        for high orders, where the full-FFT route accumulates an imaginary
        residue of order xi_max^j eps.
        """
        n = self.grid.n
        mult = (1j * 2.0 * np.pi * np.fft.rfftfreq(n, d=self.grid.dx)) ** j
        if j % 2 == 1:
            mult[-1] = 0.0
        vals = np.fft.irfft(np.fft.rfft(self.values) * mult, n=n)
        return Field(self.grid, vals)

    def apply_symbol(self, symbol_values, where="symbol application"):
        """Apply a Fourier multiplier given by its values on ``grid.xi``."""
        return self._to_field(np.asarray(symbol_values) * self.hat, where)

    def dealias(self):
        return self._to_field(self.hat * self.grid.dealias_mask(), "dealiasing")

    def nonlinear_flux_derivative(self):
        """Dealiased conservative transport term d/dx (u^2 / 2)."""
        mask = self.grid.dealias_mask()
        u = np.fft.ifft(self.hat * mask).real
        flux_hat = np.fft.fft(0.5 * u * u) * mask
        ik = 1j * self.grid.xi
        ik[self.grid.n // 2] = 0.0
        return self._to_field(ik * flux_hat, "nonlinear term")

    def l2_norm(self):
        """Continuum L2 norm, trapezoidal (exact for the trig interpolant)."""
        return float(np.sqrt(self.grid.dx * np.sum(self.values**2)))

    def linf_norm(self):
        return float(np.max(np.abs(self.values)))

    def spectral_tail_fraction(self):
        """Energy fraction carried by the top octave of retained modes."""
        m = np.abs(np.fft.fftfreq(self.grid.n, d=1.0 / self.grid.n))
        power = np.abs(self.hat) ** 2
        top = power[(m > self.grid.n // 6) & (m <= self.grid.n // 3)].sum()
        total = power[(m > 0) & (m <= self.grid.n // 3)].sum()
        return float(top / total) if total > 0 else 0.0

    # -- off-grid evaluation ----------------------------------------------
    def sample(self, x):
        return self.sample_deriv(x, 0)

    def sample_deriv(self, x, j):
        """Evaluate the j-th derivative of the trig interpolant at x.

        Direct evaluation of the band-limited spectral sum; cost O(n) per
        point, intended for a handful of locations near the gradient peak.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        xi = self.grid.xi
        coef = self.hat / self.grid.n
        if j > 0:
            ik = (1j * xi) ** j
            if j % 2 == 1:
                ik = ik.copy()
                ik[self.grid.n // 2] = 0.0
            coef = coef * ik
        x0 = self.grid.center - self.grid.half_length
        phase = np.exp(1j * np.outer(xa - x0, xi))
        out = (phase @ coef).real
        return float(out[0]) if scalar else out

    def find_deriv_zero(self, order, x_init, tol=1e-12, maxiter=60):
        """Newton root of the ``order``-th derivative near ``x_init``.

        The iteration solves d^order u (x) = 0 using d^(order+1) u for the
        Newton slope.  Raises :class:`DegenerateRootError` if that slope
        degenerates or the iteration leaves the domain.
        """
        x = float(x_init)
        lo = self.grid.center - self.grid.half_length
        hi = self.grid.center + self.grid.half_length
        scale = max(self.linf_norm(), 1e-300) / self.grid.dx**order
        for _ in range(maxiter):
            f = self.sample_deriv(x, order)
            fp = self.sample_deriv(x, order + 1)
            if abs(fp) < 1e-13 * scale / self.grid.dx:
                raise DegenerateRootError(
                    f"derivative of order {order + 1} degenerates near x = {x:.6g}"
                )
            step = f / fp
            x_new = x - step
            if not (lo <= x_new <= hi):
                raise DegenerateRootError(
                    f"root search for derivative order {order} left the domain"
                )
            x = x_new
            if abs(step) < tol * max(1.0, abs(x)):
                return x
        raise DegenerateRootError(
            f"root search for derivative order {order} did not converge"
        )

    def local_fit_derivs(self, x0, nderiv, radius=0.1, degree=None):
        """Derivatives at x0 from a least-squares polynomial fit.

        Noise-tolerant alternative to spectral sampling: fits a polynomial
        of the given degree over grid points within ``radius`` of x0.
        """
        if degree is None:
            degree = nderiv + 2
        x = self.grid.x
        mask = np.abs(x - x0) <= radius
        if mask.sum() < degree + 2:
            raise ValueError("fit window too small for the requested degree")
        dx = x[mask] - x0
        van = np.vander(dx, degree + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(van, self.values[mask], rcond=None)
        fact = np.cumprod(np.concatenate(([1.0], np.arange(1, nderiv + 1))))
        return coef[: nderiv + 1] * fact


def zero_pad_spectrum(field: Field, factor=2):
    """Refine a field onto a grid ``factor`` times finer by zero padding."""
    n = field.grid.n
    m = n * factor
    old = field.hat
    new = np.zeros(m, dtype=complex)
    new[: n // 2] = old[: n // 2]
    new[m - n // 2 + 1 :] = old[n // 2 + 1 :]
    # split the Nyquist coefficient to keep the field real
    new[n // 2] = 0.5 * old[n // 2]
    new[m - n // 2] = 0.5 * np.conj(old[n // 2])
    new *= factor
    return Field.from_spectrum(field.grid.refine(factor), new)
