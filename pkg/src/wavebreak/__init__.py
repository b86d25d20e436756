"""Numerical laboratory for gradient blow-up in weakly dispersive and
dissipative perturbations of the inviscid Burgers equation."""

from wavebreak.symbols import LinearSymbol, FreqSplit, mu_exponents
from wavebreak.profile import BurgersProfile, Cutoff
from wavebreak.grid import Grid, Field

__all__ = [
    "LinearSymbol",
    "FreqSplit",
    "mu_exponents",
    "BurgersProfile",
    "Cutoff",
    "Grid",
    "Field",
]

__version__ = "0.1.0"
