"""Numerical laboratory for spectral bounds of random complex potentials.

Subpackages by theme: `grid` (periodic boxes and transforms), `potentials`
(random piecewise-constant fields and decompositions), `multipliers`
(resolvent symbols, smoothing, sphere nets), `opnorm` (operator chains and
norm estimation), `eigsearch` (eigenvalue scans and bound formulas), `probml`
(Monte-Carlo tail/covering tools), `experiments` (named scenarios), and `cli`.
"""

from .grid import BoxGrid, GridFunction, fft_forward, fft_inverse, make_grid
from .potentials import RandomizationScheme, RandomPotential, randomize

__version__ = "0.1.0"

__all__ = [
    "BoxGrid",
    "GridFunction",
    "RandomPotential",
    "RandomizationScheme",
    "fft_forward",
    "fft_inverse",
    "make_grid",
    "randomize",
    "__version__",
]
