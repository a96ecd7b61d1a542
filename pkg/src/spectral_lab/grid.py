"""Periodic-box discretization of R^d and all norm computations.

The continuum is modeled by the torus [-L/2, L/2)^d sampled on N^d points.
Transforms follow the convention

    fhat(xi) = integral e^{-2*pi*i x.xi} f(x) dx,

so the frequency lattice is {k/L : k integer, -N/2 <= k < N/2} (centered) and
a Fourier multiplier applied on the lattice approximates the continuum
multiplier as N -> infinity at fixed L.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    InvalidDimensionError,
    PointOutsideBoxError,
    SizeOverflowError,
    WrongSpaceError,
)

POSITION = "position"
FREQUENCY = "frequency"

#: Largest permitted total point count (desk scale).
MAX_POINTS = 2**26


@dataclass(frozen=True)
class BoxGrid:
    """Uniform periodic grid on the box [-L/2, L/2)^d.

    Attributes
    ----------
    d : int
        Spatial dimension, one of {1, 2, 3}.
    L : float
        Side length of the periodic box.
    N : int
        Points per dimension; a power of two >= 8.
    """

    d: int
    L: float
    N: int
    dx: float = field(init=False)
    dxi: float = field(init=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidDimensionError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.N < 8 or (self.N & (self.N - 1)) != 0:
            raise SizeOverflowError(f"N must be a power of two >= 8, got {self.N}")
        if self.N**self.d > MAX_POINTS:
            raise SizeOverflowError(
                f"grid with {self.N}^{self.d} points exceeds the desk-scale budget"
            )
        if not (self.L > 0):
            raise SizeOverflowError(f"box side must be positive, got {self.L}")
        object.__setattr__(self, "dx", self.L / self.N)
        object.__setattr__(self, "dxi", 1.0 / self.L)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    def positions_1d(self) -> np.ndarray:
        """Coordinates along one axis: -L/2 + n*dx for n = 0..N-1."""
        return -self.L / 2 + self.dx * np.arange(self.N)

    def frequencies_1d(self) -> np.ndarray:
        """Centered frequency coordinates along one axis: (k - N/2)/L."""
        return self.dxi * (np.arange(self.N) - self.N // 2)

    def position_axes(self) -> list[np.ndarray]:
        """Per-axis position coordinates broadcastable to the full shape."""
        x = self.positions_1d()
        return [x.reshape((1,) * i + (-1,) + (1,) * (self.d - 1 - i)) for i in range(self.d)]

    def frequency_axes(self) -> list[np.ndarray]:
        """Per-axis frequency coordinates broadcastable to the full shape."""
        xi = self.frequencies_1d()
        return [xi.reshape((1,) * i + (-1,) + (1,) * (self.d - 1 - i)) for i in range(self.d)]

    def position_radius_sq(self) -> np.ndarray:
        """|x|^2 on the full grid."""
        out = np.zeros(self.shape)
        for ax in self.position_axes():
            out = out + ax**2
        return out

    def frequency_radius_sq(self) -> np.ndarray:
        """|xi|^2 on the full frequency lattice."""
        out = np.zeros(self.shape)
        for ax in self.frequency_axes():
            out = out + ax**2
        return out

    def nearest_index(self, point: Sequence[float]) -> tuple[int, ...]:
        """Nearest grid index of a point in the box; raises if outside."""
        pt = np.asarray(point, dtype=float).reshape(-1)
        if pt.size != self.d:
            raise InvalidDimensionError(
                f"point has {pt.size} coordinates, grid dimension is {self.d}"
            )
        half = self.L / 2 + self.dx / 2
        if np.any(pt < -half) or np.any(pt >= half):
            raise PointOutsideBoxError(f"point {pt.tolist()} outside [-L/2, L/2)^d")
        idx = np.rint((pt + self.L / 2) / self.dx).astype(int) % self.N
        return tuple(int(i) for i in idx)


@dataclass(frozen=True)
class GridFunction:
    """A complex-valued function sampled on a BoxGrid, in position or frequency space."""

    grid: BoxGrid
    values: np.ndarray
    space: str = POSITION

    def __post_init__(self):
        if self.space not in (POSITION, FREQUENCY):
            raise WrongSpaceError(f"unknown space tag {self.space!r}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise SizeOverflowError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray, space: str | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.space if space is None else space)


def make_grid(d: int, L: float, N: int) -> BoxGrid:
    """Construct a periodic grid; see BoxGrid for the invariants enforced."""
    return BoxGrid(d=d, L=L, N=N)


def _centered_sign(grid: BoxGrid) -> np.ndarray:
    """(-1)^(k_1+...+k_d) with k the centered integer frequency index.

    This phase accounts for the box being centered at the origin rather than
    starting at 0, so that the discrete transform matches the continuum
    convention at the centered lattice.
    """
    s1 = (-1.0) ** (np.arange(grid.N) - grid.N // 2)
    out = s1
    for _ in range(grid.d - 1):
        out = np.multiply.outer(out, s1)
    return out


def fft_forward(f: GridFunction) -> GridFunction:
    """Riemann-sum discrete Fourier transform, position -> centered frequency lattice."""
    if f.space != POSITION:
        raise WrongSpaceError("fft_forward expects a position-space function")
    g = f.grid
    raw = np.fft.fftshift(np.fft.fftn(f.values))
    vals = g.cell_volume * raw * _centered_sign(g)
    return GridFunction(g, vals, FREQUENCY)


def fft_inverse(F: GridFunction) -> GridFunction:
    """Inverse transform, centered frequency lattice -> position space."""
    if F.space != FREQUENCY:
        raise WrongSpaceError("fft_inverse expects a frequency-space function")
    g = F.grid
    pre = np.fft.ifftshift(F.values * _centered_sign(g))
    vals = (g.dxi * g.N) ** g.d * np.fft.ifftn(pre)
    return GridFunction(g, vals, POSITION)


def lp_norm(f: GridFunction, p: float) -> float:
    """Riemann-sum L^p norm (dx^d sum |f|^p)^(1/p); p = inf gives the max."""
    if f.space != POSITION:
        raise WrongSpaceError("lp_norm is defined on position-space functions")
    if not (p >= 1):
        raise ValueError(f"exponent p must satisfy p >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def l2_norm_frequency(F: GridFunction) -> float:
    """L^2 norm computed on the frequency side (dxi^d sum |F|^2)^(1/2)."""
    if F.space != FREQUENCY:
        raise WrongSpaceError("expected a frequency-space function")
    return float(np.sqrt(F.grid.dxi**F.grid.d * np.sum(np.abs(F.values) ** 2)))


def lorentz_weak_norm(f: GridFunction, q: float) -> float:
    """Weak-L^q quasi-norm sup_t t |{|f| > t}|^(1/q) on the sampled measure.

    The supremum over thresholds is attained just below an attained value of
    |f|; with values sorted in decreasing order v_1 >= v_2 >= ..., the k-th
    candidate is v_k (k dx^d)^(1/q).
    """
    if f.space != POSITION:
        raise WrongSpaceError("lorentz_weak_norm is defined on position-space functions")
    if not (q >= 1):
        raise ValueError(f"exponent q must satisfy q >= 1, got {q}")
    a = np.abs(f.values).ravel()
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    a = np.sort(a)[::-1]
    measures = f.grid.cell_volume * np.arange(1, a.size + 1)
    return float(np.max(a * measures ** (1.0 / q)))


#: Values of the cube weight below this are flushed to zero (harmless underflow).
WEIGHT_UNDERFLOW = 1e-300


def weight_wQ(x: Sequence[float], corner: Sequence[float], h: float) -> float:
    """Decay weight (1 + dist(x, Q)/h)^(-100 d) for the cube Q = corner + [0,h)^d.

    The steep exponent 100 d is kept verbatim; results underflowing below
    1e-300 are flushed to exactly 0.
    """
    if not (h > 0):
        raise ValueError(f"cube side must be positive, got {h}")
    pt = np.asarray(x, dtype=float).reshape(-1)
    lo = np.asarray(corner, dtype=float).reshape(-1)
    if pt.size != lo.size:
        raise InvalidDimensionError("point and cube corner dimensions differ")
    d = pt.size
    gap = np.maximum(np.maximum(lo - pt, pt - (lo + h)), 0.0)
    dist = float(np.sqrt(np.sum(gap**2)))
    base = 1.0 + dist / h
    with np.errstate(over="ignore"):
        val = base ** (-100.0 * d)
    return float(val) if val >= WEIGHT_UNDERFLOW else 0.0


@dataclass(frozen=True)
class SeparatedSet:
    """A finite set of points with a certified minimal pairwise separation."""

    points: np.ndarray
    separation: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if len(pts) > 1:
            actual = min_pairwise_distance(pts)
            if actual + 1e-12 < self.separation:
                raise ValueError(
                    f"claimed separation {self.separation} exceeds actual minimum {actual}"
                )

    def __len__(self) -> int:
        return len(self.points)


def min_pairwise_distance(points: np.ndarray) -> float:
    """Exhaustive minimal pairwise distance (desk scale)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if n < 2:
        return np.inf
    best = np.inf
    for i in range(n - 1):
        d2 = np.sum((pts[i + 1 :] - pts[i]) ** 2, axis=1)
        best = min(best, float(np.sqrt(d2.min())))
    return best


def sample_on_set(f: GridFunction, lam: SeparatedSet, p: float) -> float:
    """l^p norm of f over the points of lam, by nearest-grid-point evaluation."""
    if f.space != POSITION:
        raise WrongSpaceError("sample_on_set evaluates position-space functions")
    vals = np.array([f.values[f.grid.nearest_index(pt)] for pt in lam.points])
    a = np.abs(vals)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    return float(np.sum(a**p) ** (1.0 / p))


def random_band_limited(
    grid: BoxGrid, band: float, rng: np.random.Generator
) -> GridFunction:
    """Random trigonometric polynomial with frequency support in B(0, band).

    Coefficients are i.i.d. complex Gaussians on the lattice frequencies inside
    the ball; used by the sampling-inequality property tests.
    """
    mask = grid.frequency_radius_sq() <= band**2
    coeffs = np.zeros(grid.shape, dtype=complex)
    n = int(mask.sum())
    coeffs[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return fft_inverse(GridFunction(grid, coeffs, FREQUENCY))
