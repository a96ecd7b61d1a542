"""Eigenvalue location in the complex plane and the spectral bound formulas.

A point z off the positive half-axis is an eigenvalue of -Laplacian + V
exactly when I + R0(z)V is singular.  Since I + R0(z)V differs from the
identity only on functions supported where V is nonzero, the singularity test
reduces to the smallest singular value of a |supp V|-dimensional block, which
this module scans over rectangles in the z-plane.  The bound formulas
(lambda-power over bracket factors) are pure arithmetic with <x> = 2 + |x|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EndpointExponentError, RegionTouchesSpectrumWarning, SizeOverflowError
from .grid import (
    FREQUENCY,
    POSITION,
    BoxGrid,
    GridFunction,
    fft_inverse,
    lorentz_weak_norm,
    lp_norm,
)
from .opnorm import DENSE_LIMIT, _potential_field

BRACKET_SHIFT = 2.0
CANDIDATE_THRESHOLD = 0.02


def bracket(x: float) -> float:
    """The regularized magnitude <x> = 2 + |x| (strictly positive, >= 2)."""
    return BRACKET_SHIFT + abs(x)


@dataclass(frozen=True)
class SpectralScan:
    """Smallest-singular-value landscape of I + R0(z)V over a z-rectangle."""

    region: tuple[float, float, float, float]  # (re_min, re_max, im_min, im_max)
    resolution: tuple[int, int]
    re_grid: np.ndarray
    im_grid: np.ndarray
    sigma_min: np.ndarray  # shape (n_re, n_im)
    candidates: tuple[tuple[complex, float], ...]
    threshold: float = CANDIDATE_THRESHOLD

    def __post_init__(self):
        lo_re, hi_re, lo_im, hi_im = self.region
        for z, s in self.candidates:
            if not (s < self.threshold):
                raise ValueError("candidate above threshold")
            if not (lo_re < z.real < hi_re and lo_im < z.imag < hi_im):
                raise ValueError("candidate on the region boundary")


def _support_indices(field_: GridFunction, stride: int) -> np.ndarray:
    """Multi-indices (npts, d) of nonzero potential values, optionally strided."""
    grid = field_.grid
    mask = field_.values != 0
    if stride > 1:
        keep = np.zeros(grid.shape, dtype=bool)
        sl = tuple(slice(None, None, stride) for _ in range(grid.d))
        keep[sl] = True
        mask = mask & keep
    flat = np.flatnonzero(mask)
    return np.stack(np.unravel_index(flat, grid.shape), axis=1)


def _torus_kernel(grid: BoxGrid, z: complex) -> np.ndarray:
    """Position-space kernel of R0(z) on the periodic box (one inverse FFT)."""
    s2 = grid.frequency_radius_sq() * (2 * np.pi) ** 2
    denom = s2 - z
    small = np.abs(denom) < 1e-12
    if np.any(small):
        denom = np.where(small, 1e-12, denom)
    sym = GridFunction(grid, 1.0 / denom, FREQUENCY)
    return fft_inverse(sym).values


def _block_matrix(
    grid: BoxGrid, kernel: np.ndarray, idx: np.ndarray, v_vals: np.ndarray, cell_vol: float
) -> np.ndarray:
    """I + R0 V restricted to the support block, via wrapped-difference gather."""
    diff = idx[:, None, :] - idx[None, :, :]  # (n, n, d)
    wrapped = tuple((diff[..., i] + grid.N // 2) % grid.N for i in range(grid.d))
    B = kernel[wrapped] * (v_vals[None, :] * cell_vol)
    B[np.diag_indices(len(idx))] += 1.0
    return B


def sigma_min_scan(
    V_omega,
    region: tuple[float, float, float, float],
    resolution: tuple[int, int],
    threshold: float = CANDIDATE_THRESHOLD,
    stride: int = 1,
) -> SpectralScan:
    """Scan sigma_min(I + R0(z)V) on a rectangle of z values.

    `stride` coarsens the support sampling (every stride-th grid point per
    axis) for large supports; the represented potential is the sampled one,
    with the cell volume rescaled accordingly.
    """
    lo_re, hi_re, lo_im, hi_im = region
    n_re, n_im = resolution
    if lo_im <= 0 <= hi_im and hi_re >= 0:
        warnings.warn(
            "scan region touches [0, inf): continuous spectrum, sigma_min dips are not "
            "eigenvalue evidence there",
            RegionTouchesSpectrumWarning,
        )
    field_ = _potential_field(V_omega)
    grid = field_.grid
    idx = _support_indices(field_, stride)
    re_grid = np.linspace(lo_re, hi_re, n_re)
    im_grid = np.linspace(lo_im, hi_im, n_im)
    if len(idx) == 0:
        sig = np.ones((n_re, n_im))
        return SpectralScan(region, resolution, re_grid, im_grid, sig, ())
    if len(idx) > DENSE_LIMIT:
        raise SizeOverflowError(
            f"support block has {len(idx)} points (> {DENSE_LIMIT}); increase stride"
        )
    v_vals = field_.values[tuple(idx.T)]
    cell_vol = (grid.dx * stride) ** grid.d
    sig = np.empty((n_re, n_im))
    for i, re in enumerate(re_grid):
        for j, im in enumerate(im_grid):
            kernel = _torus_kernel(grid, complex(re, im))
            B = _block_matrix(grid, kernel, idx, v_vals, cell_vol)
            sig[i, j] = float(np.linalg.svd(B, compute_uv=False)[-1])
    cands = []
    for i in range(1, n_re - 1):
        for j in range(1, n_im - 1):
            s = sig[i, j]
            if s >= threshold:
                continue
            neigh = sig[i - 1 : i + 2, j - 1 : j + 2].copy()
            neigh[1, 1] = np.inf
            if s < neigh.min():
                cands.append((complex(re_grid[i], im_grid[j]), s))
    return SpectralScan(region, resolution, re_grid, im_grid, sig, tuple(cands), threshold)


def sigma_min_full(V_omega, z: complex) -> float:
    """sigma_min of the full discretized I + R0(z)V (materializable grids only).

    The full operator is block triangular against the support splitting, so
    this is a cross-check for the reduced scan, not a faster path.
    """
    field_ = _potential_field(V_omega)
    grid = field_.grid
    n = grid.N**grid.d
    if n > DENSE_LIMIT:
        raise SizeOverflowError(f"{n} grid points exceed the dense limit")
    kernel = _torus_kernel(grid, z)
    idx_all = np.stack(
        np.unravel_index(np.arange(n), grid.shape), axis=1
    )
    diff = idx_all[:, None, :] - idx_all[None, :, :]
    wrapped = tuple((diff[..., i] + grid.N // 2) % grid.N for i in range(grid.d))
    M = kernel[wrapped] * (field_.values.ravel()[None, :] * grid.cell_volume)
    M[np.diag_indices(n)] += 1.0
    return float(np.linalg.svd(M, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# Bound formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """One eigenvalue-bound evaluation.

    `violated_at_M` is the threshold multiple lhs / rhs_per_M: the inequality
    lhs <= M * rhs_per_M fails exactly for M below it.
    """

    theorem: str
    inputs: dict = field(compare=False)
    lhs: float
    rhs_per_M: float

    @property
    def violated_at_M(self) -> float:
        if self.rhs_per_M == 0:
            return math.inf
        return self.lhs / self.rhs_per_M


def _check_common(lam: float, eps: float, q: float, d: int) -> None:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if abs(eps) > lam / 10 + 1e-15:
        raise ValueError("|eps| <= lambda/10 is required")
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2, or 3")
    if q <= 0:
        raise ValueError("q must be positive")


def thm1_bound(lam: float, eps: float, h: float, R: float, q: float, d: int) -> float:
    """lambda^(2-d/q) / (<lam h>^(d/2) (log<lam R>)^(7/2))."""
    _check_common(lam, eps, q, d)
    if not (0 < h < R):
        raise ValueError("need 0 < h < R")
    if q > d + 1 + 1e-12:
        raise EndpointExponentError(f"q <= d+1 required, got q={q}")
    return lam ** (2 - d / q) / (
        bracket(lam * h) ** (d / 2) * math.log(bracket(lam * R)) ** 3.5
    )


def _hh_lhs(lam: float, h: float, q: float, d: int) -> float:
    return lam ** (2 - d / q) / (
        bracket(lam * h) ** (d / 2) * math.log(bracket(lam * h)) ** 2
    )


def thm2_bound(
    lam: float, eps: float, h: float, q: float, d: int, delta: float, V=None
) -> tuple[float, float | None]:
    """(LHS with (log<lam h>)^2, weighted norm ||<lam x>^delta V||_q on the grid)."""
    _check_common(lam, eps, q, d)
    if h <= 0:
        raise ValueError("h must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if q > d + 1 + 1e-12:
        raise EndpointExponentError(f"q <= d+1 required, got q={q}")
    lhs = _hh_lhs(lam, h, q, d)
    wnorm = None
    if V is not None:
        field_ = _potential_field(V)
        r = np.sqrt(field_.grid.position_radius_sq())
        weighted = GridFunction(
            field_.grid, (BRACKET_SHIFT + lam * r) ** delta * field_.values, POSITION
        )
        wnorm = lp_norm(weighted, q)
    return lhs, wnorm


def thm3_bound(lam: float, eps: float, h: float, q: float, d: int, V=None, weak: bool = False):
    """LHS as in the weighted bound, valid strictly below the endpoint q = d+1.

    With a potential, also returns ||V||_q, or the (smaller) weak-Lorentz
    quasinorm when `weak` is set.
    """
    _check_common(lam, eps, q, d)
    if h <= 0:
        raise ValueError("h must be positive")
    if q >= d + 1 - 1e-12:
        raise EndpointExponentError(f"strict q < d+1 required, got q={q}")
    lhs = _hh_lhs(lam, h, q, d)
    if V is None:
        return lhs
    field_ = _potential_field(V)
    norm = lorentz_weak_norm(field_, q) if weak else lp_norm(field_, q)
    return lhs, norm


def corollary_ratio(eigs, V, q: float) -> float:
    """sup over eigenvalues z of |z|^(q - d/2) / ||V||_q^q (0 for an empty list)."""
    field_ = _potential_field(V)
    d = field_.grid.d
    vq = lp_norm(field_, q)
    if vq == 0:
        raise ValueError("potential is identically zero")
    best = 0.0
    for z in eigs:
        z = complex(z)
        w = np.sqrt(z)
        if w.real < 0:
            w = -w
        lam, eps = w.real, w.imag
        _check_common(max(lam, 1e-300), eps, q, d)
        best = max(best, abs(z) ** (q - d / 2) / vq**q)
    return best


def destruction_scale(eps: float, q: float, d: int) -> float:
    """Coupling scale h = [eps^((d+1)/(2q)-1) (log(1/eps))^(-7/2)]^(2/d).

    Below this scale a deterministic tube eigenvalue at 1 + i*eps is expected
    to be destroyed by sign randomization at almost every realization.
    """
    if not (0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    if not ((d + 1) / 2 < q <= d + 1 + 1e-12):
        raise EndpointExponentError(f"(d+1)/2 < q <= d+1 required, got q={q}")
    inner = eps ** ((d + 1) / (2 * q) - 1) * math.log(1.0 / eps) ** (-3.5)
    return inner ** (2.0 / d)
