"""Frequency-space symbols: free resolvent, smoothing, square-root family,
minorizing bump, and sphere quadrature/extension operators.

Radial frequency variables are measured as s = |2 pi xi| so that the free
Laplacian has symbol s^2 and the resolvent (s^2 - z)^(-1) is singular on the
sphere s = lambda.  Extension operators quadrature the sphere {|nu| = lambda}
in plain xi units, matching e(x . nu) phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import (
    BranchAmbiguityError,
    InvalidDimensionError,
    SingularSymbolError,
)
from .grid import FREQUENCY, POSITION, BoxGrid, GridFunction, fft_forward, fft_inverse


@dataclass(frozen=True)
class ComplexEnergy:
    """Energy z = (lambda + i eps)^2 with |eps| <= lambda/10 (the quantified '<<')."""

    lam: float
    eps: float
    z: complex = field(init=False)

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if abs(self.eps) > self.lam / 10 + 1e-15:
            raise ValueError(
                f"|eps| = {abs(self.eps)} exceeds lambda/10 = {self.lam / 10}"
            )
        object.__setattr__(self, "z", complex(self.lam, self.eps) ** 2)


@dataclass(frozen=True)
class MultiplierSpec:
    """A frequency-lattice symbol plus metadata.

    `symbol` may be None for boundary-value resolvents that are only usable
    through their closed-form position kernel (`position_kernel`, a radial
    function of |x|).
    """

    grid: BoxGrid
    symbol: np.ndarray | None
    delta: float | None = None
    support: str = ""
    smoothing_scale: float | None = None
    position_kernel: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.symbol is not None:
            vals = np.asarray(self.symbol, dtype=complex)
            if vals.shape != self.grid.shape:
                raise ValueError("symbol shape does not match grid")
            vals = vals.copy()
            vals.flags.writeable = False
            object.__setattr__(self, "symbol", vals)

    def apply(self, f: GridFunction) -> GridFunction:
        """Apply the multiplier to a position-space function via FFT."""
        if self.symbol is None:
            raise SingularSymbolError("symbol-free spec cannot be applied directly")
        F = fft_forward(f)
        return fft_inverse(GridFunction(self.grid, F.values * self.symbol, FREQUENCY))


def _two_pi_radius(grid: BoxGrid) -> np.ndarray:
    return 2 * np.pi * np.sqrt(grid.frequency_radius_sq())


def free_kernel(d: int, lam: complex) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form position kernel of (-Delta - lam^2)^(-1) as a function of r = |x|.

    d=1: (i/(2 lam)) e^{i lam r};  d=2: (i/4) H_0^1(lam r);  d=3: e^{i lam r}/(4 pi r).
    """
    if d == 1:
        return lambda r: (1j / (2 * lam)) * np.exp(1j * lam * np.asarray(r))
    if d == 2:
        return lambda r: 0.25j * special.hankel1(0, lam * np.asarray(r))
    if d == 3:
        return lambda r: np.exp(1j * lam * np.asarray(r)) / (4 * np.pi * np.asarray(r))
    raise InvalidDimensionError(f"no closed-form kernel for d={d}")


def resolvent_symbol(
    z: ComplexEnergy | complex, grid: BoxGrid, regularization: float | None = None
) -> MultiplierSpec:
    """Free-resolvent symbol m(xi) = (|2 pi xi|^2 - z)^(-1) on the lattice."""
    if isinstance(z, ComplexEnergy):
        zval = z.z
    else:
        zval = complex(z)
    if zval.imag == 0 and zval.real >= 0:
        if regularization is None or not (regularization > 0):
            raise SingularSymbolError(
                "real nonnegative energy requires an explicit regularization > 0"
            )
        lam = math.sqrt(zval.real)
        zval = complex(lam, regularization) ** 2
    s = _two_pi_radius(grid)
    lam_c = np.sqrt(zval + 0j)
    if lam_c.imag < 0:
        lam_c = -lam_c
    return MultiplierSpec(
        grid=grid,
        symbol=1.0 / (s**2 - zval),
        support="all-frequencies",
        position_kernel=free_kernel(grid.d, lam_c) if grid.d in (1, 2, 3) else None,
    )


def resolvent_boundary(lam: float, grid: BoxGrid) -> MultiplierSpec:
    """Boundary value m(xi) = (|2 pi xi|^2 - (lam + i0)^2)^(-1), kernel-only.

    The distributional symbol is never evaluated on the lattice; smoothing via
    smooth_symbol multiplies the closed-form position kernel by the cutoff,
    which realizes the convolution gamma_R * m exactly.
    """
    return MultiplierSpec(
        grid=grid,
        symbol=None,
        support="all-frequencies",
        position_kernel=free_kernel(grid.d, complex(lam)),
    )


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C^1 transition from 1 at t<=0 to 0 at t>=1."""
    u = np.clip(t, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * u))


def lowhigh_split(m: MultiplierSpec) -> tuple[MultiplierSpec, MultiplierSpec]:
    """Split m into chi*m + (1-chi)*m with chi = 1 on {s <= 3/2}, 0 on {s >= 2}."""
    if m.symbol is None:
        raise SingularSymbolError("cannot split a kernel-only spec")
    s = _two_pi_radius(m.grid)
    chi = _smoothstep(2 * (s - 1.5))
    low = MultiplierSpec(m.grid, chi * m.symbol, support="ball-s<2")
    high = MultiplierSpec(m.grid, m.symbol - low.symbol, support="exterior-s>3/2")
    return low, high


def smoothing_cutoff(grid: BoxGrid, R: float) -> np.ndarray:
    """Radial position-space cutoff: 1 for |x| <= R, 0 for |x| >= 2R, smooth between."""
    r = np.sqrt(grid.position_radius_sq())
    return _smoothstep((r - R) / R)


def smooth_symbol(m: MultiplierSpec, R: float) -> MultiplierSpec:
    """Smoothed symbol gamma_R * m at frequency scale 1/R.

    Computed by multiplying the position-space kernel of m by the cutoff
    (gamma)^vee(x/R) and transforming back.  For kernel-only (boundary value)
    specs the closed-form kernel is used; the log/line singularity at x = 0 is
    represented by its value half a grid cell away, which perturbs the symbol
    by O(dx^d).
    """
    if R < 1:
        raise ValueError(f"smoothing scale must satisfy R >= 1, got {R}")
    grid = m.grid
    cut = smoothing_cutoff(grid, R)
    if m.position_kernel is not None and m.symbol is None:
        r = np.sqrt(grid.position_radius_sq())
        r = np.where(r == 0, grid.dx / 2, r)
        kern = m.position_kernel(r)
    else:
        if m.symbol is None:
            raise SingularSymbolError("spec has neither symbol nor kernel")
        kern = fft_inverse(GridFunction(grid, m.symbol, FREQUENCY)).values
    smoothed = fft_forward(GridFunction(grid, kern * cut, POSITION))
    return MultiplierSpec(
        grid=grid,
        symbol=smoothed.values,
        support=m.support,
        smoothing_scale=1.0 / R,
    )


#: Half-width of the support annulus of C^(delta) symbols around s = 1.
C_NEIGHBORHOOD = 0.25


def _winding_flag(symbol: np.ndarray, mask: np.ndarray) -> bool:
    """True if the symbol's phase accumulates a full turn along a lattice line."""
    sym = symbol.reshape(symbol.shape[0], -1)
    msk = mask.reshape(mask.shape[0], -1)
    for col in range(sym.shape[1]):
        sel = msk[:, col]
        vals = sym[sel, col]
        if len(vals) < 3 or np.any(vals == 0):
            continue
        dphi = np.angle(vals[1:] / vals[:-1])
        if abs(float(np.sum(dphi))) >= 2 * np.pi - 1e-9:
            return True
    return False


def cdelta_sqrt(m_smoothed: MultiplierSpec, delta: float) -> MultiplierSpec:
    """Principal-branch square root of a smoothed resolvent, cut to the annulus.

    The result is supported where ||2 pi xi| - 1| <= 1/4 (identically kept on
    half of that) and carries delta as its roughness parameter, so the modulus
    bound (||2 pi xi|^2 - 1| + delta)^(-1/2) is checkable pointwise.
    """
    if m_smoothed.symbol is None:
        raise SingularSymbolError("need a lattice symbol to take a square root")
    if not (0 < delta <= 1):
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    grid = m_smoothed.grid
    s = _two_pi_radius(grid)
    mask = np.abs(s - 1.0) <= C_NEIGHBORHOOD
    if _winding_flag(m_smoothed.symbol, mask):
        raise BranchAmbiguityError("smoothed symbol winds around 0 near the sphere")
    cut = _smoothstep((np.abs(s - 1.0) - C_NEIGHBORHOOD / 2) / (C_NEIGHBORHOOD / 2))
    return MultiplierSpec(
        grid=grid,
        symbol=np.sqrt(m_smoothed.symbol) * cut,
        delta=delta,
        support="annulus-|s-1|<1/4",
        smoothing_scale=m_smoothed.smoothing_scale,
    )


def cdelta_bound_ratio(spec: MultiplierSpec) -> float:
    """Largest lattice ratio |C(xi)| / (||2 pi xi|^2 - 1| + delta)^(-1/2)."""
    if spec.symbol is None or spec.delta is None:
        raise ValueError("spec must carry a symbol and a delta parameter")
    s = _two_pi_radius(spec.grid)
    envelope = (np.abs(s**2 - 1.0) + spec.delta) ** -0.5
    return float(np.max(np.abs(spec.symbol) / envelope))


# ---------------------------------------------------------------------------
# Minorizing bump phi = c psi * psi
# ---------------------------------------------------------------------------


def _bump_1d_table(n: int = 4001) -> tuple[np.ndarray, np.ndarray]:
    """Self-convolution table of b(4 xi), b the standard C-infinity bump on [-1,1]."""
    t = np.linspace(-0.25, 0.25, n)
    with np.errstate(divide="ignore", over="ignore"):
        inner = 1.0 - (4 * t) ** 2
        b = np.where(inner > 0, np.exp(-1.0 / np.maximum(inner, 1e-300)), 0.0)
    step = t[1] - t[0]
    conv = np.convolve(b, b) * step
    u = np.linspace(-0.5, 0.5, conv.size)
    return u, conv


_BUMP_U, _BUMP_CONV = _bump_1d_table()


def _bump_hat(x: np.ndarray) -> np.ndarray:
    """Fourier transform of b(4 xi) evaluated by quadrature (real, even)."""
    t = np.linspace(-0.25, 0.25, 2001)
    inner = 1.0 - (4 * t) ** 2
    b = np.where(inner > 0, np.exp(-1.0 / np.maximum(inner, 1e-300)), 0.0)
    step = t[1] - t[0]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.cos(2 * np.pi * np.outer(x, t)) @ b * step


def make_phi(R: float, grid: BoxGrid) -> MultiplierSpec:
    """Bump phi_R supported in B(0, 1/R) whose transform dominates 1 on B(0, R).

    phi = c psi * psi with psi a tensor bump supported in [-1/4, 1/4]^d, so
    phi-hat = c psi-hat^2 >= 0 is even, and c is calibrated so phi-hat >= 1 on
    the unit ball; phi_R(xi) = R^d phi(R xi) then minorizes on B(0, R).
    """
    if R < 1:
        raise ValueError(f"scale must satisfy R >= 1, got {R}")
    d = grid.d
    # calibration: minimize prod_i bhat(u_i)^2 over |u| <= 1 on a coarse ball grid
    axes = [np.linspace(-1, 1, 21)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    inside = sum(m**2 for m in mesh) <= 1.0 + 1e-12
    prod = np.ones_like(mesh[0])
    for m in mesh:
        prod = prod * _bump_hat(np.abs(m.ravel())).reshape(m.shape) ** 2
    c = 1.0 / float(prod[inside].min()) * 1.000001
    vals = np.full(grid.shape, c * R**d, dtype=float)
    for ax in grid.frequency_axes():
        u = np.abs(R * np.broadcast_to(ax, grid.shape))
        vals = vals * np.interp(u.ravel(), _BUMP_U, _BUMP_CONV, left=0.0, right=0.0).reshape(
            grid.shape
        )
    return MultiplierSpec(grid=grid, symbol=vals.astype(complex), support=f"ball-|xi|<1/{R}")


# ---------------------------------------------------------------------------
# Sphere nets and extension operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereNet:
    """Quadrature nodes on the sphere {|nu| = lambda} with 1/R separation."""

    lam: float
    separation: float
    nodes: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float)).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.nodes)


def _fibonacci_sphere(n: int) -> np.ndarray:
    """Area-uniform spiral nodes on the unit 2-sphere."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + math.sqrt(5)) * i
    return np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
    )


def _min_nn_distance(pts: np.ndarray) -> float:
    from .grid import min_pairwise_distance

    return min_pairwise_distance(pts)


def sphere_net(lam: float, R: float, d: int, max_nodes: int | None = None) -> SphereNet:
    """1/R-separated quadrature net on the sphere of radius lam.

    d=2: equispaced angles with arc-length weights; d=3: Fibonacci spiral with
    equal area weights.  Node count is the largest meeting the separation, and
    can be capped with max_nodes (a sparser net is still a valid net).
    """
    if not (lam > 0) or R < 2:
        raise ValueError("need lambda > 0 and R >= 2")
    sep = 1.0 / R
    if d == 2:
        n = max(4, int(math.floor(2 * math.pi * lam * R)))
        while n > 4 and 2 * lam * math.sin(math.pi / n) < sep:
            n -= 1
        if max_nodes is not None:
            n = min(n, max_nodes)
        angles = 2 * np.pi * np.arange(n) / n
        nodes = lam * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weights = np.full(n, 2 * np.pi * lam / n)
        return SphereNet(lam, sep, nodes, weights)
    if d == 3:
        n = max(8, int(4 * math.pi * (lam * R) ** 2 / 1.5))
        if max_nodes is not None:
            n = min(n, max_nodes)
        while n > 8:
            nodes = lam * _fibonacci_sphere(n)
            if _min_nn_distance(nodes) >= sep:
                break
            n = int(n * 0.9)
        else:
            nodes = lam * _fibonacci_sphere(n)
        weights = np.full(n, 4 * math.pi * lam**2 / n)
        return SphereNet(lam, sep, nodes, weights)
    raise InvalidDimensionError(f"sphere nets require d in {{2, 3}}, got {d}")


def extension_apply(net: SphereNet, g: np.ndarray, grid: BoxGrid) -> GridFunction:
    """Extension E g(x) = sum_nu w_nu g(nu) e(x . nu) evaluated on the grid."""
    g = np.asarray(g, dtype=complex).reshape(-1)
    if g.size != len(net):
        raise ValueError("node values must match the net size")
    coeff = net.weights * g
    phases = [
        np.exp(2j * np.pi * np.outer(net.nodes[:, i], grid.positions_1d()))
        for i in range(grid.d)
    ]
    if grid.d == 1:
        vals = coeff @ phases[0]
    elif grid.d == 2:
        vals = np.einsum("v,vi,vj->ij", coeff, phases[0], phases[1], optimize=True)
    else:
        vals = np.einsum("v,vi,vj,vk->ijk", coeff, phases[0], phases[1], phases[2], optimize=True)
    return GridFunction(grid, vals, POSITION)


def discres_matrix(net: SphereNet, targets: np.ndarray) -> np.ndarray:
    """Quadrature-normalized extension matrix S[x, nu] = e(nu . x) / n.

    Rows are target points, columns are net nodes.  The 1/n weight realizes
    the surface-measure normalization under which the domain carries the
    averaged l^2 norm; downstream mixed norms are computed against that norm.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n = len(net)
    if targets.shape[0] * n > 64 * 10**6:
        from .errors import SizeOverflowError

        raise SizeOverflowError("discres matrix exceeds dense desk-scale storage")
    phase = targets @ net.nodes.T
    return np.exp(2j * np.pi * phase) / n
