"""Deterministic and random potentials, decompositions, and sub-gaussian sampling.

Potentials are piecewise constant on cubes of a scale-h lattice:

    V_omega(x) = sum_j omega_j v_j 1_Q((x - j)/h),   Q = [0,1)^d,

with i.i.d. symmetric Bernoulli or standard Gaussian omega_j.  The cells are
aligned to h * Z^d, enumerated lexicographically, and the draw for each cell is
a deterministic function of (seed, cell index) via a counter-based generator.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write_bytes
from .errors import (
    BoxTooSmallError,
    InvalidDimensionError,
    MisalignedScaleError,
    ParameterOverflowError,
)
from .grid import POSITION, BoxGrid, GridFunction, lp_norm

BERNOULLI = "bernoulli-symmetric"
GAUSSIAN = "gaussian-standard"
_DISTRIBUTIONS = (BERNOULLI, GAUSSIAN)

#: Golden-ratio stream multiplier; decorrelates per-stream Philox keys.
_STREAM_MIX = 0x9E3779B9


def _stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); schedule-independent."""
    return np.random.Generator(np.random.Philox(key=seed ^ (stream * _STREAM_MIX)))


@dataclass(frozen=True)
class RandomizationScheme:
    """Randomization scale, sign/Gaussian distribution, and master seed."""

    h: float
    distribution: str = BERNOULLI
    seed: int = 0

    def __post_init__(self):
        if not (self.h > 0):
            raise MisalignedScaleError(f"randomization scale must be positive, got {self.h}")
        if self.distribution not in _DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")

    def draw(self, count: int, stream: int = 0) -> np.ndarray:
        """Deterministic i.i.d. draws; `stream` separates Monte-Carlo samples."""
        rng = _stream_rng(self.seed, stream)
        if self.distribution == BERNOULLI:
            return rng.integers(0, 2, size=count) * 2.0 - 1.0
        return rng.standard_normal(count)


def _cells_per_side(grid: BoxGrid, h: float) -> int:
    m = h / grid.dx
    if abs(m - round(m)) > 1e-9 or round(m) < 1:
        raise MisalignedScaleError(f"h={h} is not an integer multiple of dx={grid.dx}")
    m = int(round(m))
    if grid.N % m != 0:
        raise MisalignedScaleError(f"h={h} does not evenly tile the box (N={grid.N})")
    return grid.N // m


def _cell_index_arrays(grid: BoxGrid, h: float) -> tuple[int, np.ndarray]:
    """Map each grid point to its flat cell index on the h-lattice (C order)."""
    n_cells = _cells_per_side(grid, h)
    m = grid.N // n_cells
    per_axis = np.arange(grid.N) // m
    flat = np.zeros(grid.shape, dtype=np.int64)
    for i in range(grid.d):
        shape = (1,) * i + (-1,) + (1,) * (grid.d - 1 - i)
        flat = flat * n_cells + per_axis.reshape(shape)
    return n_cells**grid.d, flat


def anderson_potential(coeffs: dict, h: float, grid: BoxGrid) -> GridFunction:
    """Piecewise-constant potential sum_j v_j 1_Q((x-j)/h), j in h*Z^d.

    `coeffs` maps integer lattice indices j (tuples, or ints for d=1) to
    coefficients v_j; the cell of index j is j*h + [0, h)^d.
    """
    _cells_per_side(grid, h)
    vals = np.zeros(grid.shape, dtype=complex)
    m = int(round(h / grid.dx))
    for j, v in coeffs.items():
        idx = (j,) if np.isscalar(j) else tuple(j)
        if len(idx) != grid.d:
            raise InvalidDimensionError(f"cell index {idx} has wrong dimension")
        sl = []
        for ji in idx:
            start = int(round((ji * h + grid.L / 2) / grid.dx))
            if start < 0 or start + m > grid.N:
                raise BoxTooSmallError(f"cell {idx} at scale h={h} does not fit the box")
            sl.append(slice(start, start + m))
        vals[tuple(sl)] = v
    return GridFunction(grid, vals, POSITION)


@dataclass(frozen=True)
class RandomPotential:
    """A realized randomization V_omega of a deterministic profile."""

    profile: GridFunction
    scheme: RandomizationScheme
    omega: np.ndarray  # flat, lexicographic over the full cell lattice
    realized: GridFunction


def randomize(
    profile: GridFunction, scheme: RandomizationScheme, stream: int = 0
) -> RandomPotential:
    """Multiply the profile by i.i.d. omega_j, constant on each h-cell.

    Deterministic in (scheme.seed, stream); cells are enumerated
    lexicographically over the integer lattice so results are independent of
    any parallel schedule.
    """
    grid = profile.grid
    n_cells, flat = _cell_index_arrays(grid, scheme.h)
    omega = scheme.draw(n_cells, stream=stream)
    realized = GridFunction(grid, profile.values * omega[flat], POSITION)
    return RandomPotential(profile=profile, scheme=scheme, omega=omega, realized=realized)


def tube_potential(eps: float, grid: BoxGrid, d: int | None = None) -> GridFunction:
    """Counterexample profile eps * 1_T with T = {|x_1| < 1/eps, |x'| < eps^(-1/2)}."""
    if not (0 < eps <= 1):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    d = grid.d if d is None else d
    if d != grid.d:
        raise InvalidDimensionError("tube dimension must match the grid")
    half = [1.0 / eps] + [eps**-0.5] * (d - 1)
    if 2 * half[0] > grid.L:
        raise BoxTooSmallError(f"tube of length {2 * half[0]} exceeds box side {grid.L}")
    mask = np.ones(grid.shape, dtype=bool)
    for ax, hw in zip(grid.position_axes(), half):
        mask &= np.abs(np.broadcast_to(ax, grid.shape)) < hw
    return GridFunction(grid, eps * mask.astype(complex), POSITION)


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C^1 ramp: 0 for u <= 0, 1 for u >= 1, cosine transition between."""
    t = np.clip(u, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * t))


def knapp_tube(
    R: float, q: float, d: int, grid: BoxGrid, smooth: bool = False
) -> GridFunction:
    """L^q-normalized tube profile dual to a sphere cap of width R^(-1/2).

    The tube has full widths R (long axis) and R^(1/2) (short axes), so its
    volume is R^((d+1)/2) and the sharp profile with peak R^(-(d+1)/(2q)) has
    unit L^q norm.  The smooth variant transitions over a quarter of each
    half-width and is rescaled to unit L^q norm on the grid.
    """
    if R < 4:
        raise ValueError(f"tube scale must satisfy R >= 4, got {R}")
    if d != grid.d:
        raise InvalidDimensionError("tube dimension must match the grid")
    half = [R / 2.0] + [R**0.5 / 2.0] * (d - 1)
    if 2 * half[0] > grid.L:
        raise BoxTooSmallError(f"tube of length {R} exceeds box side {grid.L}")
    peak = R ** (-(d + 1) / (2.0 * q))
    if not smooth:
        mask = np.ones(grid.shape, dtype=bool)
        for ax, hw in zip(grid.position_axes(), half):
            mask &= np.abs(np.broadcast_to(ax, grid.shape)) < hw
        return GridFunction(grid, peak * mask.astype(complex), POSITION)
    vals = np.ones(grid.shape)
    for ax, hw in zip(grid.position_axes(), half):
        edge = hw / 2.0
        profile = _smooth_step((hw - np.abs(ax)) / edge)
        vals = vals * np.broadcast_to(profile, grid.shape)
    f = GridFunction(grid, vals.astype(complex), POSITION)
    scale = 1.0 / lp_norm(f, q)
    return GridFunction(grid, scale * vals.astype(complex), POSITION)


def dyadic_levels(V: GridFunction) -> list[tuple[float, GridFunction]]:
    """Horizontal dyadic decomposition by super-level-set measure.

    H_i is the smallest threshold with |{|V| > t}| <= 2^(i-1) (grid measure
    dx^d * count, infimum over attained values and 0), and V_i collects the
    points whose level index i is maximal with H_i >= |V|.  The pieces have
    disjoint supports and sum to V exactly.
    """
    grid = V.grid
    a = np.abs(V.values)
    nz = a[a > 0]
    if nz.size == 0:
        return []
    vol = grid.cell_volume
    sorted_vals = np.sort(nz)  # ascending
    total = sorted_vals.size

    def measure_above(t: float) -> float:
        return vol * float(np.sum(a > t))

    heights: list[float] = []
    i = 0
    while True:
        budget = 2.0 ** (i - 1)
        # smallest attained threshold (or 0) whose super-level measure fits
        if measure_above(0.0) <= budget + 1e-15:
            heights.append(0.0)
            break
        # candidates: attained values, ascending; measure_above is right-continuous
        # and decreasing, so binary search over sorted values suffices at desk scale
        candidates = np.unique(sorted_vals)
        hi = None
        for t in candidates:
            if measure_above(t) <= budget * (1 + 1e-12):
                hi = float(t)
                break
        heights.append(hi if hi is not None else float(candidates[-1]))
        i += 1
        if i > 2 * total + 4:  # safety; cannot take this many levels
            break

    # level of a value v > 0: the largest i with H_i >= v (H is non-increasing)
    out: list[tuple[float, GridFunction]] = []
    assigned = np.zeros(grid.shape, dtype=bool)
    for i, H in enumerate(heights[:-1]):
        H_next = heights[i + 1]
        sel = (a > 0) & (a <= H * (1 + 1e-12)) & (a > H_next * (1 + 1e-12)) & ~assigned
        piece = np.where(sel, V.values, 0.0)
        assigned |= sel
        out.append((H, GridFunction(grid, piece, POSITION)))
    # anything at or below the final height (which is 0 by construction) is none
    leftovers = (a > 0) & ~assigned
    if np.any(leftovers):
        out.append((heights[-1], GridFunction(grid, np.where(leftovers, V.values, 0.0), POSITION)))
    return [(H, piece) for (H, piece) in out if np.any(piece.values != 0)]


@dataclass(frozen=True)
class SparseBall:
    """One ball of a sparse family: center, and the flat grid indices it owns."""

    center: np.ndarray
    indices: np.ndarray  # flat indices into the grid array


@dataclass(frozen=True)
class SparseLevel:
    """One level of a sparse decomposition: families of radius-R balls.

    Within each family the centers are (R * n_cap)^gamma-separated, where
    n_cap >= the family's ball count, so the gamma-sparse separation
    requirement holds for the realized counts.
    """

    gamma: float
    K: int
    level_index: int
    radius: float
    families: list[list[SparseBall]] = field(default_factory=list)

    @property
    def family_count(self) -> int:
        return len(self.families)

    @property
    def max_balls_per_family(self) -> int:
        return max((len(f) for f in self.families), default=0)


def occupied_unit_cells(V: GridFunction) -> dict[tuple[int, ...], np.ndarray]:
    """Group the nonzero grid points of V into unit cells of the integer lattice."""
    grid = V.grid
    flat_nz = np.flatnonzero(V.values)
    if flat_nz.size == 0:
        return {}
    coords = np.unravel_index(flat_nz, grid.shape)
    cells: dict[tuple[int, ...], list[int]] = {}
    for k, flat in enumerate(flat_nz):
        pos = [-grid.L / 2 + grid.dx * coords[i][k] for i in range(grid.d)]
        cell = tuple(int(math.floor(p)) for p in pos)
        cells.setdefault(cell, []).append(int(flat))
    return {c: np.asarray(ix, dtype=np.int64) for c, ix in cells.items()}


def sparse_split(
    V_i: GridFunction,
    gamma: float,
    K: int,
    level_index: int | None = None,
    radius: float | None = None,
) -> SparseLevel:
    """Greedy gamma-sparse clustering of a dyadic piece into families of balls.

    Repeatedly: pick the unit cell of largest remaining mass as a ball center,
    absorb every remaining cell within the ball radius, and defer cells whose
    centers would violate the (R * n_cap)^gamma separation to the next family.
    The default radius is the worst-case 2^(i * gamma^K) of the counting law;
    a radius exceeding the box is reported as an error, never clipped.
    """
    if gamma < 1 or K < 1:
        raise ValueError("sparsity parameters must satisfy gamma >= 1, K >= 1")
    grid = V_i.grid
    cells = occupied_unit_cells(V_i)
    ncells = len(cells)
    if ncells == 0:
        i = level_index if level_index is not None else 0
        return SparseLevel(gamma, K, i, radius or 1.0, [])
    if level_index is None:
        level_index = max(0, math.ceil(math.log2(ncells)))
    if ncells > 2**level_index:
        raise ParameterOverflowError(
            f"{ncells} occupied cells exceed the 2^{level_index} level budget"
        )
    R = float(radius) if radius is not None else 2.0 ** (level_index * gamma**K)
    if R > grid.L:
        raise ParameterOverflowError(f"ball radius {R} exceeds box side {grid.L}")

    abs_vals = np.abs(V_i.values).ravel()
    centers = {c: np.asarray(c, dtype=float) + 0.5 for c in cells}
    mass = {c: float(abs_vals[ix].sum()) for c, ix in cells.items()}
    n_cap = min(2**level_index, ncells)
    sep_threshold = (R * n_cap) ** gamma

    remaining = set(cells)
    families: list[list[SparseBall]] = []
    while remaining:
        family: list[SparseBall] = []
        family_centers: list[np.ndarray] = []
        deferred: set = set()
        pool = set(remaining)
        while pool:
            seed_cell = max(pool, key=lambda c: (mass[c],) + c)
            ctr = centers[seed_cell]
            if any(np.linalg.norm(ctr - fc) < sep_threshold for fc in family_centers):
                pool.discard(seed_cell)
                deferred.add(seed_cell)
                continue
            absorbed = [
                c for c in pool if np.linalg.norm(centers[c] - ctr) <= R - 0.5 * math.sqrt(grid.d)
            ]
            indices = np.concatenate([cells[c] for c in absorbed])
            family.append(SparseBall(center=ctr, indices=np.sort(indices)))
            family_centers.append(ctr)
            pool.difference_update(absorbed)
        families.append(family)
        remaining = deferred
    return SparseLevel(gamma, K, level_index, R, families)


def sample_subgaussian(scheme: RandomizationScheme, count: int, stream: int = 0) -> np.ndarray:
    """Draw `count` i.i.d. samples from the scheme's distribution."""
    if count < 100:
        raise ValueError(f"need at least 100 samples, got {count}")
    return scheme.draw(count, stream=stream)


def subgaussian_norm_est(samples: np.ndarray) -> float:
    """Empirical psi_2 norm: smallest t on a grid with mean exp(|X|^2/t^2) <= 2."""
    x = np.abs(np.asarray(samples, dtype=float))
    if np.all(x == 0):
        return 0.0
    sup = float(x.max())

    def ok(t: float) -> bool:
        with np.errstate(over="ignore"):
            return float(np.mean(np.exp(np.minimum((x / t) ** 2, 700.0)))) <= 2.0

    lo, hi = 1e-6, sup / math.sqrt(math.log(2.0)) + 1e-6
    if ok(lo):
        return lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Serialization: flat binary + JSON sidecar
# ---------------------------------------------------------------------------

_MAGIC = b"SLPT"
_DIST_TAGS = {BERNOULLI: 1, GAUSSIAN: 2, "none": 0}
_TAG_DIST = {v: k for k, v in _DIST_TAGS.items()}


def save_field(
    path: str,
    f: GridFunction,
    h: float = 0.0,
    distribution: str = "none",
    seed: int = 0,
) -> None:
    """Write a grid function as little-endian complex64 with a binary header.

    Header: magic, d, N, frequency flag, L, h, distribution tag, seed.  A JSON
    sidecar `<path>.json` records the same metadata human-readably.  Writes are
    atomic (temp file + rename).
    """
    grid = f.grid
    freq_flag = 1 if f.space == "frequency" else 0
    header = struct.pack(
        "<4sBIBddBq",
        _MAGIC,
        grid.d,
        grid.N,
        freq_flag,
        grid.L,
        h,
        _DIST_TAGS[distribution],
        seed,
    )
    payload = np.ascontiguousarray(f.values, dtype="<c8").tobytes()
    for target, data in (
        (path, header + payload),
        (
            path + ".json",
            json.dumps(
                {
                    "d": grid.d,
                    "N": grid.N,
                    "L": grid.L,
                    "h": h,
                    "space": f.space,
                    "distribution": distribution,
                    "seed": seed,
                },
                indent=2,
            ).encode(),
        ),
    ):
        atomic_write_bytes(target, data)


def load_field(path: str) -> tuple[GridFunction, dict]:
    """Read a field written by save_field; returns (function, metadata)."""
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sBIBddBq"))
        magic, d, N, freq_flag, L, h, dist_tag, seed = struct.unpack("<4sBIBddBq", header)
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a spectral_lab potential file")
        raw = np.frombuffer(fh.read(), dtype="<c8")
    grid = BoxGrid(d=d, L=L, N=N)
    values = raw.astype(complex).reshape(grid.shape)
    space = "frequency" if freq_flag else POSITION
    meta = {"h": h, "distribution": _TAG_DIST[dist_tag], "seed": seed, "space": space}
    return GridFunction(grid, values, space), meta
