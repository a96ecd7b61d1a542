"""Named experiment scenarios with machine-readable CSV/JSON output.

Each scenario is a pure function of its validated configuration (seed
included): re-running writes byte-identical CSV tables, with wall time
confined to the metadata JSON.  Scenario schemas declare every accepted
parameter with a type and default; unknown keys are rejected before any
computation starts.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0

from ._io import atomic_write_bytes
from .errors import BoxTooSmallError, ConfigError
from .grid import GridFunction, POSITION, lp_norm, make_grid
from .multipliers import (
    ComplexEnergy,
    SphereNet,
    cdelta_sqrt,
    discres_matrix,
    resolvent_boundary,
    resolvent_symbol,
    smooth_symbol,
    sphere_net,
)
from .opnorm import LinearOperatorChain, mixed_norm_av_domain, power_norm
from .eigsearch import destruction_scale, sigma_min_scan, thm3_bound
from .potentials import (
    _cell_index_arrays,
    _stream_rng,
    anderson_potential,
    tube_potential,
)
from .probml import ExceedanceCurve, tail_decay_fit

ARTIFACT_VERSION = "spectral-lab-0.1.0"
DEFAULT_SEED = 0x5EED


@dataclass(frozen=True)
class ScalingFit:
    """A log-log regression with its raw points (fits are recomputable)."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    slope: float
    intercept: float
    r2: float


def fit_loglog(xs, ys) -> ScalingFit:
    """Least-squares fit of log y against log x; stores the raw points."""
    xs = tuple(float(x) for x in xs)
    ys = tuple(float(y) for y in ys)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two (x, y) points")
    if any(x <= 0 for x in xs) or any(y <= 0 for y in ys):
        raise ValueError("log-log fit requires positive data")
    lx, ly = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(xs, ys, float(slope), float(intercept), float(r2))


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated (scenario, parameters) pair."""

    scenario: str
    parameters: dict = field(compare=False)

    def __getitem__(self, key):
        return self.parameters[key]


@dataclass(frozen=True)
class ExperimentReport:
    """Tables (header + rows), named fits, and scalar summary of one run."""

    config: ExperimentConfig
    tables: dict
    fits: dict
    summary: dict


def _coerce(name: str, kind: str, value):
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "str":
            return str(value)
        if kind == "float-list":
            if isinstance(value, str):
                value = value.split(",")
            return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"parameter {name!r} must be {kind}, got {value!r}") from exc
    raise ConfigError(f"unknown schema kind {kind!r}")


def make_config(scenario: str, overrides: dict | None = None) -> ExperimentConfig:
    """Validate overrides against the scenario schema and fill defaults."""
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {scenario!r}; available: {', '.join(sorted(SCENARIOS))}"
        )
    schema = SCENARIOS[scenario].schema
    params = {name: default for name, (_, default) in schema.items()}
    for key, value in (overrides or {}).items():
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for scenario {scenario!r}")
        params[key] = _coerce(key, schema[key][0], value)
    return ExperimentConfig(scenario, params)


def run(config: ExperimentConfig) -> ExperimentReport:
    return SCENARIOS[config.scenario].runner(config)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

_POSITIVE_RADIUS_CACHE: dict[int, float] = {}


def positive_kernel_radius(d: int) -> float:
    """Largest r with Re (surface-measure transform) > 0 on [0, r].

    Computed once per dimension as the first zero of the radial profile
    (a Bessel function for d=2, a spherical sinc for d=3) and cached.
    """
    if d not in _POSITIVE_RADIUS_CACHE:
        if d == 2:
            _POSITIVE_RADIUS_CACHE[d] = float(brentq(lambda r: j0(2 * np.pi * r), 0.2, 0.6))
        elif d == 3:
            _POSITIVE_RADIUS_CACHE[d] = float(
                brentq(lambda r: np.sinc(2 * r), 0.25, 0.75)
            )
        else:
            raise ConfigError("positive-kernel radius defined for d in {2, 3}")
    return _POSITIVE_RADIUS_CACHE[d]


def _tube_cells(R: float, h: float, d: int) -> np.ndarray:
    """Centers of h-cells tiling the tube [-R/2, R/2] x [-sqrt(R)/2, ...]^{d-1}."""
    n1 = max(1, int(round(R / h)))
    n2 = max(1, int(round(math.sqrt(R) / h)))
    ax1 = (np.arange(n1) + 0.5) * h - n1 * h / 2
    axes = [ax1] + [(np.arange(n2) + 0.5) * h - n2 * h / 2] * (d - 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _weighted_sandwich_factory(points: np.ndarray, h: float, net: SphereNet):
    """Closure giving the weighted node matrix for any cell-value vector.

    Precomputes the phase matrix once; per-call cost is one small matrix
    product, so Monte-Carlo sweeps reuse the geometry.
    """
    P = np.exp(2j * np.pi * (points @ net.nodes.T))
    diffs = net.nodes[None, :, :] - net.nodes[:, None, :]
    sinc = np.ones(diffs.shape[:-1])
    for i in range(diffs.shape[-1]):
        sinc = sinc * np.sinc(h * diffs[..., i])
    sw = np.sqrt(net.weights)
    cell_vol = h ** points.shape[1]

    def build(values: np.ndarray) -> np.ndarray:
        K = (P.conj().T * (values * cell_vol)) @ P
        return sw[:, None] * (K * sinc) * sw[None, :]

    return build


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------


def run_knapp_saturation(cfg: ExperimentConfig) -> ExperimentReport:
    d, q = int(cfg["d"]), float(cfg["q"])
    h, lam, n_mc, seed = float(cfg["h"]), float(cfg["lam"]), int(cfg["n_mc"]), int(cfg["seed"])
    R_sweep = cfg["R_sweep"]
    if d != 2:
        raise ConfigError("tube saturation sweep is configured for d=2")
    if len(R_sweep) < 4:
        raise ConfigError("need at least 4 sweep points")
    r_pos = positive_kernel_radius(d)
    if not (2 * h < r_pos):
        raise ConfigError(f"cell scale h={h} violates 2h < r = {r_pos:.4f}")
    amp_exp = -(d + 1) / (2 * q)
    rows = []
    means, pairings = [], []
    for iR, R in enumerate(R_sweep):
        pts = _tube_cells(R, h, d)
        net = sphere_net(lam, R, d)
        build = _weighted_sandwich_factory(pts, h, net)
        amp = R**amp_exp
        # cap datum concentrated where 1 - nu.e1 <= 1/R and |nu_perp| <= 1/sqrt(R)
        cap = (
            R ** ((d - 1) / 4)
            * (np.abs(lam - net.nodes[:, 0]) * R <= 1.0)
            * (np.abs(net.nodes[:, 1]) * math.sqrt(R) <= 1.0)
        ).astype(float)
        cap_w = np.sqrt(net.weights) * cap
        cap_norm = float(np.linalg.norm(cap_w))
        acc_sq, acc_pair = 0.0, 0.0
        for s in range(n_mc):
            rng = _stream_rng(seed, iR * n_mc + s)
            omega = rng.integers(0, 2, size=len(pts)) * 2.0 - 1.0
            T = build(amp * omega)
            sigma = float(np.linalg.svd(T, compute_uv=False)[0])
            acc_sq += sigma**2
            if cap_norm > 0:
                acc_pair += float(np.linalg.norm(T @ cap_w) / cap_norm) ** 2
        mean_sq = acc_sq / n_mc
        pair = acc_pair / n_mc
        means.append(mean_sq)
        pairings.append(pair)
        rows.append((float(R), mean_sq, pair, len(pts), len(net)))
    fit = fit_loglog(R_sweep, means)
    fits = {"mean-norm-sq": fit}
    if all(p > 0 for p in pairings):
        fits["pairing-lower"] = fit_loglog(R_sweep, pairings)
    expected = 1.0 - (d + 1) / q
    return ExperimentReport(
        cfg,
        {"saturation": (("R", "mean_norm_sq", "pairing_lower_sq", "n_cells", "n_nodes"), rows)},
        fits,
        {"slope": fit.slope, "expected_slope": expected, "positive_kernel_radius": r_pos},
    )


def run_stein_tomas_uniformity(cfg: ExperimentConfig) -> ExperimentReport:
    d, lam, seed = int(cfg["d"]), float(cfg["lam"]), int(cfg["seed"])
    R_sweep = cfg["R_sweep"]
    p_list = cfg["p_list"]
    rows = []
    norms: dict[float, list[float]] = {p: [] for p in p_list}
    spacing = float(cfg["spacing"])
    for R in R_sweep:
        net = sphere_net(lam, R, d)
        side = np.arange(-R / 2, R / 2, spacing)
        mesh = np.meshgrid(*([side] * d), indexing="ij")
        targets = np.stack([m.ravel() for m in mesh], axis=1)
        S = discres_matrix(net, targets)
        for p in p_list:
            val = mixed_norm_av_domain(S, math.inf if p == 0 else p)
            norms[p].append(val)
            rows.append((float(R), "inf" if p == 0 else repr(float(p)), val))
    fits = {}
    summary = {}
    for p in p_list:
        label = "inf" if p == 0 else f"{p:g}"
        fits[f"p-{label}"] = fit_loglog(R_sweep, norms[p])
        summary[f"growth_p{label}"] = norms[p][-1] / norms[p][0]
    return ExperimentReport(
        cfg, {"uniformity": (("R", "p_out", "norm"), rows)}, fits, summary
    )


def run_smoothing_scaling(cfg: ExperimentConfig) -> ExperimentReport:
    d, N, L, lam = int(cfg["d"]), int(cfg["N"]), float(cfg["L"]), float(cfg["lam"])
    R_sweep = cfg["R_sweep"]
    grid = make_grid(d, L, N)
    if 2 * max(R_sweep) > L / 2:
        raise BoxTooSmallError("box must contain the widest smoothing window")
    m_boundary = resolvent_boundary(lam, grid)
    z_reg = complex(lam, 0.5) ** 2
    m_reg = resolvent_symbol(z_reg, grid)
    rows, sups, sups_reg = [], [], []
    for R in R_sweep:
        sup = float(np.max(np.abs(smooth_symbol(m_boundary, R).symbol)))
        sup_reg = float(np.max(np.abs(smooth_symbol(m_reg, R).symbol)))
        sups.append(sup)
        sups_reg.append(sup_reg)
        rows.append((float(R), sup, sup_reg))
    fit = fit_loglog(R_sweep, sups)
    # localized-window identity spot check on a small companion grid
    small = make_grid(2, 32.0, 64)
    m_small = resolvent_symbol(ComplexEnergy(1.0, 0.05), small)
    mR = smooth_symbol(m_small, 10.0)
    rng = _stream_rng(int(cfg["seed"]), 0x51D)
    errs = []
    for _ in range(3):
        f = rng.standard_normal(small.shape) + 1j * rng.standard_normal(small.shape)
        r = np.sqrt(small.position_radius_sq())
        inner = GridFunction(small, f * (r <= 4.0), POSITION)
        outer_mask = r <= 4.0
        a = m_small.apply(inner).values * outer_mask
        b = mR.apply(inner).values * outer_mask
        errs.append(
            float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300))
        )
    return ExperimentReport(
        cfg,
        {"smoothing": (("R", "sup_boundary", "sup_regularized"), rows)},
        {"sup-vs-R": fit},
        {
            "slope": fit.slope,
            "regularized_max_sup": max(sups_reg),
            "identity_max_rel_error": max(errs),
        },
    )


def _unit_cell_statistic_factory(cfg: ExperimentConfig):
    """(sampler over streams, net, cell count) for the unit-cell norm statistic."""
    d, lam = int(cfg["d"]), float(cfg["lam"])
    h, B, R_net = float(cfg["h"]), float(cfg["B"]), float(cfg["R_net"])
    n_side = max(1, int(round(2 * B / h)))
    ax = (np.arange(n_side) + 0.5) * h - n_side * h / 2
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    net = sphere_net(lam, R_net, d)
    build = _weighted_sandwich_factory(pts, h, net)

    def statistic(rng: np.random.Generator) -> float:
        omega = rng.integers(0, 2, size=len(pts)) * 2.0 - 1.0
        return float(np.linalg.svd(build(omega), compute_uv=False)[0])

    return statistic, net, len(pts)


def _tail_curve(cfg: ExperimentConfig, n_mc: int, seed: int) -> ExceedanceCurve:
    statistic, _, _ = _unit_cell_statistic_factory(cfg)
    stats = np.empty(n_mc)
    for i in range(n_mc):
        stats[i] = statistic(_stream_rng(seed, i))
    C = float(stats.mean())
    Ms = cfg["Ms"]
    probs = tuple(float(np.mean(stats > m * C)) for m in Ms)
    return ExceedanceCurve(
        tuple(float(m) for m in Ms), probs, n_mc, "extension-sandwich-norm", C
    )


def run_tail_decay(cfg: ExperimentConfig) -> ExperimentReport:
    n_mc, seed = int(cfg["n_mc"]), int(cfg["seed"])
    if n_mc < 100:
        raise ConfigError("need n_mc >= 100")
    curve = _tail_curve(cfg, n_mc, seed)
    c_fit, r2 = tail_decay_fit(curve)
    curve2 = _tail_curve(cfg, 2 * n_mc, seed)
    c_fit2, _ = tail_decay_fit(curve2)
    rows = [
        (m, p, int(c)) for m, p, c in zip(curve.Ms, curve.probs, curve.censored)
    ]
    return ExperimentReport(
        cfg,
        {"exceedance": (("M", "prob", "censored"), rows)},
        {},
        {
            "c_fit": c_fit,
            "r2": r2,
            "c_fit_doubled": c_fit2,
            "c_rel_change": abs(c_fit2 - c_fit) / c_fit if c_fit > 0 else math.inf,
            "scale_C": curve.scale,
        },
    )


def run_eigen_bound_mc(cfg: ExperimentConfig) -> ExperimentReport:
    d, q = int(cfg["d"]), float(cfg["q"])
    n_mc, seed = int(cfg["n_mc"]), int(cfg["seed"])
    N, L = int(cfg["N"]), float(cfg["L"])
    h, B = float(cfg["h"]), float(cfg["B"])
    coupling = complex(float(cfg["coupling"]), float(cfg["coupling_im"]))
    threshold = float(cfg["threshold"])
    Ms = cfg["Ms"]
    grid = make_grid(d, L, N)
    region = tuple(cfg["region"])
    res = (int(cfg["res_re"]), int(cfg["res_im"]))
    n_cells = int(round(2 * B / h))
    side = range(-n_cells // 2, n_cells // 2)
    cell_keys = [(j,) for j in side] if d == 1 else list(itertools.product(side, repeat=d))
    violation_counts = {float(m): 0 for m in Ms}
    candidate_total = 0
    for s in range(n_mc):
        rng = _stream_rng(seed, s)
        omega = rng.integers(0, 2, size=len(cell_keys)) * 2.0 - 1.0
        coeffs = {k: coupling * w for k, w in zip(cell_keys, omega)}
        V = anderson_potential(coeffs, h, grid)
        scan = sigma_min_scan(V, region, res, threshold=threshold)
        vq = lp_norm(V, q)
        worst = 0.0
        for z, _sig in scan.candidates:
            w = np.sqrt(complex(z))
            if w.real < 0:
                w = -w
            lam_c, eps_c = float(w.real), float(w.imag)
            if lam_c <= 0 or abs(eps_c) > lam_c / 10:
                continue
            lhs = thm3_bound(lam_c, eps_c, h, q, d)
            worst = max(worst, lhs / vq if vq > 0 else math.inf)
            candidate_total += 1
        for m in violation_counts:
            if worst > m:
                violation_counts[m] += 1
    rows = [
        (m, violation_counts[m] / n_mc, math.exp(-0.25 * m**2))
        for m in sorted(violation_counts)
    ]
    return ExperimentReport(
        cfg,
        {"violations": (("M", "fraction", "exp_ref"), rows)},
        {},
        {
            "n_candidates": candidate_total,
            "fraction_at_max_M": violation_counts[max(violation_counts)] / n_mc,
        },
    )


def _admissible_cell_scale(h: float, dx: float, N: int) -> float:
    """Largest grid-aligned scale dx * 2^k that does not exceed h."""
    k = int(math.floor(math.log2(max(h / dx, 1.0))))
    while dx * 2**k > h and k > 0:
        k -= 1
    m = 2**k
    if N % m != 0:
        raise ConfigError("cell scale does not tile the grid")
    return dx * m


def run_counterexample_destruction(cfg: ExperimentConfig) -> ExperimentReport:
    d, q = int(cfg["d"]), float(cfg["q"])
    n_mc, seed = int(cfg["n_mc"]), int(cfg["seed"])
    N, L = int(cfg["N"]), float(cfg["L"])
    stride = int(cfg["stride"])
    h_factor = float(cfg["h_factor"])
    grid = make_grid(d, L, N)
    rows = []
    ratios = []
    for ie, eps in enumerate(cfg["eps_sweep"]):
        if 2.0 / eps > L / 2:
            raise BoxTooSmallError(f"tube of length {2 / eps} does not fit in L={L}")
        h_target = h_factor * destruction_scale(eps, q, d)
        h_cells = _admissible_cell_scale(h_target, grid.dx, grid.N)
        base = tube_potential(eps, grid, d)
        V_det = GridFunction(grid, 1j * base.values, POSITION)
        if stride == 0:
            npts = int(np.count_nonzero(base.values))
            eff_stride = max(1, math.ceil(math.sqrt(npts / float(cfg["max_block"]))))
        else:
            eff_stride = stride
        region = (0.7, 1.3, 0.4 * eps, 1.6 * eps)
        res = (int(cfg["res_re"]), int(cfg["res_im"]))

        def refined_min(V):
            # coarse scan, then one refinement pass around the argmin cell
            scan = sigma_min_scan(V, region, res, stride=eff_stride)
            i, j = np.unravel_index(np.argmin(scan.sigma_min), scan.sigma_min.shape)
            dre = (region[1] - region[0]) / (res[0] - 1)
            dim = (region[3] - region[2]) / (res[1] - 1)
            sub = (
                scan.re_grid[i] - dre,
                scan.re_grid[i] + dre,
                max(scan.im_grid[j] - dim, 1e-4),
                scan.im_grid[j] + dim,
            )
            fine = sigma_min_scan(V, sub, (5, 4), stride=eff_stride)
            return min(float(scan.sigma_min.min()), float(fine.sigma_min.min()))

        det_min = refined_min(V_det)
        n_cells, flat = _cell_index_arrays(grid, h_cells)
        rand_mins = []
        for s in range(n_mc):
            rng = _stream_rng(seed, ie * n_mc + s)
            signs = rng.integers(0, 2, size=n_cells) * 2.0 - 1.0
            V_rand = GridFunction(grid, V_det.values * signs[flat], POSITION)
            rand_mins.append(refined_min(V_rand))
        med = float(np.median(rand_mins))
        ratio = med / det_min if det_min > 0 else math.inf
        ratios.append(ratio)
        rows.append((eps, h_target, h_cells, eff_stride, det_min, med, ratio))
    return ExperimentReport(
        cfg,
        {
            "destruction": (
                (
                    "eps",
                    "h_target",
                    "h_cells",
                    "stride",
                    "det_min_sigma",
                    "rand_median_sigma",
                    "ratio",
                ),
                rows,
            )
        },
        {},
        {"ratio_at_finest": ratios[-1]},
    )


def run_dyadic_shell_demo(cfg: ExperimentConfig) -> ExperimentReport:
    d, N, L = int(cfg["d"]), int(cfg["N"]), float(cfg["L"])
    delta, k_max, lam = float(cfg["delta"]), int(cfg["k_max"]), float(cfg["lam"])
    grid = make_grid(d, L, N)
    r = np.sqrt(grid.position_radius_sq())
    # each annulus-cut sqrt factor contributes ~ delta_l^(-1/2) = 2^(delta*k) in
    # sup norm, so a potential decaying at rate `decay` = 2*delta leaves the
    # block norms decaying at the advertised 2^(-delta*k)
    V = (2.0 + r) ** (-float(cfg["decay"]))
    m = resolvent_symbol(ComplexEnergy(lam, lam / 20), grid)
    m_sm = smooth_symbol(m, float(cfg["smooth_R"]))
    rows, norms = [], []
    for k in range(k_max + 1):
        lo = 0.0 if k == 0 else 2.0**k
        hi = 2.0 ** (k + 1)
        if hi > L / 2:
            raise BoxTooSmallError(f"shell {k} exceeds the box")
        shell = GridFunction(grid, V * ((r >= lo) & (r < hi)), POSITION)
        dl = 1.0 / (2.0**k + 2.0 ** max(k - 1, 0))
        C = cdelta_sqrt(m_sm, dl)
        chain = LinearOperatorChain(
            grid, (("multiplier", C), ("pointwise", shell), ("multiplier", C))
        )
        nrm = power_norm(chain, tol=1e-8).value
        norms.append(nrm)
        rows.append((k, dl, nrm, nrm * 2.0 ** (delta * k)))
    total = sum(norms)
    tail = norms[-1] / total if total > 0 else 0.0
    weighted = [nn * 2.0 ** (delta * k) for k, nn in enumerate(norms)]
    return ExperimentReport(
        cfg,
        {"shells": (("k", "delta_l", "norm", "weighted_norm"), rows)},
        {},
        {
            "tail_fraction": tail,
            "weighted_spread": max(weighted) / min(weighted) if min(weighted) > 0 else math.inf,
        },
    )


# ---------------------------------------------------------------------------
# Registry and serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioDef:
    name: str
    description: str
    schema: dict  # name -> (kind, default)
    runner: object


SCENARIOS: dict[str, ScenarioDef] = {}


def _register(name, description, schema, runner):
    SCENARIOS[name] = ScenarioDef(name, description, schema, runner)


_register(
    "knapp-saturation",
    "Mean squared extension-sandwich norm of a randomized tube across scales",
    {
        "d": ("int", 2),
        "q": ("float", 3.0),
        "h": ("float", 0.125),
        "lam": ("float", 1.0),
        "n_mc": ("int", 50),
        "R_sweep": ("float-list", (8.0, 16.0, 32.0, 64.0)),
        "seed": ("int", DEFAULT_SEED),
    },
    run_knapp_saturation,
)
_register(
    "stein-tomas-uniformity",
    "Discrete restriction-matrix norms across scales at several target exponents",
    {
        "d": ("int", 2),
        "lam": ("float", 1.0),
        "R_sweep": ("float-list", (8.0, 16.0, 32.0, 64.0)),
        "p_list": ("float-list", (6.0, 4.0, 0.0)),  # 0 encodes p' = inf
        "spacing": ("float", 1.0),
        "seed": ("int", DEFAULT_SEED),
    },
    run_stein_tomas_uniformity,
)
_register(
    "smoothing-scaling",
    "Sup of the window-smoothed boundary resolvent symbol across window radii",
    {
        "d": ("int", 2),
        "N": ("int", 256),
        "L": ("float", 256.0),
        "lam": ("float", 1.0),
        "R_sweep": ("float-list", (8.0, 16.0, 32.0, 64.0)),
        "seed": ("int", DEFAULT_SEED),
    },
    run_smoothing_scaling,
)
_register(
    "tail-decay",
    "Empirical tail of the randomized extension-sandwich norm vs exp(-cM^2)",
    {
        "d": ("int", 2),
        "lam": ("float", 1.0),
        "h": ("float", 1.0),
        "B": ("float", 4.0),
        "R_net": ("float", 16.0),
        "n_mc": ("int", 2000),
        "Ms": ("float-list", tuple(round(1.0 + 0.05 * i, 2) for i in range(15))),
        "seed": ("int", DEFAULT_SEED),
    },
    run_tail_decay,
)
_register(
    "eigen-bound-mc",
    "Fraction of random potentials with an eigenvalue violating the bound at level M",
    {
        "d": ("int", 1),
        "q": ("float", 1.5),
        "N": ("int", 256),
        "L": ("float", 32.0),
        "h": ("float", 1.0),
        "B": ("float", 2.0),
        "coupling": ("float", 1.0),
        "coupling_im": ("float", 0.5),
        "threshold": ("float", 0.1),
        "n_mc": ("int", 500),
        "region": ("float-list", (-1.0, 1.5, 0.02, 0.4)),
        "res_re": ("int", 12),
        "res_im": ("int", 6),
        "Ms": ("float-list", (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)),
        "seed": ("int", DEFAULT_SEED),
    },
    run_eigen_bound_mc,
)
_register(
    "counterexample-destruction",
    "Smallest-singular-value landscape of a complex tube, sign-randomized vs plain",
    {
        "d": ("int", 2),
        "q": ("float", 3.0),
        "N": ("int", 256),
        "L": ("float", 32.0),
        "eps_sweep": ("float-list", (0.25, 0.125)),
        "h_factor": ("float", 1.0),
        "n_mc": ("int", 12),
        "stride": ("int", 0),
        "max_block": ("int", 700),
        "res_re": ("int", 7),
        "res_im": ("int", 5),
        "seed": ("int", DEFAULT_SEED),
    },
    run_counterexample_destruction,
)
_register(
    "dyadic-shell",
    "Annular-shell sandwich norms of a slowly decaying potential and their summability",
    {
        "d": ("int", 2),
        "N": ("int", 256),
        "L": ("float", 128.0),
        "delta": ("float", 0.5),
        "decay": ("float", 1.0),
        "k_max": ("int", 5),
        "lam": ("float", 1.0),
        "smooth_R": ("float", 4.0),
        "seed": ("int", DEFAULT_SEED),
    },
    run_dyadic_shell_demo,
)


def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_report(report: ExperimentReport, outdir: str, wall_time: float | None = None) -> list[str]:
    """Write one CSV per table plus a metadata JSON; all writes are atomic.

    CSV bytes depend only on the report (wall time lives in the metadata),
    so identical configs reproduce identical tables.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    base = report.config.scenario
    for name, (header, rows) in report.tables.items():
        lines = [",".join(header)]
        lines += [",".join(_format_cell(c) for c in row) for row in rows]
        path = os.path.join(outdir, f"{base}__{name}.csv")
        atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
        written.append(path)
    meta = {
        "scenario": base,
        "version": ARTIFACT_VERSION,
        "parameters": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in report.config.parameters.items()
        },
        "summary": report.summary,
        "fits": {
            name: {
                "xs": list(f.xs),
                "ys": list(f.ys),
                "slope": f.slope,
                "intercept": f.intercept,
                "r2": f.r2,
            }
            for name, f in report.fits.items()
        },
        "wall_time_seconds": wall_time,
    }
    path = os.path.join(outdir, f"{base}__meta.json")
    atomic_write_bytes(path, json.dumps(meta, indent=2, sort_keys=True).encode())
    written.append(path)
    return written


def run_and_save(config: ExperimentConfig, outdir: str) -> list[str]:
    start = time.perf_counter()
    report = run(config)
    return save_report(report, outdir, wall_time=time.perf_counter() - start)
