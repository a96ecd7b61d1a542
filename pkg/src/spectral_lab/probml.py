"""Monte-Carlo harness for the probabilistic machinery.

Empirical exceedance curves for norm statistics, max-of-random-variables
scaling against sqrt(log N), greedy covering numbers in sup norm with a
small-ball scaling check, dyadic chaining decompositions, and the closed-form
versus brute-force comparison for the double geometric series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NoConvergenceError
from .potentials import _stream_rng

#: Exceedance frequencies below this multiple of 1/n are reported censored.
CENSOR_MULTIPLE = 5.0


@dataclass(frozen=True)
class ExceedanceCurve:
    """Empirical tail curve P(statistic > M * C) over a list of M values."""

    Ms: tuple[float, ...]
    probs: tuple[float, ...]
    n_samples: int
    statistic_id: str
    scale: float
    monotonized: bool = False

    def __post_init__(self):
        if any(not (0.0 <= p <= 1.0) for p in self.probs):
            raise ValueError("exceedance frequencies must lie in [0, 1]")
        if any(b > a + 1e-15 for a, b in zip(self.probs, self.probs[1:])):
            raise ValueError("exceedance curve must be non-increasing in M")

    @property
    def censored(self) -> tuple[bool, ...]:
        floor = CENSOR_MULTIPLE / self.n_samples
        return tuple(p < floor for p in self.probs)

    def tail_fit_points(self) -> tuple[np.ndarray, np.ndarray]:
        """(M^2, log prob) pairs usable for the exp(-c M^2) fit, censored dropped."""
        keep = [
            (m, p) for m, p, c in zip(self.Ms, self.probs, self.censored) if not c and p > 0
        ]
        if not keep:
            return np.empty(0), np.empty(0)
        ms, ps = zip(*keep)
        return np.asarray(ms) ** 2, np.log(np.asarray(ps))


def exceedance_curve(
    sampler: Callable[[np.random.Generator], float],
    Ms: Sequence[float],
    n_samples: int,
    C: float,
    seed: int = 0,
    statistic_id: str = "statistic",
) -> ExceedanceCurve:
    """Empirical P(statistic > M*C) with deterministic per-sample seeds.

    Each sample gets its own counter-based generator derived from (seed, i),
    so the curve is bit-identical under any parallel schedule.  The raw
    frequencies are automatically non-increasing in M; no regularization is
    ever applied, and the flag records that.
    """
    if n_samples < 100:
        raise ValueError("need n_samples >= 100")
    if C <= 0:
        raise ValueError("scale C must be positive")
    Ms = tuple(float(m) for m in Ms)
    stats = np.empty(n_samples)
    for i in range(n_samples):
        stats[i] = float(sampler(_stream_rng(seed, i)))
    probs = tuple(float(np.mean(stats > m * C)) for m in Ms)
    return ExceedanceCurve(Ms, probs, n_samples, statistic_id, C, monotonized=False)


def tail_decay_fit(curve: ExceedanceCurve) -> tuple[float, float]:
    """(c, R^2) of the regression log P = a - c M^2 on the uncensored points."""
    x, y = curve.tail_fit_points()
    if len(x) < 3:
        raise NoConvergenceError("too few uncensored points for a tail fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return -float(slope), r2


def max_scaling(
    N_list: Sequence[int],
    dist: str = "gaussian-standard",
    n_trials: int = 200,
    seed: int = 0,
) -> tuple[float, tuple[float, ...]]:
    """Fitted slope of E max_{j<=N} |X_j| against sqrt(log N), plus the ratios.

    Returns (slope, ratios) where ratios[i] = E max / sqrt(2 log N_i) for
    N_i > 1; boundedness of the ratios across the list is the testable claim.
    """
    N_list = sorted(int(n) for n in N_list)
    if math.log10(N_list[-1] / N_list[0]) < 2 - 1e-9:
        raise ValueError("N_list must span at least two decades")
    emax = []
    for idx, N in enumerate(N_list):
        vals = np.empty(n_trials)
        for t in range(n_trials):
            rng = _stream_rng(seed, idx * n_trials + t)
            if dist == "gaussian-standard":
                x = rng.standard_normal(N)
            elif dist == "bernoulli-symmetric":
                x = rng.integers(0, 2, size=N) * 2.0 - 1.0
            else:
                raise ValueError(f"unknown distribution {dist!r}")
            vals[t] = np.max(np.abs(x))
        emax.append(float(vals.mean()))
    xs = np.sqrt(np.log(np.asarray(N_list, dtype=float)))
    slope = float(np.polyfit(xs, np.asarray(emax), 1)[0])
    ratios = tuple(
        e / math.sqrt(2 * math.log(N)) for e, N in zip(emax, N_list) if N > 1
    )
    return slope, ratios


# ---------------------------------------------------------------------------
# Covering numbers and chaining
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoveringReport:
    """Greedy sup-norm covering counts of the sampled unit-ball image."""

    eps_list: tuple[float, ...]
    N_eps: tuple[int, ...]
    S_norm: float
    m: int

    def __post_init__(self):
        order = np.argsort(self.eps_list)
        counts = np.asarray(self.N_eps)[order]
        if np.any(np.diff(counts) > 0):
            raise ValueError("covering counts must be non-increasing in eps")


def _sample_ball_image(S: np.ndarray, n_probe: int, seed: int) -> np.ndarray:
    """Images of uniformly random unit vectors (complex sphere) under S."""
    n = S.shape[1]
    rng = _stream_rng(seed, 0xC0FE)
    X = rng.standard_normal((n_probe, n)) + 1j * rng.standard_normal((n_probe, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X @ S.T  # (n_probe, m)


def _greedy_cover(pts: np.ndarray, eps: float) -> list[int]:
    """Indices of greedy sup-norm ball centers covering all rows of pts.

    A handful of leading coordinates screen out points that are certainly
    farther than eps (a lower bound on the sup distance), so the exact check
    only runs on the few candidates a center might actually cover.
    """
    n, m = pts.shape
    screen = min(8, m)
    head = np.ascontiguousarray(pts[:, :screen])
    alive = np.ones(n, dtype=bool)
    centers: list[int] = []
    while True:
        idx_alive = np.flatnonzero(alive)
        if len(idx_alive) == 0:
            return centers
        i0 = int(idx_alive[0])
        centers.append(i0)
        part = np.max(np.abs(head[idx_alive] - head[i0]), axis=1)
        maybe = idx_alive[part <= eps]
        if len(maybe):
            full = np.max(np.abs(pts[maybe] - pts[i0]), axis=1)
            alive[maybe[full <= eps]] = False
        alive[i0] = False


def covering_number(
    S: np.ndarray, eps: float, n_probe: int = 10_000, seed: int = 0
) -> int:
    """Greedy estimate of the sup-norm covering number of S(unit ball).

    Centers are drawn from the sampled point set itself, so the count is an
    upper estimate of the covering number restricted to the samples.
    """
    if S.shape[1] > 64 or S.shape[0] > 4096:
        raise ValueError("matrix exceeds the desk-scale covering limits")
    if n_probe < 10_000:
        raise ValueError("need n_probe >= 10^4")
    if not np.any(S):
        return 1
    pts = _sample_ball_image(S, n_probe, seed)
    return len(_greedy_cover(pts, eps))


def covering_report(
    S: np.ndarray, eps_list: Sequence[float], n_probe: int = 10_000, seed: int = 0
) -> CoveringReport:
    """Covering counts over several radii with the measured sup-norm of S."""
    pts = _sample_ball_image(S, n_probe, seed)
    counts = tuple(len(_greedy_cover(pts, e)) for e in eps_list)
    s_norm = float(np.max(np.linalg.norm(S, axis=1)))
    return CoveringReport(tuple(float(e) for e in eps_list), counts, s_norm, S.shape[0])


def small_ball_ratio(report: CoveringReport) -> float:
    """max over radii of log N(eps) * eps^2 / (log m * ||S||^2).

    Boundedness of this quantity across radii and target dimensions is the
    scaling content of the dual covering inequality.
    """
    if report.S_norm == 0:
        return 0.0
    return max(
        math.log(max(n, 1)) * e**2 / (math.log(report.m) * report.S_norm**2)
        for e, n in zip(report.eps_list, report.N_eps)
    )


def chaining_nets(
    S: np.ndarray, k_max: int = 6, n_probe: int = 10_000, seed: int = 0
) -> list[np.ndarray]:
    """Greedy net centers of the sampled ball image at radii 2^-k, k <= k_max.

    Nets are shared between chains for different vectors; each chain appends
    its own target to every net, which preserves the covering property.
    """
    pts = _sample_ball_image(S, n_probe, seed)
    return [pts[_greedy_cover(pts, 2.0 ** (-k))] for k in range(k_max + 1)]


def chaining_decompose(
    S: np.ndarray,
    a: np.ndarray,
    k_max: int = 6,
    n_probe: int = 10_000,
    seed: int = 0,
    nets: list[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Dyadic chain xi^(0..k_max) with Sa = sum_k xi^(k) up to 2^(-k_max).

    Nets at radii 2^-k are greedy covers of the sampled ball image with Sa
    appended, so the nearest-center chain reconstructs Sa to the finest
    radius; increments satisfy sup-norm <= 3 * 2^(-k).
    """
    a = np.asarray(a, dtype=complex).reshape(-1)
    na = float(np.linalg.norm(a))
    if not (0.999 <= na <= 1.001):
        raise ValueError("a must be a unit vector")
    if nets is None:
        nets = chaining_nets(S, k_max, n_probe, seed)
    if len(nets) < k_max + 1:
        raise NoConvergenceError("nets too coarse for the requested reconstruction")
    target = S @ a
    prev = np.zeros_like(target)
    chain: list[np.ndarray] = []
    for k in range(k_max + 1):
        eps = 2.0 ** (-k)
        dists = np.max(np.abs(nets[k] - target[None, :]), axis=1)
        best = int(np.argmin(dists))
        # the target joins the net itself when no sampled center is close
        # enough, exactly as if it had been appended to the greedy input
        cur = nets[k][best] if dists[best] <= eps else target
        chain.append(cur - prev)
        prev = cur
    resid = float(np.max(np.abs(target - prev)))
    if resid > 2.0 ** (-k_max + 1):
        raise NoConvergenceError(
            "nets too coarse for the requested reconstruction", best_value=resid
        )
    return chain


# ---------------------------------------------------------------------------
# Double geometric series
# ---------------------------------------------------------------------------


def geom_series_bound(A: float) -> float:
    """Closed-form bound for sum_{k,k'>=0} min(2^(-k-k'), A)."""
    if A <= 0:
        raise ValueError("A must be positive")
    if A >= 1:
        return 1.0
    return A * (1.0 + math.log(A) ** 2)


def geom_series_bruteforce(A: float, k_max: int = 80) -> float:
    """Truncated double sum sum_{k,k'=0..k_max} min(2^(-k-k'), A)."""
    if A <= 0:
        raise ValueError("A must be positive")
    if k_max < 60:
        raise ValueError("need k_max >= 60 for negligible truncation error")
    k = np.arange(k_max + 1)
    powers = 2.0 ** (-(k[:, None] + k[None, :]))
    return float(np.sum(np.minimum(powers, A)))
