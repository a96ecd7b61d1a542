"""Figure rendering and independent regression refits.

The input contract is the one ``spectral-lab run`` documents: tables named
``{scenario}__{table}.csv`` with a header row, and an optional sibling
``{scenario}__meta.json`` whose ``fits`` entries store the raw points next to
the fitted slope/intercept/R^2.  Whenever a stored fit covers the same points
as the one refitted here, the two slopes must agree to ``FIT_TOL`` -- the
refit is a least-squares solve written independently of the producer's
``polyfit`` path, so agreement is an end-to-end cross-check, not a tautology.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

#: Supported figure kinds.
KINDS = ("loglog-scaling", "exceedance", "sigma-min-heatmap")

#: Maximum allowed |refitted slope - stored slope|.
FIT_TOL = 1e-6

#: Fixed PNG metadata so identical inputs produce identical bytes.
_PNG_METADATA = {"Software": "spectral-lab-plots"}

_FIGSIZE = (6.4, 4.8)
_DPI = 100


class SchemaMismatchError(ValueError):
    """The CSV does not parse against the documented artifact schema."""


class MissingColumnsError(SchemaMismatchError):
    """The CSV parses but lacks a column the figure kind requires."""


class FitMismatchError(ValueError):
    """The independent refit disagrees with the producer's stored fit."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input tables, figure kind, and the output image path.

    ``y_column`` selects the dependent column for log-log figures (default:
    the second column of each table).  ``expected_slope``, when given, is
    drawn on the figure as a reference annotation.
    """

    csv_paths: tuple[str, ...]
    kind: str
    output: str
    y_column: str | None = None
    expected_slope: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "csv_paths", tuple(str(p) for p in self.csv_paths))
        if not self.csv_paths:
            raise ValueError("need at least one input CSV")
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        for p in self.csv_paths:
            if not os.path.isfile(p):
                raise FileNotFoundError(p)


def _read_table(path: str) -> tuple[list[str], dict[str, np.ndarray]]:
    """Header and numeric columns of one artifact CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise SchemaMismatchError(f"{path}: empty table, no header row")
    header, body = rows[0], rows[1:]
    if not body:
        raise SchemaMismatchError(f"{path}: header only, no data rows")
    if any(len(r) != len(header) for r in body):
        raise SchemaMismatchError(f"{path}: ragged rows do not match the header")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        try:
            columns[name] = np.array([float(r[j]) for r in body])
        except ValueError as exc:
            raise SchemaMismatchError(f"{path}: non-numeric entry in column {name!r}") from exc
    return header, columns


def _require(columns: dict[str, np.ndarray], names: tuple[str, ...], path: str) -> None:
    missing = [n for n in names if n not in columns]
    if missing:
        raise MissingColumnsError(f"{path}: missing columns {missing}")


def _lstsq_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """(slope, intercept, R^2) by an explicit normal-equation-free solve."""
    design = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _stored_fits(csv_path: str) -> dict:
    """Fits from the sibling ``{scenario}__meta.json``, if the file exists."""
    base = os.path.basename(csv_path)
    if "__" not in base:
        return {}
    scenario = base.split("__", 1)[0]
    meta_path = os.path.join(os.path.dirname(csv_path), f"{scenario}__meta.json")
    if not os.path.isfile(meta_path):
        return {}
    with open(meta_path) as fh:
        meta = json.load(fh)
    return meta.get("fits", {}) if isinstance(meta, dict) else {}


def _crosscheck_loglog(csv_path: str, xs: np.ndarray, ys: np.ndarray, slope: float) -> str | None:
    """Compare against any stored fit over the same points; name of the match."""
    for name, fit in _stored_fits(csv_path).items():
        sx, sy = np.asarray(fit.get("xs", ())), np.asarray(fit.get("ys", ()))
        if sx.shape != xs.shape or sy.shape != ys.shape:
            continue
        if not (np.allclose(sx, xs, rtol=0, atol=1e-12) and np.allclose(sy, ys, rtol=0, atol=1e-12)):
            continue
        if abs(slope - fit["slope"]) > FIT_TOL:
            raise FitMismatchError(
                f"{csv_path}: refitted slope {slope!r} differs from stored "
                f"fit {name!r} slope {fit['slope']!r} by more than {FIT_TOL}"
            )
        return name
    return None


def _crosscheck_tail(csv_path: str, c_refit: float) -> str | None:
    """Compare the refitted tail rate against the producer's stored c_fit."""
    base = os.path.basename(csv_path)
    if "__" not in base:
        return None
    scenario = base.split("__", 1)[0]
    meta_path = os.path.join(os.path.dirname(csv_path), f"{scenario}__meta.json")
    if not os.path.isfile(meta_path):
        return None
    with open(meta_path) as fh:
        meta = json.load(fh)
    stored = meta.get("summary", {}).get("c_fit") if isinstance(meta, dict) else None
    if stored is None:
        return None
    if abs(c_refit - stored) > FIT_TOL:
        raise FitMismatchError(
            f"{csv_path}: refitted tail rate {c_refit!r} differs from stored "
            f"c_fit {stored!r} by more than {FIT_TOL}"
        )
    return "c_fit"


def _render_loglog(spec: FigureSpec, ax) -> list[dict]:
    fits = []
    for path in spec.csv_paths:
        header, columns = _read_table(path)
        x_name = header[0]
        y_name = spec.y_column if spec.y_column is not None else header[1] if len(header) > 1 else None
        if y_name is None:
            raise MissingColumnsError(f"{path}: table has no dependent column")
        _require(columns, (x_name, y_name), path)
        xs, ys = columns[x_name], columns[y_name]
        if np.any(xs <= 0) or np.any(ys <= 0):
            raise SchemaMismatchError(f"{path}: log-log figures need positive data")
        slope, intercept, r2 = _lstsq_line(np.log(xs), np.log(ys))
        matched = _crosscheck_loglog(path, xs, ys, slope)
        label = f"{os.path.basename(path)}: slope {slope:+.3f}"
        ax.loglog(xs, ys, "o", label=label)
        xf = np.linspace(xs.min(), xs.max(), 50)
        ax.loglog(xf, np.exp(intercept) * xf**slope, "-", linewidth=1)
        fits.append(
            {
                "input": path,
                "x_column": x_name,
                "y_column": y_name,
                "slope": slope,
                "intercept": intercept,
                "r2": r2,
                "matched_stored_fit": matched,
            }
        )
    ax.set_xlabel(fits[0]["x_column"])
    ax.set_ylabel(fits[0]["y_column"])
    ax.legend(fontsize=8)
    if spec.expected_slope is not None:
        ax.set_title(f"expected slope {spec.expected_slope:+.3f}")
    return fits


def _render_exceedance(spec: FigureSpec, ax) -> list[dict]:
    fits = []
    for path in spec.csv_paths:
        _, columns = _read_table(path)
        _require(columns, ("M", "prob", "censored"), path)
        keep = (columns["censored"] == 0) & (columns["prob"] > 0)
        if int(keep.sum()) < 2:
            raise SchemaMismatchError(f"{path}: fewer than two usable exceedance points")
        msq = columns["M"][keep] ** 2
        logp = np.log(columns["prob"][keep])
        slope, intercept, r2 = _lstsq_line(msq, logp)
        matched = _crosscheck_tail(path, -slope)
        ax.plot(msq, logp, "o", label=f"{os.path.basename(path)}: c {-slope:.3f}")
        xf = np.linspace(msq.min(), msq.max(), 50)
        ax.plot(xf, slope * xf + intercept, "-", linewidth=1)
        fits.append(
            {
                "input": path,
                "slope": slope,
                "intercept": intercept,
                "r2": r2,
                "tail_rate_c": -slope,
                "matched_stored_fit": matched,
            }
        )
    ax.set_xlabel("M^2")
    ax.set_ylabel("log P")
    ax.legend(fontsize=8)
    if spec.expected_slope is not None:
        ax.set_title(f"expected slope {spec.expected_slope:+.3f}")
    return fits


def _render_heatmap(spec: FigureSpec, ax, fig) -> list[dict]:
    if len(spec.csv_paths) != 1:
        raise ValueError("sigma-min heatmaps take exactly one input table")
    path = spec.csv_paths[0]
    _, columns = _read_table(path)
    _require(columns, ("re", "im", "sigma_min"), path)
    re_vals = np.unique(columns["re"])
    im_vals = np.unique(columns["im"])
    if len(re_vals) * len(im_vals) != len(columns["re"]):
        raise SchemaMismatchError(f"{path}: (re, im) points do not form a full grid")
    grid = np.full((len(im_vals), len(re_vals)), np.nan)
    ri = np.searchsorted(re_vals, columns["re"])
    ii = np.searchsorted(im_vals, columns["im"])
    grid[ii, ri] = columns["sigma_min"]
    if np.any(np.isnan(grid)) or np.any(grid <= 0):
        raise SchemaMismatchError(f"{path}: sigma_min grid has holes or non-positive values")
    mesh = ax.pcolormesh(re_vals, im_vals, np.log10(grid), shading="nearest")
    fig.colorbar(mesh, ax=ax, label="log10 sigma_min")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    return [{"input": path, "slope": None, "intercept": None, "r2": None}]


def render(spec: FigureSpec) -> str:
    """Draw the figure, write the PNG and its sidecar JSON, return the PNG path.

    The sidecar (``<output stem>.json``) records the refitted slope, intercept,
    and R^2 for every input table, plus the name of the stored fit each one was
    cross-checked against (or null when the metadata had no matching fit).
    """
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    try:
        if spec.kind == "loglog-scaling":
            fits = _render_loglog(spec, ax)
        elif spec.kind == "exceedance":
            fits = _render_exceedance(spec, ax)
        else:
            fits = _render_heatmap(spec, ax, fig)
        fig.savefig(spec.output, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)
    sidecar = {
        "kind": spec.kind,
        "expected_slope": spec.expected_slope,
        "fits": fits,
    }
    sidecar_path = os.path.splitext(spec.output)[0] + ".json"
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return spec.output
