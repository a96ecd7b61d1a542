import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from spectral_lab_plots import (
    FigureSpec,
    FitMismatchError,
    MissingColumnsError,
    SchemaMismatchError,
    render,
)

pytestmark = pytest.mark.skipif(
    shutil.which("spectral-lab") is None, reason="producer CLI not installed"
)


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Real producer artifacts: one log-log scenario, one exceedance scenario."""
    out = tmp_path_factory.mktemp("artifacts")
    runs = [
        ["smoothing-scaling", "--set", "N=128", "--set", "L=128", "--set", "R_sweep=4,8,16,32"],
        ["tail-decay", "--set", "n_mc=200"],
    ]
    for args in runs:
        subprocess.run(
            ["spectral-lab", "run", *args, "--out", str(out)],
            check=True,
            capture_output=True,
        )
    return out


@pytest.fixture()
def scan_csv(tmp_path):
    """A synthetic sigma_min landscape in the documented long format."""
    re_vals = np.linspace(-2.0, -1.0, 5)
    im_vals = np.linspace(-0.1, 0.1, 3)
    lines = ["re,im,sigma_min"]
    for im in im_vals:
        for re in re_vals:
            lines.append(f"{re},{im},{0.1 + (re + 1.5) ** 2 + im**2}")
    path = tmp_path / "scan__landscape.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestFigureSpec:
    def test_unknown_kind(self, scan_csv):
        with pytest.raises(ValueError, match="figure kind"):
            FigureSpec((str(scan_csv),), "pie-chart", "out.png")

    def test_missing_input(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            FigureSpec((str(tmp_path / "nope.csv"),), "exceedance", "out.png")

    def test_no_inputs(self):
        with pytest.raises(ValueError, match="at least one"):
            FigureSpec((), "exceedance", "out.png")


class TestLoglogScaling:
    def test_refit_matches_stored_fit(self, artifacts, tmp_path):
        csv_path = artifacts / "smoothing-scaling__smoothing.csv"
        out = tmp_path / "smoothing.png"
        render(FigureSpec((str(csv_path),), "loglog-scaling", str(out), expected_slope=1.0))
        assert out.exists() and out.stat().st_size > 0
        side = json.loads((tmp_path / "smoothing.json").read_text())
        (fit,) = side["fits"]
        assert fit["matched_stored_fit"] == "sup-vs-R"
        meta = json.loads((artifacts / "smoothing-scaling__meta.json").read_text())
        stored = meta["fits"]["sup-vs-R"]
        assert abs(fit["slope"] - stored["slope"]) <= 1e-6
        assert abs(fit["intercept"] - stored["intercept"]) <= 1e-6
        assert abs(fit["r2"] - stored["r2"]) <= 1e-6

    def test_tampered_metadata_is_rejected(self, artifacts, tmp_path):
        for name in ("smoothing-scaling__smoothing.csv", "smoothing-scaling__meta.json"):
            shutil.copy(artifacts / name, tmp_path / name)
        meta_path = tmp_path / "smoothing-scaling__meta.json"
        meta = json.loads(meta_path.read_text())
        meta["fits"]["sup-vs-R"]["slope"] += 1e-3
        meta_path.write_text(json.dumps(meta))
        spec = FigureSpec(
            (str(tmp_path / "smoothing-scaling__smoothing.csv"),),
            "loglog-scaling",
            str(tmp_path / "out.png"),
        )
        with pytest.raises(FitMismatchError):
            render(spec)

    def test_y_column_selection(self, artifacts, tmp_path):
        csv_path = artifacts / "smoothing-scaling__smoothing.csv"
        out = tmp_path / "reg.png"
        render(
            FigureSpec((str(csv_path),), "loglog-scaling", str(out), y_column="sup_regularized")
        )
        side = json.loads((tmp_path / "reg.json").read_text())
        # the regularized sup saturates near 1, so its slope is near 0 and it
        # matches no stored fit
        assert side["fits"][0]["matched_stored_fit"] is None
        assert abs(side["fits"][0]["slope"]) < 0.1

    def test_missing_y_column(self, artifacts, tmp_path):
        csv_path = artifacts / "smoothing-scaling__smoothing.csv"
        spec = FigureSpec(
            (str(csv_path),), "loglog-scaling", str(tmp_path / "x.png"), y_column="no_such"
        )
        with pytest.raises(MissingColumnsError):
            render(spec)

    def test_nonpositive_data_rejected(self, tmp_path):
        p = tmp_path / "t__bad.csv"
        p.write_text("R,v\n1.0,2.0\n2.0,-1.0\n")
        with pytest.raises(SchemaMismatchError, match="positive"):
            render(FigureSpec((str(p),), "loglog-scaling", str(tmp_path / "x.png")))


class TestExceedance:
    def test_refit_matches_stored_tail_rate(self, artifacts, tmp_path):
        csv_path = artifacts / "tail-decay__exceedance.csv"
        out = tmp_path / "tail.png"
        render(FigureSpec((str(csv_path),), "exceedance", str(out)))
        side = json.loads((tmp_path / "tail.json").read_text())
        (fit,) = side["fits"]
        assert fit["matched_stored_fit"] == "c_fit"
        meta = json.loads((artifacts / "tail-decay__meta.json").read_text())
        assert abs(fit["tail_rate_c"] - meta["summary"]["c_fit"]) <= 1e-6
        assert fit["slope"] < 0

    def test_missing_columns(self, tmp_path):
        p = tmp_path / "t__curve.csv"
        p.write_text("M,prob\n1.0,0.5\n2.0,0.1\n")
        with pytest.raises(MissingColumnsError):
            render(FigureSpec((str(p),), "exceedance", str(tmp_path / "x.png")))

    def test_empty_csv_is_schema_mismatch(self, tmp_path):
        p = tmp_path / "t__curve.csv"
        p.write_text("")
        with pytest.raises(SchemaMismatchError):
            render(FigureSpec((str(p),), "exceedance", str(tmp_path / "x.png")))

    def test_all_censored_is_schema_mismatch(self, tmp_path):
        p = tmp_path / "t__curve.csv"
        p.write_text("M,prob,censored\n1.0,0.001,1\n2.0,0.0,1\n")
        with pytest.raises(SchemaMismatchError, match="usable"):
            render(FigureSpec((str(p),), "exceedance", str(tmp_path / "x.png")))


class TestHeatmap:
    def test_renders_grid(self, scan_csv, tmp_path):
        out = tmp_path / "scan.png"
        render(FigureSpec((str(scan_csv),), "sigma-min-heatmap", str(out)))
        assert out.exists() and out.stat().st_size > 0
        side = json.loads((tmp_path / "scan.json").read_text())
        assert side["fits"][0]["slope"] is None

    def test_incomplete_grid_rejected(self, scan_csv, tmp_path):
        lines = scan_csv.read_text().splitlines()
        scan_csv.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(SchemaMismatchError, match="grid"):
            render(FigureSpec((str(scan_csv),), "sigma-min-heatmap", str(tmp_path / "x.png")))

    def test_single_input_only(self, scan_csv, tmp_path):
        with pytest.raises(ValueError, match="exactly one"):
            render(
                FigureSpec(
                    (str(scan_csv), str(scan_csv)),
                    "sigma-min-heatmap",
                    str(tmp_path / "x.png"),
                )
            )


class TestDeterminism:
    def test_rerender_is_byte_identical(self, artifacts, tmp_path):
        csv_path = artifacts / "smoothing-scaling__smoothing.csv"
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render(FigureSpec((str(csv_path),), "loglog-scaling", str(a), expected_slope=1.0))
        render(FigureSpec((str(csv_path),), "loglog-scaling", str(b), expected_slope=1.0))
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()


def test_package_runs_without_display():
    # backend must already be non-interactive regardless of the environment
    import matplotlib

    assert matplotlib.get_backend().lower() == "agg"
