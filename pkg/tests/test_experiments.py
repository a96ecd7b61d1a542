"""Scenario configs, runners at reduced scale, and artifact serialization."""

import json
import math

import numpy as np
import pytest

from spectral_lab.errors import ConfigError
from spectral_lab.experiments import (
    SCENARIOS,
    ExperimentConfig,
    _tube_cells,
    fit_loglog,
    make_config,
    positive_kernel_radius,
    run,
    run_and_save,
    save_report,
)


class TestConfig:
    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            make_config("warp-drive")

    def test_unknown_parameter(self):
        with pytest.raises(ConfigError):
            make_config("smoothing-scaling", {"velocity": 3})

    def test_defaults_filled(self):
        cfg = make_config("smoothing-scaling")
        assert cfg["N"] == 256
        assert cfg["R_sweep"] == (8.0, 16.0, 32.0, 64.0)

    def test_string_coercion(self):
        cfg = make_config("smoothing-scaling", {"N": "128", "R_sweep": "4,8"})
        assert cfg["N"] == 128
        assert cfg["R_sweep"] == (4.0, 8.0)

    def test_bad_coercion(self):
        with pytest.raises(ConfigError):
            make_config("smoothing-scaling", {"N": "many"})

    def test_every_scenario_has_seed(self):
        for name, sdef in SCENARIOS.items():
            assert "seed" in sdef.schema, name


class TestFitLoglog:
    def test_exact_power_law(self):
        xs = [2.0, 4.0, 8.0, 16.0]
        ys = [3.0 * x**-1.5 for x in xs]
        fit = fit_loglog(xs, ys)
        assert fit.slope == pytest.approx(-1.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    def test_positivity(self):
        with pytest.raises(ValueError):
            fit_loglog([1.0, 2.0], [1.0, -1.0])

    def test_need_two_points(self):
        with pytest.raises(ValueError):
            fit_loglog([1.0], [1.0])


class TestHelpers:
    def test_positive_kernel_radius_d2(self):
        # first zero of J0(2 pi r): 2.40483 / (2 pi)
        from scipy.special import jn_zeros

        assert positive_kernel_radius(2) == pytest.approx(
            float(jn_zeros(0, 1)[0]) / (2 * math.pi), abs=1e-10
        )

    def test_positive_kernel_radius_d3(self):
        # sinc(2r) first vanishes at r = 1/2
        assert positive_kernel_radius(3) == pytest.approx(0.5, abs=1e-10)

    def test_tube_cell_count(self):
        pts = _tube_cells(16.0, 0.5, 2)
        assert len(pts) == 32 * 8
        assert np.max(np.abs(pts[:, 0])) < 8.0
        assert np.max(np.abs(pts[:, 1])) < 2.0


class TestRunners:
    def test_stein_tomas_small(self):
        cfg = make_config(
            "stein-tomas-uniformity", {"R_sweep": (8.0, 16.0), "p_list": (6.0, 0.0)}
        )
        rep = run(cfg)
        header, rows = rep.tables["uniformity"]
        assert header == ("R", "p_out", "norm")
        assert len(rows) == 4
        # the sup-norm of the quadrature-normalized matrix is exactly 1
        inf_norms = [r[2] for r in rows if r[1] == "inf"]
        assert all(abs(v - 1.0) < 1e-9 for v in inf_norms)

    def test_smoothing_small(self):
        cfg = make_config(
            "smoothing-scaling", {"N": 128, "L": 128.0, "R_sweep": (4.0, 8.0, 16.0, 32.0)}
        )
        rep = run(cfg)
        assert abs(rep.summary["slope"] - 1.0) < 0.2
        assert rep.summary["identity_max_rel_error"] < 1e-8

    def test_knapp_guard_on_cell_scale(self):
        with pytest.raises(ConfigError):
            run(make_config("knapp-saturation", {"h": 0.25}))

    def test_eigen_bound_small(self):
        cfg = make_config("eigen-bound-mc", {"n_mc": 100})
        rep = run(cfg)
        header, rows = rep.tables["violations"]
        fracs = [r[1] for r in rows]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))

    @pytest.mark.slow
    def test_destruction_reduced(self):
        cfg = make_config("counterexample-destruction", {"eps_sweep": (0.25,), "n_mc": 4})
        rep = run(cfg)
        assert rep.summary["ratio_at_finest"] >= 1.5

    @pytest.mark.slow
    def test_dyadic_shell_reduced(self):
        cfg = make_config("dyadic-shell", {"N": 128, "L": 64.0, "k_max": 4})
        rep = run(cfg)
        assert rep.summary["weighted_spread"] <= 4.0
        assert rep.summary["tail_fraction"] < 0.2

    def test_tail_decay_rejects_tiny_runs(self):
        with pytest.raises(ConfigError):
            run(make_config("tail-decay", {"n_mc": 10}))


class TestArtifacts:
    def _small_report(self):
        cfg = make_config(
            "stein-tomas-uniformity", {"R_sweep": (8.0, 16.0), "p_list": (6.0,)}
        )
        return cfg, run(cfg)

    def test_csv_bytes_reproducible(self, tmp_path):
        cfg, rep = self._small_report()
        d1, d2 = tmp_path / "a", tmp_path / "b"
        save_report(rep, str(d1), wall_time=1.0)
        save_report(run(cfg), str(d2), wall_time=99.0)
        csv1 = (d1 / "stein-tomas-uniformity__uniformity.csv").read_bytes()
        csv2 = (d2 / "stein-tomas-uniformity__uniformity.csv").read_bytes()
        assert csv1 == csv2  # wall time lives only in the metadata

    def test_meta_structure(self, tmp_path):
        cfg, rep = self._small_report()
        paths = save_report(rep, str(tmp_path), wall_time=0.5)
        meta_path = [p for p in paths if p.endswith("__meta.json")][0]
        meta = json.loads(open(meta_path).read())
        assert meta["scenario"] == "stein-tomas-uniformity"
        assert meta["wall_time_seconds"] == 0.5
        fit = meta["fits"]["p-6"]
        assert set(fit) == {"xs", "ys", "slope", "intercept", "r2"}
        assert len(fit["xs"]) == len(fit["ys"]) == 2

    def test_run_and_save(self, tmp_path):
        cfg, _ = self._small_report()
        written = run_and_save(cfg, str(tmp_path))
        for p in written:
            assert open(p, "rb").read()

    def test_config_getitem(self):
        cfg = ExperimentConfig("x", {"a": 1})
        assert cfg["a"] == 1
        with pytest.raises(KeyError):
            cfg["b"]
