"""Random potentials, decompositions, and sub-gaussian sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_lab.errors import (
    BoxTooSmallError,
    InvalidDimensionError,
    MisalignedScaleError,
    ParameterOverflowError,
)
from spectral_lab.grid import (
    POSITION,
    GridFunction,
    lp_norm,
    make_grid,
    min_pairwise_distance,
)
from spectral_lab.potentials import (
    BERNOULLI,
    GAUSSIAN,
    RandomizationScheme,
    anderson_potential,
    dyadic_levels,
    knapp_tube,
    load_field,
    randomize,
    sample_subgaussian,
    save_field,
    sparse_split,
    subgaussian_norm_est,
    tube_potential,
)


class TestAndersonPotential:
    def test_cell_placement(self):
        g = make_grid(1, 8.0, 64)
        V = anderson_potential({(0,): 2.0}, 1.0, g)
        x = g.positions_1d()
        inside = (x >= 0.0) & (x < 1.0)
        assert np.all(V.values[inside] == 2.0)
        assert np.all(V.values[~inside] == 0.0)

    def test_scalar_key_1d(self):
        g = make_grid(1, 8.0, 64)
        a = anderson_potential({-1: 1.0}, 1.0, g)
        b = anderson_potential({(-1,): 1.0}, 1.0, g)
        assert np.array_equal(a.values, b.values)

    def test_misaligned_scale(self):
        g = make_grid(1, 8.0, 64)
        with pytest.raises(MisalignedScaleError):
            anderson_potential({(0,): 1.0}, 0.3, g)

    def test_cell_outside_box(self):
        g = make_grid(1, 8.0, 64)
        with pytest.raises(BoxTooSmallError):
            anderson_potential({(10,): 1.0}, 1.0, g)

    def test_wrong_key_dimension(self):
        g = make_grid(2, 8.0, 64)
        with pytest.raises(InvalidDimensionError):
            anderson_potential({(0,): 1.0}, 1.0, g)


class TestRandomize:
    def test_deterministic(self):
        g = make_grid(2, 8.0, 32)
        profile = GridFunction(g, np.ones(g.shape), POSITION)
        scheme = RandomizationScheme(h=1.0, seed=42)
        a = randomize(profile, scheme, stream=0)
        b = randomize(profile, scheme, stream=0)
        assert np.array_equal(a.realized.values, b.realized.values)
        c = randomize(profile, scheme, stream=1)
        assert not np.array_equal(a.realized.values, c.realized.values)

    def test_signs_constant_per_cell(self):
        g = make_grid(1, 8.0, 64)
        profile = GridFunction(g, np.ones(g.shape), POSITION)
        V = randomize(profile, RandomizationScheme(h=1.0, seed=7))
        vals = V.realized.values.real.reshape(8, 8)  # 8 cells of 8 points
        assert np.all(vals == vals[:, :1])
        assert set(np.unique(vals)) <= {-1.0, 1.0}

    def test_bernoulli_preserves_lq_norm(self):
        # |omega_j| = 1, so every L^q norm of the realization is unchanged
        g = make_grid(2, 8.0, 32)
        rng = np.random.default_rng(5)
        profile = GridFunction(g, rng.standard_normal(g.shape), POSITION)
        V = randomize(profile, RandomizationScheme(h=1.0, seed=3))
        for q in (1.0, 2.0, 4.0):
            assert lp_norm(V.realized, q) == pytest.approx(lp_norm(profile, q), rel=1e-12)

    def test_bad_scale(self):
        with pytest.raises(MisalignedScaleError):
            RandomizationScheme(h=-1.0)


class TestTubes:
    def test_tube_support(self):
        g = make_grid(2, 32.0, 128)
        V = tube_potential(0.25, g)
        nz = np.abs(V.values) > 0
        x1 = np.broadcast_to(g.position_axes()[0], g.shape)
        x2 = np.broadcast_to(g.position_axes()[1], g.shape)
        assert np.all(np.abs(x1[nz]) < 4.0)
        assert np.all(np.abs(x2[nz]) < 2.0)
        assert np.all(V.values[nz] == 0.25)

    def test_tube_too_long(self):
        g = make_grid(2, 8.0, 64)
        with pytest.raises(BoxTooSmallError):
            tube_potential(0.1, g)

    def test_knapp_peak_value(self):
        # R=4, q=1, d=2: peak R^(-3/2) = 1/8
        g = make_grid(2, 16.0, 128)
        V = knapp_tube(4.0, 1.0, 2, g)
        assert np.max(np.abs(V.values)) == pytest.approx(0.125)

    @pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
    def test_knapp_unit_lq_norm(self, q):
        g = make_grid(2, 32.0, 256)
        sharp = knapp_tube(16.0, q, 2, g)
        assert lp_norm(sharp, q) == pytest.approx(1.0, rel=0.05)
        smooth = knapp_tube(16.0, q, 2, g, smooth=True)
        assert lp_norm(smooth, q) == pytest.approx(1.0, rel=1e-10)

    def test_knapp_smooth_gradient_scale(self):
        # |grad V| * sqrt(R) / sup|V| stays O(1) for the smooth profile
        g = make_grid(2, 64.0, 512)
        for R in (16.0, 36.0):
            V = knapp_tube(R, 2.0, 2, g, smooth=True)
            gx = np.max(np.abs(np.gradient(V.values.real, g.dx, axis=1)))
            ratio = gx * math.sqrt(R) / np.max(np.abs(V.values))
            assert ratio <= 10.0

    def test_knapp_scale_floor(self):
        g = make_grid(2, 16.0, 64)
        with pytest.raises(ValueError):
            knapp_tube(2.0, 1.0, 2, g)


class TestDyadicLevels:
    def test_unit_indicator_single_level(self):
        # indicator of measure 1: budget 2^(-1) forces H_0 = 1 and V_0 = V
        g = make_grid(1, 8.0, 64)
        vals = ((g.positions_1d() >= 0) & (g.positions_1d() < 1.0)).astype(complex)
        V = GridFunction(g, vals, POSITION)
        levels = dyadic_levels(V)
        assert len(levels) == 1
        H0, V0 = levels[0]
        assert H0 == 1.0
        assert np.array_equal(V0.values, V.values)

    def test_zero_potential_empty(self):
        g = make_grid(1, 8.0, 64)
        assert dyadic_levels(GridFunction(g, np.zeros(g.shape), POSITION)) == []

    def test_two_step_heights(self):
        # 2 on a set of measure 1, 1 on a set of measure 8 (d=1, dx=1/8)
        g = make_grid(1, 32.0, 256)
        x = g.positions_1d()
        vals = np.where((x >= 0) & (x < 1), 2.0, 0.0) + np.where(
            (x >= 2) & (x < 10), 1.0, 0.0
        )
        V = GridFunction(g, vals, POSITION)
        levels = dyadic_levels(V)
        # brute-force heights: H_i = min attained t (or 0) with |{|V|>t}| <= 2^(i-1)
        a = np.abs(vals)

        def brute_H(i):
            for t in [0.0] + sorted(np.unique(a[a > 0])):
                if g.cell_volume * np.sum(a > t) <= 2.0 ** (i - 1) + 1e-12:
                    return t
            return float(a.max())

        expected = [brute_H(i) for i in range(len(levels) + 1)]
        got = [H for H, _ in levels]
        assert got == [h for h in expected[: len(got)]]

    def test_partition_exact(self):
        g = make_grid(2, 8.0, 32)
        rng = np.random.default_rng(11)
        V = GridFunction(g, rng.standard_normal(g.shape), POSITION)
        levels = dyadic_levels(V)
        total = sum(piece.values for _, piece in levels)
        assert np.array_equal(total, V.values)
        # disjoint supports make the q-th powers additive
        for q in (1.0, 2.0):
            parts = sum(lp_norm(p, q) ** q for _, p in levels)
            assert parts == pytest.approx(lp_norm(V, q) ** q, rel=1e-10)

    def test_heights_nonincreasing(self):
        g = make_grid(2, 8.0, 32)
        rng = np.random.default_rng(13)
        V = GridFunction(g, np.abs(rng.standard_normal(g.shape)), POSITION)
        heights = [H for H, _ in dyadic_levels(V)]
        assert all(a >= b for a, b in zip(heights, heights[1:]))


class TestSparseSplit:
    def _scatter(self, grid, cells):
        vals = np.zeros(grid.shape)
        for c in cells:
            idx = tuple(
                int(round((ci + grid.L / 2) / grid.dx)) for ci in c
            )
            vals[idx] = 1.0
        return GridFunction(grid, vals, POSITION)

    def test_single_cell_single_ball(self):
        g = make_grid(2, 32.0, 128)
        V = self._scatter(g, [(0.0, 0.0)])
        lev = sparse_split(V, gamma=2.0, K=1, level_index=0)
        assert lev.family_count == 1
        assert lev.max_balls_per_family == 1

    def test_partition_and_separation(self):
        g = make_grid(2, 64.0, 256)
        rng = np.random.default_rng(17)
        cells = {tuple(c) for c in rng.integers(-30, 29, size=(12, 2)).astype(float)}
        V = self._scatter(g, cells)
        lev = sparse_split(V, gamma=1.0, K=1, level_index=4)
        got = np.sort(np.concatenate([b.indices for fam in lev.families for b in fam]))
        assert np.array_equal(got, np.flatnonzero(V.values))
        n_cap = min(2**4, len(cells))
        thr = (lev.radius * n_cap) ** 1.0
        for fam in lev.families:
            ctrs = np.array([b.center for b in fam])
            if len(ctrs) > 1:
                assert min_pairwise_distance(ctrs) >= thr - 1e-9

    def test_budget_overflow(self):
        g = make_grid(2, 32.0, 128)
        cells = [(float(i), 0.0) for i in range(-4, 4)]
        V = self._scatter(g, cells)
        with pytest.raises(ParameterOverflowError):
            sparse_split(V, gamma=1.0, K=1, level_index=2)  # 8 cells > 2^2

    def test_radius_exceeds_box(self):
        g = make_grid(2, 32.0, 128)
        V = self._scatter(g, [(0.0, 0.0), (5.0, 5.0)])
        with pytest.raises(ParameterOverflowError):
            sparse_split(V, gamma=2.0, K=2, level_index=2)  # R = 2^8 > L

    def test_bad_parameters(self):
        g = make_grid(2, 32.0, 128)
        V = self._scatter(g, [(0.0, 0.0)])
        with pytest.raises(ValueError):
            sparse_split(V, gamma=0.5, K=1)


class TestSubgaussian:
    def test_bernoulli_psi2_closed_form(self):
        # |X| = 1 identically, so the psi_2 norm is exactly 1/sqrt(ln 2)
        scheme = RandomizationScheme(h=1.0, distribution=BERNOULLI, seed=1)
        est = subgaussian_norm_est(sample_subgaussian(scheme, 5000))
        assert est == pytest.approx(1.0 / math.sqrt(math.log(2.0)), rel=1e-3)

    def test_gaussian_psi2(self):
        # E exp(X^2/t^2) = (1 - 2/t^2)^(-1/2) <= 2 at t = sqrt(8/3)
        scheme = RandomizationScheme(h=1.0, distribution=GAUSSIAN, seed=2)
        est = subgaussian_norm_est(sample_subgaussian(scheme, 20000))
        assert est == pytest.approx(math.sqrt(8.0 / 3.0), rel=0.05)

    def test_sum_grows_like_sqrt_n(self):
        # psi_2 of a sum of N signs grows like sqrt(N): log-log slope 0.5 +- 0.1
        scheme = RandomizationScheme(h=1.0, distribution=BERNOULLI, seed=3)
        Ns = [1, 4, 16, 64]
        ests = []
        for i, N in enumerate(Ns):
            draws = scheme.draw(2000 * N, stream=i).reshape(2000, N).sum(axis=1)
            ests.append(subgaussian_norm_est(draws))
        slope = np.polyfit(np.log(Ns), np.log(ests), 1)[0]
        assert abs(slope - 0.5) <= 0.1

    def test_minimum_count(self):
        scheme = RandomizationScheme(h=1.0)
        with pytest.raises(ValueError):
            sample_subgaussian(scheme, 10)

    @given(seed=st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=10, deadline=None)
    def test_draws_are_signs(self, seed):
        scheme = RandomizationScheme(h=1.0, distribution=BERNOULLI, seed=seed)
        assert set(np.unique(scheme.draw(200))) <= {-1.0, 1.0}


class TestSerialization:
    def test_round_trip(self, tmp_path):
        g = make_grid(2, 8.0, 32)
        rng = np.random.default_rng(23)
        f = GridFunction(g, rng.standard_normal(g.shape).astype(np.float32), POSITION)
        path = str(tmp_path / "field.slpt")
        save_field(path, f, h=0.5, distribution=BERNOULLI, seed=99)
        loaded, meta = load_field(path)
        assert loaded.grid == g
        assert loaded.space == POSITION
        assert np.array_equal(loaded.values, f.values)  # float32 data survives exactly
        assert meta == {"h": 0.5, "distribution": BERNOULLI, "seed": 99, "space": POSITION}

    def test_sidecar_written(self, tmp_path):
        g = make_grid(1, 8.0, 32)
        path = str(tmp_path / "f.slpt")
        save_field(path, GridFunction(g, np.zeros(g.shape), POSITION))
        assert (tmp_path / "f.slpt.json").exists()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.slpt"
        path.write_bytes(b"not a field file at all, padding padding")
        with pytest.raises(ValueError):
            load_field(str(path))
