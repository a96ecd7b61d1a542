"""Resolvent symbols, smoothing, square-root multipliers, bumps, sphere nets."""

import math

import numpy as np
import pytest
from scipy import special

from spectral_lab.errors import (
    InvalidDimensionError,
    SingularSymbolError,
    WrongSpaceError,
)
from spectral_lab.grid import (
    FREQUENCY,
    POSITION,
    GridFunction,
    fft_inverse,
    make_grid,
)
from spectral_lab.multipliers import (
    ComplexEnergy,
    MultiplierSpec,
    cdelta_bound_ratio,
    cdelta_sqrt,
    discres_matrix,
    extension_apply,
    free_kernel,
    lowhigh_split,
    make_phi,
    resolvent_boundary,
    resolvent_symbol,
    smooth_symbol,
    sphere_net,
)


class TestComplexEnergy:
    def test_z_value(self):
        ce = ComplexEnergy(2.0, 0.1)
        assert ce.z == complex(2.0, 0.1) ** 2

    def test_eps_budget(self):
        ComplexEnergy(1.0, 0.1)  # exactly lambda/10 is allowed
        with pytest.raises(ValueError):
            ComplexEnergy(1.0, 0.11)
        with pytest.raises(ValueError):
            ComplexEnergy(-1.0, 0.0)


class TestResolventSymbol:
    def test_plane_wave_eigenfunction(self):
        # lattice plane waves diagonalize every multiplier exactly
        g = make_grid(1, 16.0, 64)
        z = complex(0.5, 0.3)
        m = resolvent_symbol(z, g)
        xi0 = 5 * g.dxi
        f = GridFunction(g, np.exp(2j * np.pi * xi0 * g.positions_1d()), POSITION)
        out = m.apply(f)
        expected = f.values / ((2 * np.pi * xi0) ** 2 - z)
        assert np.max(np.abs(out.values - expected)) < 1e-12

    def test_real_energy_needs_regularization(self):
        g = make_grid(1, 16.0, 64)
        with pytest.raises(SingularSymbolError):
            resolvent_symbol(1.0, g)
        m = resolvent_symbol(1.0, g, regularization=0.1)
        assert m.symbol is not None

    def test_boundary_spec_is_kernel_only(self):
        g = make_grid(2, 16.0, 64)
        m = resolvent_boundary(1.0, g)
        assert m.symbol is None
        with pytest.raises(SingularSymbolError):
            m.apply(GridFunction(g, np.zeros(g.shape), POSITION))


class TestFreeKernel:
    def test_d1_formula(self):
        lam = 1.5 + 0.2j
        r = np.array([0.7, 2.0])
        expected = (1j / (2 * lam)) * np.exp(1j * lam * r)
        assert np.allclose(free_kernel(1, lam)(r), expected)

    def test_d3_formula(self):
        lam = 1.0 + 0.1j
        r = np.array([0.5, 3.0])
        expected = np.exp(1j * lam * r) / (4 * np.pi * r)
        assert np.allclose(free_kernel(3, lam)(r), expected)

    def test_d2_is_hankel(self):
        val = free_kernel(2, 1.0)(np.array([1.0]))
        assert val[0] == pytest.approx(0.25j * special.hankel1(0, 1.0))

    def test_modulus_decay_exponents(self):
        # |K(r)| ~ r^((1-d)/2... explicitly: constant in d=1, 1/r in d=3
        k1 = free_kernel(1, 1.0)
        assert abs(k1(np.array([1.0]))[0]) == pytest.approx(abs(k1(np.array([9.0]))[0]))
        k3 = free_kernel(3, 1.0)
        assert abs(k3(np.array([1.0]))[0]) / abs(k3(np.array([4.0]))[0]) == pytest.approx(4.0)


class TestSmoothing:
    def test_low_high_split_exact(self):
        g = make_grid(2, 16.0, 64)
        m = resolvent_symbol(complex(1.0, 0.3), g)
        low, high = lowhigh_split(m)
        assert np.max(np.abs(low.symbol + high.symbol - m.symbol)) < 1e-14
        s = 2 * np.pi * np.sqrt(g.frequency_radius_sq())
        assert np.all(low.symbol[s >= 2.0] == 0)
        assert np.array_equal(high.symbol[s <= 1.5], np.zeros_like(m.symbol[s <= 1.5]))

    def test_smoothing_scale_recorded(self):
        g = make_grid(2, 64.0, 128)
        m = resolvent_boundary(1.0, g)
        sm = smooth_symbol(m, 8.0)
        assert sm.smoothing_scale == pytest.approx(1.0 / 8.0)
        assert np.all(np.isfinite(sm.symbol))

    def test_scale_floor(self):
        g = make_grid(2, 16.0, 64)
        with pytest.raises(ValueError):
            smooth_symbol(resolvent_boundary(1.0, g), 0.5)


class TestCdelta:
    def test_bound_ratio_small(self):
        g = make_grid(2, 64.0, 256)
        m = smooth_symbol(resolvent_boundary(1.0, g), 8.0)
        C = cdelta_sqrt(m, 1.0 / 8.0)
        assert cdelta_bound_ratio(C) <= 4.0

    def test_support_annulus(self):
        g = make_grid(2, 64.0, 256)
        C = cdelta_sqrt(smooth_symbol(resolvent_boundary(1.0, g), 4.0), 0.25)
        s = 2 * np.pi * np.sqrt(g.frequency_radius_sq())
        assert np.all(C.symbol[np.abs(s - 1.0) > 0.25] == 0)

    def test_delta_validation(self):
        g = make_grid(2, 64.0, 128)
        m = smooth_symbol(resolvent_boundary(1.0, g), 4.0)
        with pytest.raises(ValueError):
            cdelta_sqrt(m, 0.0)
        with pytest.raises(ValueError):
            cdelta_sqrt(m, 2.0)


class TestMakePhi:
    def test_symbol_nonnegative_and_supported(self):
        g = make_grid(2, 32.0, 128)
        phi = make_phi(2.0, g)
        assert np.all(phi.symbol.real >= -1e-12)
        assert np.max(np.abs(phi.symbol.imag)) < 1e-12
        outside = g.frequency_radius_sq() > (1.0 / 2.0) ** 2
        assert np.all(phi.symbol[outside] == 0)

    @pytest.mark.parametrize("R", [1.0, 2.0, 4.0])
    def test_transform_minorizes_on_ball(self, R):
        g = make_grid(2, 32.0, 128)
        phi = make_phi(R, g)
        hat = fft_inverse(GridFunction(g, phi.symbol, FREQUENCY)).values
        inside = g.position_radius_sq() <= R**2
        assert np.min(hat.real[inside]) >= 1.0 - 1e-6


class TestSphereNets:
    def test_circle_weights_exact(self):
        net = sphere_net(1.0, 8.0, 2)
        assert float(net.weights.sum()) == pytest.approx(2 * np.pi, rel=1e-12)
        assert np.allclose(np.linalg.norm(net.nodes, axis=1), 1.0)

    def test_sphere_weights_exact(self):
        lam = 1.5
        net = sphere_net(lam, 4.0, 3)
        assert float(net.weights.sum()) == pytest.approx(4 * np.pi * lam**2, rel=1e-12)
        assert np.allclose(np.linalg.norm(net.nodes, axis=1), lam)

    def test_separation(self):
        for d in (2, 3):
            net = sphere_net(1.0, 8.0, d)
            diffs = net.nodes[:, None, :] - net.nodes[None, :, :]
            dist = np.sqrt(np.sum(diffs**2, axis=2))
            np.fill_diagonal(dist, np.inf)
            assert dist.min() >= 1.0 / 8.0

    def test_max_nodes_cap(self):
        net = sphere_net(1.0, 32.0, 2, max_nodes=16)
        assert len(net) == 16

    def test_d1_unsupported(self):
        with pytest.raises(InvalidDimensionError):
            sphere_net(1.0, 8.0, 1)


class TestExtension:
    def test_circle_extension_oracle(self):
        # E1(x) for g = 1 on the unit circle is 2 pi J0(2 pi |x|)
        g = make_grid(2, 16.0, 64)
        # the box reaches |x| ~ 11, so the trapezoid rule needs well over
        # 2 pi |x| nodes before its error drops below the oscillation scale
        net = sphere_net(1.0, 32.0, 2)
        E = extension_apply(net, np.ones(len(net)), g)
        r = np.sqrt(g.position_radius_sq())
        expected = 2 * np.pi * special.j0(2 * np.pi * r)
        assert np.max(np.abs(E.values - expected)) < 1e-10

    def test_node_count_mismatch(self):
        g = make_grid(2, 16.0, 64)
        net = sphere_net(1.0, 8.0, 2)
        with pytest.raises(ValueError):
            extension_apply(net, np.ones(len(net) + 1), g)

    def test_discres_entry_modulus(self):
        net = sphere_net(1.0, 8.0, 2)
        targets = np.array([[0.0, 0.0], [1.0, 2.0]])
        S = discres_matrix(net, targets)
        assert S.shape == (2, len(net))
        assert np.allclose(np.abs(S), 1.0 / len(net))
        # at the origin every phase is 1
        assert np.allclose(S[0], 1.0 / len(net))


def test_multiplier_shape_checked():
    g = make_grid(1, 16.0, 64)
    with pytest.raises(ValueError):
        MultiplierSpec(grid=g, symbol=np.zeros(g.N + 2))
