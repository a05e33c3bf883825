"""
Tests for kernel sampling, FFT convolution and the dual tensor multiplier.

This test file verifies that:
1. Built-in kernels are sampled at the minimum-image radius and are Schwarz-symmetric
2. convolve matches a dense periodic convolution and has the expected identity/constant behavior
3. The plateau radius delta_K is exact for the built-ins and custom tables
4. The dual multiplier acts as K_hat on the irrotational direction and K_hat / (|xi|^2 + 1) across it
5. Kernel specs are validated and edge decay is reported
"""

import logging
import math

import numpy as np
import pytest
import torch


class TestKernelSampling:
    """Tests for sample_kernel."""

    def test_ball_kernel_values(self):
        """Ball(R=0.5): 1 at the origin, 0 at min-image distance >= 0.5."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=16, half_width=2.0)
        kernel = sample_kernel(KernelSpec(kind="ball", radius=0.5), grid)
        assert kernel.origin_value == 1.0
        outside = grid.radius() >= 0.5
        assert float(kernel.values[outside].abs().max()) == 0.0
        assert float(kernel.values[~outside].min()) == 1.0

    def test_gaussian_and_exponential_values(self):
        """Gaussian origin value is the amplitude; exponential at |z| = 1 is e^-1."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=1, n=16, half_width=2.0)
        gaussian = sample_kernel(KernelSpec(kind="gaussian", amplitude=2.5), grid)
        assert gaussian.origin_value == 2.5

        exponential = sample_kernel(KernelSpec(kind="exponential"), grid)
        at_one = float(exponential.values[grid.origin_index + 4])
        assert abs(at_one - 0.367879441171) <= 1e-12

    @pytest.mark.parametrize("kind", ["gaussian", "exponential", "ball"])
    def test_builtins_are_schwarz_symmetric(self, kind):
        """Sampled values are nonincreasing along the min-image radius."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=12, half_width=3.0)
        spec = KernelSpec(kind=kind, radius=1.0 if kind == "ball" else None)
        kernel = sample_kernel(spec, grid)
        radius = grid.radius().flatten().numpy()
        values = kernel.values.flatten().numpy()
        order = np.argsort(radius, kind="stable")
        assert np.all(np.diff(values[order]) <= 1e-15)

    def test_custom_table_must_cover_the_box(self):
        """A custom_radial table shorter than sqrt(dim) L is rejected."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=8, half_width=2.0)
        short = KernelSpec(kind="custom_radial", table=((0.0, 1.0), (2.0, 0.0)))
        with pytest.raises(InvalidConfigError):
            sample_kernel(short, grid)

        covering = KernelSpec(kind="custom_radial", table=((0.0, 1.0), (1.0, 0.5), (4.0, 0.0)))
        kernel = sample_kernel(covering, grid)
        # linear interpolation between table rows
        r = float(grid.radius()[4, 4, 5])
        assert math.isclose(float(kernel.values[4, 4, 5]), 1.0 - 0.5 * r, rel_tol=1e-14)

    def test_edge_decay_warning(self, caplog):
        """A gaussian not negligible at L logs a warning."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, edge_decay, sample_kernel

        spec = KernelSpec(kind="gaussian")
        small = Grid(dim=1, n=8, half_width=2.0)
        assert math.isclose(edge_decay(spec, small), math.exp(-4.0), rel_tol=1e-14)

        logger = logging.getLogger("test_kernels.edge_decay")
        with caplog.at_level(logging.WARNING, logger=logger.name):
            sample_kernel(spec, small, logger=logger)
        assert any("box edge" in record.message for record in caplog.records)

        caplog.clear()
        with caplog.at_level(logging.WARNING, logger=logger.name):
            sample_kernel(spec, Grid(dim=1, n=8, half_width=6.0), logger=logger)
        assert not caplog.records


class TestConvolution:
    """Tests for the cell_volume-scaled circular convolution."""

    def test_dirac_kernel_is_identity(self):
        """K = 1/cell_volume at the origin reproduces f."""
        from nonlocal_maxwell.spectral import Grid, SampledKernel, convolve

        grid = Grid(dim=2, n=16, half_width=1.0)
        f = torch.randn(grid.shape, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
        out = convolve(SampledKernel.dirac(grid), f)
        assert float((out - f).abs().max()) <= 1e-12 * float(f.abs().max())

    def test_constant_input_gives_kernel_integral(self):
        """convolve(K, 1) is the constant integrate(K)."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, convolve, sample_kernel

        grid = Grid(dim=3, n=16, half_width=3.0)
        kernel = sample_kernel(KernelSpec(kind="exponential"), grid)
        out = convolve(kernel, torch.ones(grid.shape, dtype=torch.float64))
        expected = grid.integrate(kernel.values)
        assert float((out - expected).abs().max()) <= 1e-12 * expected

    def test_matches_dense_periodic_convolution(self):
        """dim=1, n=8: FFT convolution equals the O(n^2) direct sum."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, convolve, sample_kernel

        grid = Grid(dim=1, n=8, half_width=2.0)
        kernel = sample_kernel(KernelSpec(kind="exponential", amplitude=0.7), grid)
        f = torch.randn(grid.shape, generator=torch.Generator().manual_seed(1), dtype=torch.float64)

        centred = kernel.values.numpy()
        at_origin = np.roll(centred, -grid.origin_index)
        dense = np.array(
            [sum(at_origin[(i - j) % 8] * float(f[j]) for j in range(8)) for i in range(8)]
        ) * grid.spacing

        out = convolve(kernel, f).numpy()
        assert np.max(np.abs(out - dense)) <= 1e-12 * np.max(np.abs(dense))

    def test_bilinear_form_is_symmetric(self):
        """integrate(K*f g) = integrate(f K*g) for radial K."""
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=16, half_width=3.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        gen = torch.Generator().manual_seed(2)
        f = torch.rand(grid.shape, generator=gen, dtype=torch.float64)
        g = torch.rand(grid.shape, generator=gen, dtype=torch.float64)
        left = grid.inner(kernel.apply(f), g)
        right = grid.inner(f, kernel.apply(g))
        assert abs(left - right) <= 1e-10 * abs(left)


class TestPlateauRadius:
    """Tests for kernel_plateau_radius."""

    def test_builtin_plateaus(self):
        """Gaussian and exponential have delta_K = 0, ball(R) has delta_K = R."""
        from nonlocal_maxwell.spectral import KernelSpec, kernel_plateau_radius

        assert kernel_plateau_radius(KernelSpec(kind="gaussian")) == 0.0
        assert kernel_plateau_radius(KernelSpec(kind="exponential")) == 0.0
        assert kernel_plateau_radius(KernelSpec(kind="ball", radius=0.8)) == 0.8

    def test_custom_table_plateau(self):
        """Largest table radius whose value equals the origin value."""
        from nonlocal_maxwell.spectral import KernelSpec, kernel_plateau_radius

        spec = KernelSpec(kind="custom_radial", table=((0.0, 1.0), (0.25, 1.0), (0.5, 1.0), (1.0, 0.3), (9.0, 0.0)))
        assert kernel_plateau_radius(spec) == 0.5

        decreasing = KernelSpec(kind="custom_radial", table=((0.0, 1.0), (1.0, 0.5), (9.0, 0.0)))
        assert kernel_plateau_radius(decreasing) == 0.0


class TestDualMultiplier:
    """Tests for the tensor symbol K_hat [(Id - R) / (|xi|^2 + 1) + R]."""

    @pytest.fixture
    def setup(self):
        from nonlocal_maxwell.spectral import Grid, KernelSpec, dual_multiplier, sample_kernel

        grid = Grid(dim=3, n=12, half_width=4.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        return grid, kernel, dual_multiplier(kernel)

    def test_zero_frequency_is_scalar(self, setup):
        """At xi = 0 the symbol is K_hat(0) Id."""
        grid, kernel, multiplier = setup
        expected = float(kernel.symbol[0, 0, 0]) * torch.eye(3, dtype=torch.float64)
        assert torch.allclose(multiplier.symbol[:, :, 0, 0, 0], expected, rtol=0, atol=1e-15)

    def test_action_along_and_across_xi(self, setup):
        """xi passes with K_hat; w perpendicular to xi gets K_hat / (|xi|^2 + 1)."""
        grid, kernel, multiplier = setup
        xi_all = grid.wavevector()
        for index in [(1, 0, 0), (2, 3, 1), (5, 7, 11), (0, 4, 9)]:
            xi = xi_all[(slice(None), *index)]
            symbol = multiplier.symbol[(slice(None), slice(None), *index)]
            k_hat = float(kernel.symbol[index])
            assert torch.allclose(symbol @ xi, k_hat * xi, rtol=1e-12, atol=1e-14)

            w = torch.linalg.cross(xi, torch.tensor([0.3, -1.0, 0.7], dtype=torch.float64))
            factor = k_hat / (float(xi.dot(xi)) + 1.0)
            assert torch.allclose(symbol @ w, factor * w, rtol=1e-12, atol=1e-14)

    def test_symbol_symmetries(self, setup):
        """Symbol is symmetric and even in xi."""
        grid, _, multiplier = setup
        symbol = multiplier.symbol
        assert torch.equal(symbol, symbol.transpose(0, 1))
        reflected = torch.roll(torch.flip(symbol, dims=(2, 3, 4)), shifts=(1, 1, 1), dims=(2, 3, 4))
        scale = float(symbol.abs().max())
        assert float((reflected - symbol).abs().max()) <= 1e-13 * scale

    def test_composed_convolution_matches_multiplier(self, setup):
        """Helmholtz split + resolvent + K* equals the assembled tensor multiplier."""
        from nonlocal_maxwell.spectral import dual_convolve_composed

        grid, kernel, multiplier = setup
        U = torch.randn((3, *grid.shape), generator=torch.Generator().manual_seed(5), dtype=torch.float64)
        direct = multiplier.apply(U)
        composed = dual_convolve_composed(U, kernel)
        assert float((direct - composed).norm()) <= 1e-12 * float(direct.norm())

    def test_needs_three_dimensions(self):
        """The dual multiplier is only defined on 3-D grids."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.spectral import Grid, KernelSpec, dual_multiplier

        with pytest.raises(InvalidConfigError):
            dual_multiplier(KernelSpec(kind="gaussian"), Grid(dim=2, n=8, half_width=6.0))


class TestKernelSpec:
    """Tests for KernelSpec validation and JSON mapping."""

    def test_from_dict_round_trip(self):
        """to_dict(from_dict(d)) reproduces the JSON schema."""
        from nonlocal_maxwell.spectral import KernelSpec

        data = {"kind": "ball", "amplitude": 2.0, "radius": 0.5}
        assert KernelSpec.from_dict(data).to_dict() == data

    @pytest.mark.parametrize(
        "data",
        [
            {"kind": "lorentzian"},
            {"kind": "gaussian", "amplitude": -1.0},
            {"kind": "ball"},
            {"kind": "custom_radial", "table": [[0.0, 1.0]]},
            {"kind": "custom_radial", "table": [[0.0, 1.0], [0.0, 0.5]]},
            {"kind": "gaussian", "width": 2.0},
            {"amplitude": 1.0},
        ],
    )
    def test_invalid_specs_are_rejected(self, data):
        """Unknown kinds, nonpositive amplitudes, missing radii and bad tables raise."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.spectral import KernelSpec

        with pytest.raises(InvalidConfigError):
            KernelSpec.from_dict(data)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
