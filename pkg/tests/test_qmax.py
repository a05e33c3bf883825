"""
Tests for the L^p-constrained maximization of the nonlocal quadratic form.

This test file verifies that:
1. The fixed-point maximizer matches the dense brute-force oracle on tiny 1-D grids
2. Maximizers are normalized, nonnegative, satisfy the Euler-Lagrange equation and are seed independent
3. The safeguard keeps the Q history nondecreasing
4. Schwarz rearrangement preserves L^p norms and does not decrease Q
5. Concentration diagnostics recognise compact, dichotomous and vanishing fields
6. The vector maximizer reduces to the scalar one for scalar symbols
"""

import math

import numpy as np
import pytest
import torch


def _two_bumps(grid, sigma=0.15, separation=None):
    separation = separation if separation is not None else grid.half_width / 2.0
    x, y = grid.coordinates()
    left = torch.exp(-((x + separation) ** 2 + y**2) / (2 * sigma**2))
    right = torch.exp(-((x - separation) ** 2 + y**2) / (2 * sigma**2))
    return left + right


class TestMaximizeOptions:
    """Tests for option validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p": 2.0},
            {"p": 1.0},
            {"p": 0.5},
            {"p": 1.5, "relaxation": 0.0},
            {"p": 1.5, "init": "zeros"},
            {"p": 1.5, "el_tol": 0.0},
            {"p": 1.5, "stall_window": 0},
        ],
    )
    def test_invalid_options_are_rejected(self, kwargs):
        """p outside (1, 2), zero relaxation, unknown inits and empty stopping knobs raise."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.qmax import MaximizeOptions

        with pytest.raises(InvalidConfigError):
            MaximizeOptions(**kwargs)


class TestDenseOracle:
    """Tests comparing the fixed-point maximizer with the dense brute force."""

    def test_dirac_kernel_concentrates_on_one_cell(self):
        """Q(f) = ||f||_2^2 is maximized by a single cell: Q = cell_volume^(1 - 2/p)."""
        from nonlocal_maxwell.qmax import MaximizeOptions, brute_force_max_Q, maximize_scalar_Q
        from nonlocal_maxwell.spectral import Grid, SampledKernel

        grid = Grid(dim=1, n=8, half_width=1.0)
        kernel = SampledKernel.dirac(grid)
        p = 4.0 / 3.0
        expected = grid.cell_volume ** (1.0 - 2.0 / p)

        f, report = maximize_scalar_Q(kernel, MaximizeOptions(p=p))
        oracle, _ = brute_force_max_Q(kernel, p)

        assert report.converged
        assert abs(report.q_value - expected) <= 1e-10 * expected, f"Got {report.q_value}, expected {expected}"
        assert abs(oracle - report.q_value) <= 1e-6 * expected
        assert int((f > 1e-8).sum()) == 1

    def test_constant_kernel_is_maximized_by_constants(self):
        """K = c: Q = c (integral f)^2, maximal at the constant field."""
        from nonlocal_maxwell.qmax import MaximizeOptions, brute_force_max_Q, maximize_scalar_Q
        from nonlocal_maxwell.spectral import Grid, SampledKernel

        grid = Grid(dim=1, n=8, half_width=1.0)
        c, p = 0.5, 1.5
        kernel = SampledKernel.from_values(grid, torch.full(grid.shape, c, dtype=torch.float64))
        expected = c * (2 * grid.half_width) ** (2 * grid.dim * (1 - 1 / p))

        f, report = maximize_scalar_Q(kernel, MaximizeOptions(p=p))
        oracle, _ = brute_force_max_Q(kernel, p)

        assert abs(report.q_value - expected) <= 1e-10 * expected
        assert abs(oracle - expected) <= 1e-6 * expected
        assert float(f.max() - f.min()) <= 1e-10

    def test_gaussian_kernel_matches_oracle(self):
        """dim=1, n=8 gaussian kernel: power iteration and multi-start ascent agree to 1e-6."""
        from nonlocal_maxwell.qmax import MaximizeOptions, brute_force_max_Q, maximize_scalar_Q
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=1, n=8, half_width=2.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        inits = [{"init": "gaussian_bump"}] + [{"init": "random", "seed": seed} for seed in range(4)]
        best = max(maximize_scalar_Q(kernel, MaximizeOptions(p=1.5, tol=1e-13, **kw))[1].q_value for kw in inits)
        oracle, _ = brute_force_max_Q(kernel, 1.5, starts=16)

        assert abs(oracle - best) <= 1e-6 * best, f"oracle {oracle} vs {best}"

    def test_dense_matrix_reproduces_convolution(self):
        """C f equals the FFT convolution."""
        from nonlocal_maxwell.qmax import dense_convolution_matrix
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=1, n=8, half_width=2.0)
        kernel = sample_kernel(KernelSpec(kind="exponential"), grid)
        f = torch.rand(grid.shape, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
        C = dense_convolution_matrix(kernel)
        assert np.allclose(C @ f.numpy(), kernel.apply(f).numpy(), rtol=0, atol=1e-13)


class TestScalarMaximizer:
    """Tests for maximize_scalar_Q on 3-D grids."""

    @pytest.fixture(scope="class")
    def runs(self):
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=32, half_width=6.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        results = [
            maximize_scalar_Q(kernel, MaximizeOptions(p=4.0 / 3.0, init="random", seed=seed, tol=1e-11))
            for seed in (1, 2)
        ]
        return grid, kernel, results

    def test_seed_independence(self, runs):
        """Two random seeds reach the same Q within 1e-4 relative."""
        _, _, ((_, first), (_, second)) = runs
        assert abs(first.q_value - second.q_value) <= 1e-4 * first.q_value

    def test_maximizer_properties(self, runs):
        """Unit L^p norm, nonnegativity, small Euler-Lagrange residual, compact class."""
        grid, _, results = runs
        for f, report in results:
            assert abs(grid.lp_norm(f, 4.0 / 3.0) - 1.0) <= 1e-12
            assert float(f.min()) >= 0.0
            assert report.converged, f"Stopped after {report.iterations} iterations"
            assert report.el_residual <= 1e-6, f"EL residual {report.el_residual}"
            assert report.cc_class == "compact"

    def test_history_is_nondecreasing(self, runs):
        """The safeguarded ascent never loses more than round-off."""
        _, _, results = runs
        for _, report in results:
            history = np.asarray(report.q_history)
            assert np.all(np.diff(history) >= -1e-13 * history[-1])

    def test_quadratic_form_homogeneity(self, runs):
        """Q(c f) / c^2 = Q(f)."""
        from nonlocal_maxwell.qmax import quadratic_form

        _, kernel, results = runs
        f = results[0][0]
        base = quadratic_form(kernel, f)
        for c in (2.0, 10.0):
            assert abs(quadratic_form(kernel, c * f) / c**2 - base) <= 1e-12 * base

    def test_symmetrized_run_matches(self, runs):
        """Rearranging every iterate reaches the same level."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q

        _, kernel, results = runs
        _, report = maximize_scalar_Q(kernel, MaximizeOptions(p=4.0 / 3.0, symmetrize=True, tol=1e-11))
        assert abs(report.q_value - results[0][1].q_value) <= 1e-4 * report.q_value
        assert report.shift == (0, 0, 0)

    def test_safeguard_with_sign_changing_symbol(self):
        """Ball kernels have a sign-changing symbol; Q still never decreases beyond round-off."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=16, half_width=3.0)
        kernel = sample_kernel(KernelSpec(kind="ball", radius=1.0), grid)
        f, report = maximize_scalar_Q(kernel, MaximizeOptions(p=1.5, max_iter=300, relaxation=0.5))
        history = np.asarray(report.q_history)
        assert np.all(np.diff(history) >= -1e-13 * abs(history[-1]))
        assert abs(grid.lp_norm(f, 1.5) - 1.0) <= 1e-12


class TestStoppingRule:
    """Tests for how the maximizer decides to stop."""

    @pytest.fixture(scope="class")
    def kernel(self):
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        return sample_kernel(KernelSpec(kind="gaussian"), Grid(dim=3, n=16, half_width=4.0))

    def test_unreachable_tolerance_ends_on_the_residual(self, kernel):
        """With tol far below round-off the run stops early and is judged by its Euler-Lagrange residual."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q

        opts = MaximizeOptions(p=4.0 / 3.0, tol=1e-30, max_iter=20000, stall_window=100)
        _, report = maximize_scalar_Q(kernel, opts)

        assert report.iterations < opts.max_iter, f"ran into the cap with delta {report.final_delta:.3e}"
        assert report.stop_reason in ("tol", "stalled")
        assert report.converged, f"EL residual {report.el_residual:.3e}"
        assert report.el_residual <= opts.el_tol

    def test_slow_progress_is_reported_as_a_stall(self, kernel):
        """Tiny relaxation steps cannot cut the step distance by 10% within a window."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q

        opts = MaximizeOptions(p=4.0 / 3.0, relaxation=0.02, safeguard=False, stall_window=3, el_tol=1e-12)
        _, report = maximize_scalar_Q(kernel, opts)

        assert report.stalled is True
        assert report.stop_reason == "stalled"
        assert report.iterations == 6, f"stopped after {report.iterations} iterations"
        assert report.converged is False
        assert report.to_dict()["stop_reason"] == "stalled"

    def test_iteration_cap(self, kernel):
        """Hitting max_iter far from the maximizer is neither converged nor stalled."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q

        _, report = maximize_scalar_Q(kernel, MaximizeOptions(p=4.0 / 3.0, tol=1e-14, max_iter=3))

        assert report.iterations == 3
        assert report.stop_reason == "max_iter"
        assert report.stalled is False
        assert report.converged is False, f"EL residual {report.el_residual:.3e}"


class TestSchwarzRearrangement:
    """Tests for schwarz_rearrange."""

    @pytest.mark.parametrize("p", [1.0, 4.0 / 3.0, 1.5, 2.0])
    def test_norms_are_preserved(self, p):
        """||f*||_p = ||f||_p to machine precision."""
        from nonlocal_maxwell.qmax import schwarz_rearrange
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=3, n=12, half_width=2.0)
        f = torch.randn(grid.shape, generator=torch.Generator().manual_seed(3), dtype=torch.float64)
        rearranged = schwarz_rearrange(f, grid)
        assert math.isclose(grid.lp_norm(rearranged, p), grid.lp_norm(f, p), rel_tol=1e-14)

    def test_symmetric_field_is_unchanged(self):
        """A sampled gaussian is already Schwarz-symmetric."""
        from nonlocal_maxwell.qmax import schwarz_rearrange
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=3, n=12, half_width=2.0)
        f = torch.exp(-grid.radius() ** 2)
        assert float((schwarz_rearrange(f, grid) - f).abs().max()) <= 1e-15

    def test_off_center_ball_becomes_centered(self):
        """An off-centre indicator turns into a centred indicator with the same cell count."""
        from nonlocal_maxwell.qmax import schwarz_rearrange
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=2, n=32, half_width=4.0)
        indicator = (grid.shift(grid.radius(), (7, -5)) < 1.2).to(torch.float64)
        rearranged = schwarz_rearrange(indicator, grid)

        count = int(indicator.sum())
        assert int(rearranged.sum()) == count
        inside = grid.radius()[rearranged > 0]
        outside = grid.radius()[rearranged == 0]
        assert float(inside.max()) <= float(outside.min())

    def test_riesz_inequality(self):
        """Q(f) <= Q(f*) for 100 random nonnegative fields and a gaussian kernel."""
        from nonlocal_maxwell.qmax import schwarz_rearrange
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=2, n=16, half_width=3.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        gen = torch.Generator().manual_seed(4)
        for _ in range(100):
            f = torch.rand(grid.shape, generator=gen, dtype=torch.float64) ** 4
            q, q_star = kernel.quadratic_form(f), kernel.quadratic_form(schwarz_rearrange(f, grid))
            assert q <= q_star * (1 + 1e-8) + 1e-12


class TestConcentrationDiagnostics:
    """Tests for the compact / vanishing / dichotomy classification."""

    def test_single_bump_is_compact(self):
        """A centred bump concentrates all its mass in a small ball."""
        from nonlocal_maxwell.qmax import concentration_diagnostics
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=2, n=64, half_width=4.0)
        f = torch.exp(-(grid.radius() ** 2) / (2 * 0.15**2))
        assert concentration_diagnostics(f, grid, 4.0 / 3.0).cc_class == "compact"

    def test_two_bumps_are_a_dichotomy(self):
        """Two equal bumps at +-L/2 give a plateau C(R) ~ 1/2."""
        from nonlocal_maxwell.qmax import concentration_diagnostics
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=2, n=64, half_width=4.0)
        profile = concentration_diagnostics(_two_bumps(grid), grid, 4.0 / 3.0)
        assert profile.cc_class == "dichotomy", f"masses {profile.masses}"
        assert abs(profile.lam - 0.5) <= 0.01

    def test_near_uniform_field_vanishes(self):
        """A flat low-amplitude field has almost no mass in any ball of radius L/4."""
        from nonlocal_maxwell.qmax import concentration_diagnostics
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=3, n=16, half_width=2.0)
        noise = torch.rand(grid.shape, generator=torch.Generator().manual_seed(5), dtype=torch.float64)
        profile = concentration_diagnostics(1.0 + 0.01 * noise, grid, 1.5)
        assert profile.cc_class == "vanishing"

    def test_recenter_moves_the_bump_to_the_origin(self):
        """recenter returns the integer shift that centres the heaviest ball."""
        from nonlocal_maxwell.qmax import recenter
        from nonlocal_maxwell.spectral import Grid

        grid = Grid(dim=2, n=32, half_width=4.0)
        centred = torch.exp(-(grid.radius() ** 2))
        moved = grid.shift(centred, (5, -9))
        back, shift = recenter(moved, grid, 1.5)
        assert shift == (-5, 9)
        assert torch.equal(back, centred)

    def test_dichotomy_split(self):
        """Far-apart halves split Q additively and the splitting factor is below one."""
        from nonlocal_maxwell.qmax import dichotomy_split_check
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=2, n=64, half_width=4.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        p = 4.0 / 3.0
        split = dichotomy_split_check(_two_bumps(grid), kernel, p, radius=1.0, center=(48, 32))

        assert abs(split.lam - 0.5) <= 1e-6
        assert split.strict
        assert math.isclose(split.splitting_factor, 2 * 0.5 ** (2 / p), rel_tol=1e-5)
        assert abs(split.q_total - split.q_split) <= 1e-6 * split.q_total


class TestVectorMaximizer:
    """Tests for maximize_vector_Q."""

    def test_scalar_tensor_symbol_matches_scalar_problem(self):
        """K_hat Id with a one-component start follows the scalar iteration exactly."""
        from nonlocal_maxwell.qmax import MaximizeOptions, gaussian_bump, maximize_scalar_Q, maximize_vector_Q
        from nonlocal_maxwell.spectral import Grid, KernelSpec, TensorMultiplier, sample_kernel

        grid = Grid(dim=3, n=16, half_width=6.0)
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        multiplier = TensorMultiplier.scalar(grid, kernel.symbol)

        start = torch.zeros((3, *grid.shape), dtype=torch.float64)
        start[0] = gaussian_bump(grid)
        _, scalar = maximize_scalar_Q(kernel, MaximizeOptions(p=1.5, tol=1e-11))
        _, vector = maximize_vector_Q(multiplier, MaximizeOptions(p=1.5, tol=1e-11, init=start))
        assert abs(scalar.q_value - vector.q_value) <= 1e-8 * scalar.q_value

    def test_constant_symbol_concentrates(self):
        """K_hat = c Id: both solvers reach c * cell_volume^(1 - 2/p) from random starts."""
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_scalar_Q, maximize_vector_Q
        from nonlocal_maxwell.spectral import Grid, ScalarMultiplier, TensorMultiplier

        grid = Grid(dim=3, n=8, half_width=1.0)
        c, p = 0.7, 4.0 / 3.0
        symbol = torch.full(grid.shape, c, dtype=torch.float64)
        expected = c * grid.cell_volume ** (1.0 - 2.0 / p)

        _, scalar = maximize_scalar_Q(ScalarMultiplier(grid, symbol), MaximizeOptions(p=p, init="random", seed=7))
        opts = MaximizeOptions(p=p, init="random", seed=7)
        U, vector = maximize_vector_Q(TensorMultiplier.scalar(grid, symbol), opts)

        assert abs(scalar.q_value - expected) <= 1e-8 * expected
        assert abs(vector.q_value - expected) <= 1e-8 * expected
        assert abs(grid.lp_norm(U, p) - 1.0) <= 1e-12

    def test_linear_step_preserves_irrotational_fields(self):
        """The dual multiplier maps gradient fields to gradient fields."""
        from nonlocal_maxwell.qmax import gaussian_bump
        from nonlocal_maxwell.spectral import Grid, KernelSpec, dual_multiplier

        grid = Grid(dim=3, n=16, half_width=6.0)
        multiplier = dual_multiplier(KernelSpec(kind="gaussian"), grid)
        U = grid.gradient(gaussian_bump(grid))
        W = multiplier.apply(U)
        solenoidal, _ = grid.helmholtz_project(W)
        assert float(solenoidal.norm()) <= 1e-10 * float(W.norm())

    def test_symmetrize_is_rejected_for_vectors(self):
        """Rearrangement has no vector counterpart."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.qmax import MaximizeOptions, maximize_vector_Q
        from nonlocal_maxwell.spectral import Grid, KernelSpec, dual_multiplier

        grid = Grid(dim=3, n=8, half_width=6.0)
        with pytest.raises(InvalidConfigError):
            multiplier = dual_multiplier(KernelSpec(kind="gaussian"), grid)
            maximize_vector_Q(multiplier, MaximizeOptions(p=1.5, symmetrize=True))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
