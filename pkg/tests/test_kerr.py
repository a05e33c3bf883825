"""
Tests for the partially nonlocal Kerr model.

This test file verifies that:
1. The Nehari quotient never drops below 1/(4 K(0)) and the Nehari energy matches a direct evaluation
2. Plateau kernels admit explicit minimizers that reach the bound; plateau-free kernels are rejected
3. Fields with curl, or rotated gradient fields with the same magnitude, sit strictly above the bound
4. Shrinking gradient families keep their L2 norm and approach the bound from above
"""

import math

import pytest
import torch


def _rotated_about_z(E):
    """Rotate every vector by 90 degrees about the z axis; pointwise magnitudes are unchanged."""
    return torch.stack([-E[1], E[0], E[2]])


@pytest.fixture(scope="module")
def ball_kernel():
    from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

    grid = Grid(dim=3, n=48, half_width=1.0)
    return sample_kernel(KernelSpec(kind="ball", radius=0.6), grid)


class TestKerrEnergy:
    """Tests for kerr_energy."""

    def test_random_fields_respect_the_lower_bound(self):
        """quotient >= 1/(4 K(0)) - 1e-3 for random fields and each built-in kernel."""
        from nonlocal_maxwell.models.kerr import kerr_energy
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=16, half_width=3.0)
        generator = torch.Generator().manual_seed(7)
        kernels = [
            sample_kernel(KernelSpec(kind="gaussian"), grid),
            sample_kernel(KernelSpec(kind="exponential", amplitude=2.0), grid),
            sample_kernel(KernelSpec(kind="ball", radius=1.0), grid),
        ]
        for trial in range(50):
            E = torch.randn((3, *grid.shape), generator=generator, dtype=torch.float64)
            kernel = kernels[trial % len(kernels)]
            report = kerr_energy(E, kernel)
            assert report.I_NL > 0
            assert report.quotient >= report.bound - 1e-3, f"trial {trial}: {report.quotient} < {report.bound}"

    def test_nehari_energy_matches_direct_evaluation(self, ball_kernel):
        """I(t_star E) evaluated directly equals I_L^2 / (4 I_NL) and t_star^2 = I_L / I_NL."""
        from nonlocal_maxwell.models.kerr import kerr_energy, kerr_functional

        grid = ball_kernel.grid
        E = torch.randn((3, *grid.shape), generator=torch.Generator().manual_seed(3), dtype=torch.float64)
        report = kerr_energy(E, ball_kernel)

        assert math.isclose(report.t_star**2, report.I_L / report.I_NL, rel_tol=1e-12)
        direct = kerr_functional(report.t_star * E, ball_kernel)
        assert math.isclose(direct, report.energy_at_nehari, rel_tol=1e-10)
        assert math.isclose(report.energy, 0.5 * report.I_L - 0.25 * report.I_NL, rel_tol=1e-12)

    def test_field_with_curl_is_above_the_bound(self, ball_kernel):
        """A rotating field inside the plateau has quotient > 0.25 + 1e-3."""
        from nonlocal_maxwell.models.kerr import BumpPotential, kerr_energy

        grid = ball_kernel.grid
        x = grid.coordinates()
        phi = BumpPotential(0.25)(x)
        E = torch.stack([-x[1] * phi, x[0] * phi, torch.zeros_like(phi)])

        report = kerr_energy(E, ball_kernel)
        assert report.quotient > 0.25 + 1e-3

    def test_gradient_field_beats_rotated_field(self, ball_kernel):
        """Same pointwise magnitude, the gradient version has the smaller quotient."""
        from nonlocal_maxwell.models.kerr import BumpPotential, kerr_energy

        grid = ball_kernel.grid
        E_grad = grid.gradient(BumpPotential(0.25)(grid.coordinates()))
        E_rot = _rotated_about_z(E_grad)

        assert torch.allclose(grid.pointwise_norm(E_rot), grid.pointwise_norm(E_grad))
        grad_report = kerr_energy(E_grad, ball_kernel)
        rot_report = kerr_energy(E_rot, ball_kernel)
        assert math.isclose(grad_report.I_NL, rot_report.I_NL, rel_tol=1e-10)
        assert grad_report.quotient < rot_report.quotient

    def test_zero_field_is_rejected(self, ball_kernel):
        """The quotient is undefined for E = 0."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.models.kerr import kerr_energy

        with pytest.raises(InvalidConfigError):
            kerr_energy(ball_kernel.grid.zeros(vector=True), ball_kernel)


class TestKerrMinimizer:
    """Tests for kerr_minimizer."""

    def test_ball_kernel_minimizer_reaches_the_bound(self, ball_kernel):
        """ball(0.6): concentrated in the plateau, curl-free, quotient 0.25 and on the Nehari manifold."""
        from nonlocal_maxwell.models.kerr import kerr_energy, kerr_minimizer, l2_fraction_within

        grid = ball_kernel.grid
        E = kerr_minimizer(ball_kernel)
        report = kerr_energy(E, ball_kernel)

        share = l2_fraction_within(E, grid, 0.3)
        curl = grid.lp_norm(grid.curl(E), 2) / grid.lp_norm(E, 2)
        assert share >= 0.95, f"only {share:.4f} of the L2 mass lies in the plateau"
        assert curl <= 1e-10, f"relative curl {curl:.3e}"
        assert abs(report.quotient - 0.25) <= 2e-2, f"quotient {report.quotient}"
        assert abs(report.t_star - 1.0) <= 1e-10
        assert report.attained is True

    def test_amplitude_rescales_the_bound(self):
        """ball(R) with a = 2 gives quotient 1/8."""
        from nonlocal_maxwell.models.kerr import kerr_energy, kerr_minimizer
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        kernel = sample_kernel(KernelSpec(kind="ball", amplitude=2.0, radius=0.6), Grid(dim=3, n=48, half_width=1.0))
        report = kerr_energy(kerr_minimizer(kernel), kernel)
        assert abs(report.quotient - 0.125) <= 1e-2
        assert math.isclose(report.bound, 0.125)

    def test_coarse_support_stays_curl_free(self):
        """A support of a few cells still gives a gradient field and a quotient near 1/(4a)."""
        from nonlocal_maxwell.models.kerr import kerr_energy, kerr_minimizer
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=48, half_width=2.0)
        for amplitude, tolerance in ((1.0, 2e-2), (2.0, 1e-2)):
            kernel = sample_kernel(KernelSpec(kind="ball", amplitude=amplitude, radius=0.5), grid)
            E = kerr_minimizer(kernel)
            report = kerr_energy(E, kernel)
            curl = grid.lp_norm(grid.curl(E), 2) / grid.lp_norm(E, 2)
            assert curl <= 1e-10, f"a = {amplitude}: relative curl {curl:.3e}"
            assert abs(report.quotient - 0.25 / amplitude) <= tolerance, f"a = {amplitude}: {report.quotient}"
            assert report.quotient >= report.bound - 1e-12

    def test_plateau_free_kernels_are_rejected(self):
        """Gaussian and exponential kernels have delta_K = 0."""
        from nonlocal_maxwell.errors import InfimumNotAttainedError
        from nonlocal_maxwell.models.kerr import kerr_minimizer
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        grid = Grid(dim=3, n=16, half_width=3.0)
        for kind in ("gaussian", "exponential"):
            with pytest.raises(InfimumNotAttainedError, match="not attained"):
                kerr_minimizer(sample_kernel(KernelSpec(kind=kind), grid))

    def test_support_diameter_of_a_single_cell(self, ball_kernel):
        """One occupied cell has diameter 0; two opposite cells use the minimum image."""
        from nonlocal_maxwell.models.kerr import support_diameter

        grid = ball_kernel.grid
        E = grid.zeros(vector=True)
        E[0, 24, 24, 24] = 1.0
        assert support_diameter(E, grid) == 0.0
        E[0, 0, 24, 24] = 1.0
        assert math.isclose(support_diameter(E, grid), 24 * grid.spacing)


class TestShrinkingFamily:
    """Tests for kerr_shrinking_family."""

    def test_quotient_decreases_towards_the_bound(self):
        """Gaussian kernel, gaussian potential: decreasing quotient, within 10% of 0.25 at n = 4."""
        from nonlocal_maxwell.models.kerr import GaussianPotential, kerr_shrinking_family
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        kernel = sample_kernel(KernelSpec(kind="gaussian"), Grid(dim=3, n=64, half_width=2.0))
        results = kerr_shrinking_family(GaussianPotential(0.6), kernel, [1, 2, 4])
        quotients = [report.quotient for _, report in results]

        assert quotients[0] > quotients[1] > quotients[2] > 0.25
        assert quotients[2] <= 1.1 * 0.25, f"quotients {quotients}"

    def test_l2_norm_is_scale_invariant(self):
        """||E_n||_2 is the same for n = 1 and n = 2."""
        from nonlocal_maxwell.models.kerr import GaussianPotential, kerr_shrinking_family
        from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel

        kernel = sample_kernel(KernelSpec(kind="gaussian"), Grid(dim=3, n=64, half_width=2.0))
        (_, first), (_, second) = kerr_shrinking_family(GaussianPotential(0.35), kernel, [1, 2])
        assert abs(first.l2_norm - second.l2_norm) <= 1e-6 * first.l2_norm

    def test_ball_kernel_members_inside_the_plateau(self, ball_kernel):
        """Once the support diameter is at most R the quotient sits at 0.25."""
        from nonlocal_maxwell.models.kerr import BumpPotential, kerr_shrinking_family

        results = kerr_shrinking_family(BumpPotential(1.0), ball_kernel, [4, 5])
        for n, report in results:
            assert report.support_diameter <= 0.6
            assert abs(report.quotient - 0.25) <= 2e-2, f"n = {n}: quotient {report.quotient}"

    def test_unresolved_members_are_rejected(self, ball_kernel):
        """n = 20 leaves about two cells across the support."""
        from nonlocal_maxwell.errors import InvalidConfigError
        from nonlocal_maxwell.models.kerr import BumpPotential, kerr_shrinking_family

        with pytest.raises(InvalidConfigError, match="cells across"):
            kerr_shrinking_family(BumpPotential(1.0), ball_kernel, [20])

    def test_family_rows_carry_the_gap(self, ball_kernel):
        """CSV rows list n, energies, bound and gap."""
        from nonlocal_maxwell.models.kerr import BumpPotential, family_rows, kerr_shrinking_family

        rows = family_rows(kerr_shrinking_family(BumpPotential(1.0), ball_kernel, [4]))
        assert set(rows[0]) >= {"n", "I_L", "I_NL", "quotient", "bound", "gap"}
        assert math.isclose(rows[0]["gap"], rows[0]["quotient"] - rows[0]["bound"])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
