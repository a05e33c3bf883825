"""
Fully nonlocal model curl curl E + E = K * (|E|^(r-2) E), r > 2, through its dual functional.

With U = |E|^(r-2) E the equation becomes |U|^(r'-2) U = M * U where M is the dual tensor
multiplier K_hat [(Id - R) / (|xi|^2 + 1) + R]. Dual ground states minimize

    J(U) = 1/r' integral |U|^r' - 1/2 integral (M * U) . U

over its Nehari manifold; they come from the maximizer of the vector quadratic form on the unit
sphere of L^r'.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple, Union

import torch

from ..errors import InvalidConfigError, NonConvergenceError
from ..qmax import MaximizeOptions, MaximizerReport, gaussian_bump, maximize_vector_Q, signed_power
from ..spectral import (
    Grid,
    KernelSpec,
    SampledKernel,
    TensorMultiplier,
    dual_multiplier,
    sample_kernel,
)
from ..utils import default, exists, setup_logger


@dataclass
class DualGroundStateReport:
    r: float
    r_prime: float
    Q_U: float
    t_star: float
    J_value: float
    predicted_J: float
    dual_residual: float
    maxwell_residual_sol: float
    maxwell_residual_irr: float
    irrotational_fraction: float
    nehari_defect: float
    maximizer: Optional[MaximizerReport] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "r": self.r,
            "r_prime": self.r_prime,
            "Q_U": self.Q_U,
            "t_star": self.t_star,
            "J_value": self.J_value,
            "predicted_J": self.predicted_J,
            "dual_residual": self.dual_residual,
            "maxwell_residual_sol": self.maxwell_residual_sol,
            "maxwell_residual_irr": self.maxwell_residual_irr,
            "irrotational_fraction": self.irrotational_fraction,
            "nehari_defect": self.nehari_defect,
        }
        if exists(self.maximizer):
            data["maximizer"] = self.maximizer.to_dict()
        return data


def conjugate_exponent(r: float) -> float:
    return r / (r - 1.0)


def dual_energy(U: torch.Tensor, multiplier: TensorMultiplier, r_prime: float) -> float:
    """J(U) = 1/r' ||U||_r'^r' - 1/2 integral (M * U) . U."""
    grid = multiplier.grid
    grid.check_field(U, vector=True)
    return grid.integrate(grid.pointwise_norm(U) ** r_prime) / r_prime - 0.5 * multiplier.quadratic_form(U)


def dual_fibering(U: torch.Tensor, multiplier: TensorMultiplier, r_prime: float) -> Tuple[float, float]:
    """
    Peak of t -> J(t U) for 1 < r' < 2.

    Returns:
        (t_star, J(t_star U)) with t_star = (Q_U / ||U||_r'^r')^(1/(r'-2))

    Raises:
        InvalidConfigError: If the quadratic form of U is not positive
    """
    grid = multiplier.grid
    mass = grid.integrate(grid.pointwise_norm(U) ** r_prime)
    q_value = multiplier.quadratic_form(U)
    if not (mass > 0 and q_value > 0):
        raise InvalidConfigError(f"The dual fibering map needs ||U|| > 0 and Q_U > 0, got {mass}, {q_value}")
    t_star = (q_value / mass) ** (1.0 / (r_prime - 2.0))
    return t_star, dual_energy(t_star * U, multiplier, r_prime)


def predicted_dual_level(U: torch.Tensor, multiplier: TensorMultiplier, r_prime: float) -> float:
    """((2 - r')/(2 r')) (||U||_r'^2 / Q_U)^(r'/(2 - r'))."""
    grid = multiplier.grid
    norm = grid.lp_norm(U, r_prime)
    q_value = multiplier.quadratic_form(U)
    return (2.0 - r_prime) / (2.0 * r_prime) * (norm**2 / q_value) ** (r_prime / (2.0 - r_prime))


def _relative(defect: torch.Tensor, reference: torch.Tensor) -> float:
    scale = float(reference.abs().pow(2).sum().sqrt())
    value = float(defect.abs().pow(2).sum().sqrt())
    return value / scale if scale > 0 else value


def maxwell_residual(E: torch.Tensor, U: torch.Tensor, kernel: SampledKernel) -> Tuple[float, float]:
    """
    Spectral defects of the split Maxwell system.

    Solenoidal: (|xi|^2 + 1)(Id - R) E_hat = K_hat (Id - R) U_hat.
    Irrotational: R E_hat = K_hat R U_hat.

    Returns:
        (res_sol, res_irr), each relative to the L2 norm of its left-hand side
    """
    grid = kernel.grid
    grid.check_field(E, vector=True)
    grid.check_field(U, vector=True)
    R = grid.projector_symbol()
    E_hat, U_hat = grid.fft(E), grid.fft(U)
    E_irr, U_irr = Grid.apply_symbol(R, E_hat), Grid.apply_symbol(R, U_hat)

    lhs_sol = (grid.xi_squared() + 1.0) * (E_hat - E_irr)
    res_sol = _relative(lhs_sol - kernel.symbol * (U_hat - U_irr), lhs_sol)
    res_irr = _relative(E_irr - kernel.symbol * U_irr, E_irr)
    return res_sol, res_irr


@dataclass
class PositivityTransfer:
    scalar_Q: float
    vector_Q: float

    @property
    def gap(self) -> float:
        return self.scalar_Q - self.vector_Q

    def to_dict(self) -> Dict[str, Any]:
        return {"scalar_Q": self.scalar_Q, "vector_Q": self.vector_Q, "gap": self.gap}


def positivity_transfer_check(f: torch.Tensor, kernel: SampledKernel) -> PositivityTransfer:
    """
    Compare the scalar form of f with the dual vector form of F_hat = xi / |xi| f_hat.

    Both forms are evaluated in Fourier space; F_hat is zero wherever the derivative wavevector
    vanishes, so the gap is the scalar contribution of those modes (the mean for smooth f).
    """
    grid = kernel.grid
    grid.check_field(f, vector=False)
    weight = grid.cell_volume / grid.num_cells
    f_hat = grid.fft(f)
    scalar_Q = float(weight * (kernel.symbol * f_hat.abs() ** 2).sum())

    xi = grid.wavevector()
    norm = grid.xi_squared().sqrt()
    unit = torch.where(norm > 0, xi / torch.where(norm > 0, norm, torch.ones_like(norm)), torch.zeros_like(xi))
    F_hat = unit * f_hat
    multiplier = dual_multiplier(kernel)
    vector_Q = float(weight * (Grid.apply_symbol(multiplier.symbol, F_hat) * F_hat.conj()).real.sum())
    return PositivityTransfer(scalar_Q=scalar_Q, vector_Q=vector_Q)


def dual_ground_state(
    kernel: Union[KernelSpec, SampledKernel],
    r: float,
    grid: Optional[Grid] = None,
    opts: Optional[MaximizeOptions] = None,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, torch.Tensor, DualGroundStateReport]:
    """
    Compute a dual ground state.

    Args:
        kernel: KernelSpec (sampled on `grid`) or a sampled kernel on a 3-D grid
        r: Exponent r > 2
        grid: Target grid when a KernelSpec is given
        opts: Maximizer options; p is overridden by r'
        logger: Optional logger instance

    Returns:
        (U_star, E_star, report) with E_star = |U_star|^(r'-2) U_star

    Raises:
        InvalidConfigError: If r <= 2 or the kernel has no positive quadratic form on a centred bump
        NonConvergenceError: If the maximizer did not converge
    """
    logger = default(logger, lambda: setup_logger(__name__))
    if not r > 2:
        raise InvalidConfigError(f"Exponent r must exceed 2, got {r}")
    if isinstance(kernel, KernelSpec):
        if not exists(grid):
            raise InvalidConfigError("dual_ground_state needs a grid to sample a KernelSpec")
        kernel = sample_kernel(kernel, grid, logger=logger)
    grid = kernel.grid
    if grid.dim != 3:
        raise InvalidConfigError("Dual ground states live on 3-D grids")

    r_prime = conjugate_exponent(r)
    positivity = positivity_transfer_check(gaussian_bump(grid), kernel)
    if not (positivity.scalar_Q > 0 and positivity.vector_Q > 0):
        raise InvalidConfigError(
            f"The kernel has no positive quadratic form on a centred bump "
            f"(scalar {positivity.scalar_Q:.3e}, dual {positivity.vector_Q:.3e})"
        )

    multiplier = dual_multiplier(kernel)
    opts = replace(opts, p=r_prime) if exists(opts) else MaximizeOptions(p=r_prime)
    logger.info(f"Dual ground state: r = {r:g}, r' = {r_prime:.6g}, grid {grid.n}^3, L = {grid.half_width:g}")

    U, report = maximize_vector_Q(multiplier, opts, logger=logger)
    if not report.converged:
        raise NonConvergenceError(
            f"Dual maximizer did not converge (delta {report.final_delta:.3e}, EL residual {report.el_residual:.3e})",
            report.to_dict(),
        )

    predicted = predicted_dual_level(U, multiplier, r_prime)
    t_star, J_value = dual_fibering(U, multiplier, r_prime)
    U_star = t_star * U
    E_star = signed_power(U_star, grid, r_prime - 1.0)

    KU = multiplier.apply(U_star)
    mass = grid.integrate(grid.pointwise_norm(U_star) ** r_prime)
    res_sol, res_irr = maxwell_residual(E_star, U_star, kernel)
    _, irrotational = grid.helmholtz_project(E_star)
    result = DualGroundStateReport(
        r=r,
        r_prime=r_prime,
        Q_U=multiplier.quadratic_form(U_star),
        t_star=t_star,
        J_value=J_value,
        predicted_J=predicted,
        dual_residual=grid.lp_norm(E_star - KU, 2) / grid.lp_norm(KU, 2),
        maxwell_residual_sol=res_sol,
        maxwell_residual_irr=res_irr,
        irrotational_fraction=grid.integrate(grid.pointwise_norm(irrotational) ** 2)
        / grid.integrate(grid.pointwise_norm(E_star) ** 2),
        nehari_defect=abs(mass - grid.inner(KU, U_star)) / mass,
        maximizer=report,
    )
    logger.info(
        f"J = {J_value:.10g}, dual residual {result.dual_residual:.3e}, "
        f"Maxwell residuals {res_sol:.2e} / {res_irr:.2e}, irrotational fraction {result.irrotational_fraction:.3f}"
    )
    if not math.isfinite(result.dual_residual):
        raise NonConvergenceError("Dual residual is not finite", result.to_dict())
    return U_star, E_star, result
