"""
Nonlocal power-type model curl curl E + E = (K * |E|^q) |E|^(q-2) E, 1 < q < 2.

The energy is I_q(E) = 1/2 I_L - 1/(2q) I_NL with I_L = integral |curl E|^2 + |E|^2 and
I_NL = integral (K * |E|^q) |E|^q. Along a ray the energy peaks at the Nehari level
(q - 1)/(2q) (I_L^q / I_NL)^(1/(q-1)), and the least level equals (q - 1)/(2q) (max Q)^(-1/(q-1))
where Q is maximized over the unit sphere of L^(2/q). Ground states are gradients of a radial
potential built from the symmetric maximizer.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch

from ..errors import InvalidConfigError, NonConvergenceError
from ..qmax import STALL_FACTOR, MaximizeOptions, MaximizerReport, maximize_scalar_Q, signed_power
from ..spectral import DTYPE, Grid, SampledKernel
from ..utils import default, exists, setup_logger

POLISH_TOL = 1e-9
POLISH_MAX_ITER = 3000
POLISH_WINDOW = 100


@dataclass
class PolishReport:
    iterations: int
    converged: bool
    final_delta: float
    relaxation: float
    stalled: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_delta": self.final_delta,
            "relaxation": self.relaxation,
            "stalled": self.stalled,
        }


@dataclass
class PowerGroundStateReport:
    """
    Ground state diagnostics.

    predicted_energy is evaluated at realized_Q, the Q value of the profile |E_star|^q the field
    actually carries, so energy_gap checks the Nehari identity. bound_energy is evaluated at the
    scalar max_Q; assembly_gap measures how far the curl-free field falls short of it.
    """

    q: float
    p: float
    max_Q: float
    realized_Q: float
    t_star: float
    energy: float
    predicted_energy: float
    energy_gap: float
    bound_energy: float
    assembly_gap: float
    weak_residual: float
    gradient_residual: float
    curl_norm_rel: float
    nehari_defect: float
    I_L: float
    I_NL: float
    maximizer: Optional[MaximizerReport] = None
    polish: Optional[PolishReport] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "q": self.q,
            "p": self.p,
            "max_Q": self.max_Q,
            "realized_Q": self.realized_Q,
            "t_star": self.t_star,
            "energy": self.energy,
            "predicted_energy": self.predicted_energy,
            "energy_gap": self.energy_gap,
            "bound_energy": self.bound_energy,
            "assembly_gap": self.assembly_gap,
            "weak_residual": self.weak_residual,
            "gradient_residual": self.gradient_residual,
            "curl_norm_rel": self.curl_norm_rel,
            "nehari_defect": self.nehari_defect,
            "I_L": self.I_L,
            "I_NL": self.I_NL,
        }
        if exists(self.maximizer):
            data["maximizer"] = self.maximizer.to_dict()
        if exists(self.polish):
            data["polish"] = self.polish.to_dict()
        return data


def _check_exponent(q: float) -> None:
    if not 1.0 < q < 2.0:
        raise InvalidConfigError(f"Exponent q must lie in (1, 2), got {q}")


def iq_energy(E: torch.Tensor, kernel: SampledKernel, q: float) -> Tuple[float, float, float]:
    """
    Evaluate the power-type energy.

    Returns:
        (I_q, I_L, I_NL)
    """
    if not q > 1:
        raise InvalidConfigError(f"Exponent q must exceed 1, got {q}")
    grid = kernel.grid
    grid.check_field(E, vector=True)
    magnitude = grid.pointwise_norm(E)
    power = magnitude**q
    I_L = grid.integrate(grid.pointwise_norm(grid.curl(E)) ** 2) + grid.integrate(magnitude**2)
    I_NL = grid.integrate(kernel.apply(power) * power)
    return 0.5 * I_L - I_NL / (2.0 * q), I_L, I_NL


def fibering_t_star(I_L: float, I_NL: float, q: float) -> float:
    """Maximizer of t -> t^2/2 I_L - t^(2q)/(2q) I_NL."""
    if not (I_L > 0 and I_NL > 0):
        raise InvalidConfigError(f"The fibering map needs I_L > 0 and I_NL > 0, got {I_L}, {I_NL}")
    return (I_L / I_NL) ** (1.0 / (2.0 * q - 2.0))


def nehari_level(I_L: float, I_NL: float, q: float) -> float:
    """sup over t > 0 of I_q(t E)."""
    if not (I_L > 0 and I_NL > 0):
        raise InvalidConfigError(f"The Nehari level needs I_L > 0 and I_NL > 0, got {I_L}, {I_NL}")
    return (q - 1.0) / (2.0 * q) * (I_L**q / I_NL) ** (1.0 / (q - 1.0))


def predicted_energy(max_Q: float, q: float) -> float:
    return (q - 1.0) / (2.0 * q) * max_Q ** (-1.0 / (q - 1.0))


def nonlinear_term(E: torch.Tensor, kernel: SampledKernel, q: float) -> torch.Tensor:
    """N(E) = (K * |E|^q) |E|^(q-2) E, with |E|^(q-2) E := 0 where E = 0."""
    grid = kernel.grid
    return kernel.apply(grid.pointwise_norm(E) ** q) * signed_power(E, grid, q - 1.0)


def residual_q(E: torch.Tensor, kernel: SampledKernel, q: float) -> float:
    """
    Relative strong-form residual.

    ||curl curl E + E - N(E)||_2 / ||curl curl E + E||_2.
    """
    grid = kernel.grid
    linear = grid.curl_curl(E) + E
    denominator = grid.lp_norm(linear, 2)
    if denominator == 0:
        raise InvalidConfigError("The residual is undefined for the zero field")
    return grid.lp_norm(linear - nonlinear_term(E, kernel, q), 2) / denominator


def gradient_residual_q(E: torch.Tensor, kernel: SampledKernel, q: float) -> float:
    """The residual tested against gradient fields only: ||P_irr(E - N(E))||_2 / ||E||_2."""
    grid = kernel.grid
    denominator = grid.lp_norm(E, 2)
    if denominator == 0:
        raise InvalidConfigError("The residual is undefined for the zero field")
    _, irrotational = grid.helmholtz_project(E - nonlinear_term(E, kernel, q))
    return grid.lp_norm(irrotational, 2) / denominator


def realized_Q(E: torch.Tensor, kernel: SampledKernel, q: float) -> float:
    """Q(f / ||f||_p) for the profile f = |E|^q, p = 2/q."""
    grid = kernel.grid
    magnitude = grid.pointwise_norm(E)
    mass = grid.integrate(magnitude**2)
    if mass == 0:
        raise InvalidConfigError("Q is undefined for the zero field")
    return kernel.quadratic_form(magnitude**q) / mass**q


def lattice_shells(grid: Grid) -> Tuple[torch.Tensor, torch.Tensor]:
    """Distinct lattice radii in ascending order and the shell index of every cell."""
    squared = grid.lattice_offsets().pow(2).sum(dim=0)
    keys, inverse = torch.unique(squared.reshape(-1), sorted=True, return_inverse=True)
    return grid.spacing * keys.to(DTYPE).sqrt(), inverse.reshape(grid.shape)


def radial_profile(f: torch.Tensor, grid: Grid) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Average a scalar field over shells of equal lattice radius.

    Returns:
        (shell radii ascending, shell means, shell index of every cell)
    """
    grid.check_field(f, vector=False)
    radii, inverse = lattice_shells(grid)
    flat = inverse.reshape(-1)
    sums = torch.zeros(radii.shape[0], dtype=DTYPE, device=f.device).scatter_add_(0, flat, f.reshape(-1).to(DTYPE))
    counts = torch.bincount(flat, minlength=radii.shape[0]).to(DTYPE)
    return radii, sums / counts, inverse


def radial_potential(profile: torch.Tensor, radii: torch.Tensor, inverse: torch.Tensor) -> torch.Tensor:
    """Phi(r) = integral_0^r profile by the cumulative trapezoid rule, sampled on the grid."""
    shells = torch.cat([torch.zeros(1, dtype=DTYPE, device=radii.device), torch.cumulative_trapezoid(profile, radii)])
    return shells[inverse]


def radial_gradient_field(
    magnitude: torch.Tensor, radii: torch.Tensor, inverse: torch.Tensor, grid: Grid
) -> torch.Tensor:
    """Spectral gradient of Phi(r) = integral_0^r magnitude, with the origin cell set to zero."""
    E = grid.gradient(radial_potential(magnitude, radii, inverse))
    E[(slice(None),) + (grid.origin_index,) * grid.dim] = 0.0
    return E


def assemble_ground_state(f: torch.Tensor, grid: Grid, q: float) -> torch.Tensor:
    """Gradient field grad Phi with |grad Phi| following the shell profile of f^(1/q)."""
    radii, means, inverse = radial_profile(f, grid)
    return radial_gradient_field(means.clamp(min=0.0) ** (1.0 / q), radii, inverse, grid)


def polish_gradient_state(
    E: torch.Tensor,
    kernel: SampledKernel,
    q: float,
    tol: float = POLISH_TOL,
    max_iter: int = POLISH_MAX_ITER,
    relaxation: Optional[float] = None,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, PolishReport]:
    """
    Refine a gradient field towards a critical point of I_q among spectral gradient fields.

    Iterates E <- normalize(E + omega (T(E) - E)) with T(E) = P_irr N(E) / ||P_irr N(E)||_2.
    The default omega = 1/(2 - q) gives the linear rate of the scalar maximizer; if a window of
    iterations makes no progress omega drops to 1, and a second idle window stops the run.
    Every iterate stays a spectral gradient. At a fixed point t_star E satisfies P_irr(E - N(E)) = 0.

    Returns:
        (unit L^2 field, report)
    """
    logger = default(logger, lambda: setup_logger(__name__))
    grid = kernel.grid
    omega = default(relaxation, 1.0 / (2.0 - q))
    if not omega > 0:
        raise InvalidConfigError(f"Relaxation must be positive, got {omega}")

    E = E / grid.lp_norm(E, 2)
    delta = best = window_best = math.inf
    converged = stalled = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        _, target = grid.helmholtz_project(nonlinear_term(E, kernel, q))
        target = target / grid.lp_norm(target, 2)
        delta = grid.lp_norm(target - E, 2)
        if delta <= tol:
            E, converged = target, True
            break
        E = E + omega * (target - E)
        E = E / grid.lp_norm(E, 2)
        best = min(best, delta)
        if iterations % POLISH_WINDOW == 0:
            if best > STALL_FACTOR * window_best:
                if omega <= 1.0:
                    stalled = True
                    break
                logger.debug(f"Polish idle at iteration {iterations}, relaxation {omega:g} -> 1")
                omega = 1.0
            window_best = best

    if not converged:
        logger.warning(f"Gradient polish stopped after {iterations} iterations with delta {delta:.3e}")
    report = PolishReport(
        iterations=iterations,
        converged=converged,
        final_delta=delta,
        relaxation=omega,
        stalled=stalled,
    )
    return E, report


def ground_state_q(
    kernel: SampledKernel,
    q: float,
    opts: Optional[MaximizeOptions] = None,
    polish: bool = True,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, PowerGroundStateReport]:
    """
    Build the irrotational ground state for 1 < q < 2.

    Runs the symmetrized maximizer of Q at p = 2/q, polishes it without rearrangement,
    assembles E = grad Phi from the radial profile, refines it among gradient fields
    and rescales it onto the Nehari manifold.

    Args:
        kernel: Sampled nonnegative radial kernel on a 3-D grid
        q: Exponent in (1, 2)
        opts: Maximizer options; p and symmetrize are overridden
        polish: Refine the assembled field with polish_gradient_state
        logger: Optional logger instance

    Returns:
        (E_star, report)

    Raises:
        InvalidConfigError: If q is outside (1, 2) or the grid is not 3-D
        NonConvergenceError: If either maximizer run did not converge
    """
    logger = default(logger, lambda: setup_logger(__name__))
    _check_exponent(q)
    grid = kernel.grid
    if grid.dim != 3:
        raise InvalidConfigError("Ground states live on 3-D grids")

    p = 2.0 / q
    opts = replace(opts, p=p, symmetrize=True) if exists(opts) else MaximizeOptions(p=p, symmetrize=True)
    logger.info(f"Power ground state: q = {q:g}, p = {p:.6g}, grid {grid.n}^3, L = {grid.half_width:g}")

    f_sym, sym_report = maximize_scalar_Q(kernel, opts, logger=logger)
    if not sym_report.converged:
        raise NonConvergenceError(
            f"Symmetrized maximizer did not converge (delta {sym_report.final_delta:.3e}, "
            f"EL residual {sym_report.el_residual:.3e})",
            sym_report.to_dict(),
        )
    f, report = maximize_scalar_Q(kernel, replace(opts, symmetrize=False, init=f_sym), logger=logger)
    if not report.converged:
        raise NonConvergenceError(
            f"Polishing run did not converge (delta {report.final_delta:.3e}, EL residual {report.el_residual:.3e})",
            report.to_dict(),
        )

    E = assemble_ground_state(f, grid, q)
    polish_report = None
    if polish:
        E, polish_report = polish_gradient_state(E, kernel, q, logger=logger)
        # odd symmetry keeps the origin at round-off
        E[(slice(None),) + (grid.origin_index,) * grid.dim] = 0.0

    _, I_L, I_NL = iq_energy(E, kernel, q)
    t_star = fibering_t_star(I_L, I_NL, q)
    E_star = t_star * E

    energy, I_L_star, I_NL_star = iq_energy(E_star, kernel, q)
    Q_realized = realized_Q(E_star, kernel, q)
    predicted = predicted_energy(Q_realized, q)
    bound = predicted_energy(report.q_value, q)
    result = PowerGroundStateReport(
        q=q,
        p=p,
        max_Q=report.q_value,
        realized_Q=Q_realized,
        t_star=t_star,
        energy=energy,
        predicted_energy=predicted,
        energy_gap=(energy - predicted) / abs(predicted),
        bound_energy=bound,
        assembly_gap=(energy - bound) / abs(bound),
        weak_residual=residual_q(E_star, kernel, q),
        gradient_residual=gradient_residual_q(E_star, kernel, q),
        curl_norm_rel=grid.lp_norm(grid.curl(E_star), 2) / grid.lp_norm(E_star, 2),
        nehari_defect=abs(I_L_star - I_NL_star) / I_L_star,
        I_L=I_L_star,
        I_NL=I_NL_star,
        maximizer=report,
        polish=polish_report,
    )
    logger.info(
        f"I_q = {energy:.10g} (predicted {predicted:.10g}, scalar bound {bound:.10g}), "
        f"weak residual {result.weak_residual:.3e}, curl {result.curl_norm_rel:.2e}"
    )
    return E_star, result


@dataclass
class SupercriticalDemo:
    q: float
    epsilon: float
    rows: List[Dict[str, Any]] = field(default_factory=list)
    I_L_limit: float = math.nan

    @property
    def I_L_ratio(self) -> float:
        values = [row["I_L"] for row in self.rows]
        return max(values) / min(values)

    @property
    def level_decreasing(self) -> bool:
        levels = [row["nehari_level"] for row in self.rows]
        return all(b < a for a, b in zip(levels, levels[1:]))

    @property
    def I_L_bounded(self) -> bool:
        return all(row["I_L"] <= 1.1 * self.I_L_limit for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "epsilon": self.epsilon,
            "rows": self.rows,
            "I_L_limit": self.I_L_limit,
            "I_L_ratio": self.I_L_ratio,
            "I_L_bounded": self.I_L_bounded,
            "level_decreasing": self.level_decreasing,
        }


def supercritical_profile(grid: Grid, q: float, epsilon: float, n: int, sigma: Optional[float] = None) -> torch.Tensor:
    """
    Gradient of the radial potential with |grad Phi| = |x|^(-(3/q)(1 - 1/n)) cut off at epsilon.

    The cutoff is 1/2 erfc((r - epsilon)/sigma) with sigma = 2h by default, and |x| is capped below at h.
    """
    sigma = default(sigma, 2.0 * grid.spacing)
    exponent = 3.0 / q * (1.0 - 1.0 / n)
    radii, inverse = lattice_shells(grid)
    magnitude = radii.clamp(min=grid.spacing) ** (-exponent) * 0.5 * torch.special.erfc((radii - epsilon) / sigma)
    return radial_gradient_field(magnitude, radii, inverse, grid)


def supercritical_blowup_demo(
    kernel: SampledKernel,
    q: float,
    epsilon: float,
    n_list: Sequence[int],
    logger: Optional[logging.Logger] = None,
) -> SupercriticalDemo:
    """
    For q > 2 the Nehari level of increasingly singular radial fields drops towards zero.

    I_L stays below its value at the limiting exponent 3/q while I_NL grows.

    Raises:
        InvalidConfigError: If q <= 2, epsilon does not fit in the box, or an index is below 1
    """
    logger = default(logger, lambda: setup_logger(__name__))
    grid = kernel.grid
    if not q > 2:
        raise InvalidConfigError(f"The supercritical demo needs q > 2, got {q}")
    if not 0 < epsilon < grid.half_width:
        raise InvalidConfigError(f"epsilon must lie in (0, L = {grid.half_width:g}), got {epsilon}")
    if any(int(n) != n or n < 1 for n in n_list):
        raise InvalidConfigError(f"Indices must be integers >= 1, got {list(n_list)}")

    limit_exponent = 3.0 - 6.0 / q
    demo = SupercriticalDemo(
        q=q,
        epsilon=epsilon,
        I_L_limit=4.0 * math.pi * epsilon**limit_exponent / limit_exponent,
    )
    for n in n_list:
        E = supercritical_profile(grid, q, epsilon, int(n))
        _, I_L, I_NL = iq_energy(E, kernel, q)
        demo.rows.append(
            {
                "n": int(n),
                "exponent": 3.0 / q * (1.0 - 1.0 / n),
                "I_L": I_L,
                "I_NL": I_NL,
                "nehari_level": nehari_level(I_L, I_NL, q),
                "status": "ok",
            }
        )
        logger.debug(f"n = {n}: I_L = {I_L:.6g}, I_NL = {I_NL:.6g}")

    if not demo.level_decreasing:
        logger.warning("Nehari levels are not strictly decreasing; refine the grid")
    logger.info(
        f"Supercritical demo q = {q:g}: I_L ratio {demo.I_L_ratio:.3g}, level decreasing {demo.level_decreasing}"
    )
    return demo
