"""
Partially nonlocal Kerr model.

Energy I(E) = 1/2 I_L - 1/4 I_NL with I_L = integral |curl E|^2 + |E|^2 and
I_NL = integral (K * |E|^2) |E|^2. On the Nehari manifold the energy equals the
quotient I_L^2 / (4 I_NL), which is bounded below by 1/(4 K(0)). The bound is attained
exactly when K has a plateau of radius delta_K > 0 around the origin; otherwise shrinking
gradient fields approach it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import torch

from ..errors import InfimumNotAttainedError, InvalidConfigError
from ..spectral import Grid, SampledKernel, kernel_plateau_radius
from ..utils import default, exists, setup_logger

SUPPORT_THRESHOLD = 1e-12
MIN_CELLS_ACROSS_SUPPORT = 8


@dataclass
class KerrReport:
    I_L: float
    I_NL: float
    energy: float
    bound: float
    quotient: Optional[float] = None
    t_star: Optional[float] = None
    energy_at_nehari: Optional[float] = None
    attained: Optional[bool] = None
    l2_norm: Optional[float] = None
    support_diameter: Optional[float] = None

    @property
    def gap(self) -> Optional[float]:
        return None if self.quotient is None else self.quotient - self.bound

    def to_dict(self) -> Dict[str, Any]:
        return {
            "I_L": self.I_L,
            "I_NL": self.I_NL,
            "energy": self.energy,
            "quotient": self.quotient,
            "t_star": self.t_star,
            "energy_at_nehari": self.energy_at_nehari,
            "bound": self.bound,
            "gap": self.gap,
            "attained": self.attained,
            "l2_norm": self.l2_norm,
            "support_diameter": self.support_diameter,
        }


def kerr_parts(E: torch.Tensor, kernel: SampledKernel) -> Tuple[float, float]:
    """(I_L, I_NL) of a vector field."""
    grid = kernel.grid
    grid.check_field(E, vector=True)
    intensity = grid.pointwise_norm(E) ** 2
    curl_term = grid.integrate(grid.pointwise_norm(grid.curl(E)) ** 2)
    I_L = curl_term + grid.integrate(intensity)
    I_NL = grid.integrate(kernel.apply(intensity) * intensity)
    return I_L, I_NL


def kerr_functional(E: torch.Tensor, kernel: SampledKernel) -> float:
    I_L, I_NL = kerr_parts(E, kernel)
    return 0.5 * I_L - 0.25 * I_NL


def kerr_energy(E: torch.Tensor, kernel: SampledKernel) -> KerrReport:
    """
    Evaluate the Kerr energy and its Nehari data.

    The quotient, t_star and the Nehari energy are left empty when I_NL <= 0.

    Raises:
        InvalidConfigError: For the zero field
    """
    grid = kernel.grid
    if float(grid.pointwise_norm(E).max()) == 0.0:
        raise InvalidConfigError("The Kerr energy quotient is undefined for the zero field")

    I_L, I_NL = kerr_parts(E, kernel)
    report = KerrReport(
        I_L=I_L,
        I_NL=I_NL,
        energy=0.5 * I_L - 0.25 * I_NL,
        bound=1.0 / (4.0 * kernel.origin_value),
        attained=kernel_plateau_radius(kernel.spec) > 0 if exists(kernel.spec) else None,
    )
    if I_NL > 0:
        report.quotient = I_L**2 / (4.0 * I_NL)
        report.t_star = math.sqrt(I_L / I_NL)
        report.energy_at_nehari = report.quotient
    return report


def support_diameter(E: torch.Tensor, grid: Grid, threshold: float = SUPPORT_THRESHOLD, chunk: int = 2048) -> float:
    """Minimum-image diameter of the cells with |E| > threshold * max |E|."""
    magnitude = grid.pointwise_norm(E)
    peak = float(magnitude.max())
    if peak == 0.0:
        return 0.0
    support = torch.nonzero(magnitude > threshold * peak)
    n = grid.n
    best = 0
    for start in range(0, support.shape[0], chunk):
        block = support[start : start + chunk]
        delta = (block[:, None, :] - support[None, :, :] + n // 2) % n - n // 2
        best = max(best, int(delta.pow(2).sum(dim=-1).max()))
    return grid.spacing * math.sqrt(best)


def l2_fraction_within(E: torch.Tensor, grid: Grid, radius: float) -> float:
    """Share of integral |E|^2 carried by the ball |x| < radius."""
    intensity = grid.pointwise_norm(E) ** 2
    total = float(intensity.sum())
    if total == 0.0:
        raise InvalidConfigError("The L^2 share is undefined for the zero field")
    return float(intensity[grid.radius() < radius].sum()) / total


class BumpPotential:
    """
    Smooth compactly supported bump phi(y) = exp(-1 / (1 - |y / rho|^2)) for |y| < rho.

    Args:
        rho: Support radius
    """

    def __init__(self, rho: float):
        if not rho > 0:
            raise InvalidConfigError(f"Bump radius must be positive, got {rho}")
        self.rho = rho

    def reach(self, threshold: float = SUPPORT_THRESHOLD) -> float:
        return self.rho

    def __call__(self, y: torch.Tensor) -> torch.Tensor:
        s2 = y.pow(2).sum(dim=0) / self.rho**2
        inside = s2 < 1.0
        safe = torch.where(inside, 1.0 - s2, torch.ones_like(s2))
        return torch.where(inside, torch.exp(-1.0 / safe), torch.zeros_like(s2))

    def gradient(self, y: torch.Tensor) -> torch.Tensor:
        """Exact gradient -2 y phi / (rho^2 (1 - s^2)^2), zero outside the ball."""
        s2 = y.pow(2).sum(dim=0) / self.rho**2
        inside = s2 < 1.0
        safe = torch.where(inside, 1.0 - s2, torch.ones_like(s2))
        factor = torch.where(inside, -2.0 * torch.exp(-1.0 / safe) / (self.rho**2 * safe**2), torch.zeros_like(s2))
        return factor * y

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "bump", "rho": self.rho}


class GaussianPotential:
    """
    phi(y) = exp(-|y|^2 / w^2).

    Args:
        width: Width w
    """

    def __init__(self, width: float):
        if not width > 0:
            raise InvalidConfigError(f"Gaussian width must be positive, got {width}")
        self.width = width

    def reach(self, threshold: float = SUPPORT_THRESHOLD) -> float:
        """Radius beyond which |grad phi| < threshold * max |grad phi|."""
        # |grad phi| is proportional to s exp(-s^2), s = |y| / w, maximal at s = 1/sqrt(2)
        peak = math.sqrt(0.5) * math.exp(-0.5)
        lo, hi = math.sqrt(0.5), 64.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(-(mid**2)) > threshold * peak:
                lo = mid
            else:
                hi = mid
        return hi * self.width

    def __call__(self, y: torch.Tensor) -> torch.Tensor:
        return torch.exp(-y.pow(2).sum(dim=0) / self.width**2)

    def gradient(self, y: torch.Tensor) -> torch.Tensor:
        return -2.0 * y / self.width**2 * self(y)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "gaussian", "width": self.width}


Potential = Callable[[torch.Tensor], torch.Tensor]


def kerr_minimizer(
    kernel: SampledKernel,
    support_fraction: float = 0.9,
    logger: Optional[logging.Logger] = None,
) -> torch.Tensor:
    """
    Exact minimizer for a kernel with a plateau: a Nehari-scaled gradient field of small support.

    The field is the spectral gradient of a bump sampled on the grid, so it is curl-free to round-off.
    The bump ball has diameter support_fraction * delta_K, on which the kernel equals K(0); outside it
    only the spectral ringing of the sampled bump survives.

    Args:
        kernel: Sampled kernel with a KernelSpec
        support_fraction: Support diameter as a fraction of delta_K, in (0, 1]

    Returns:
        t_star * grad phi

    Raises:
        InfimumNotAttainedError: If delta_K = 0
    """
    logger = default(logger, lambda: setup_logger(__name__))
    if not exists(kernel.spec):
        raise InvalidConfigError("kerr_minimizer needs a kernel built from a KernelSpec")
    if not (0.0 < support_fraction <= 1.0):
        raise InvalidConfigError(f"support_fraction must lie in (0, 1], got {support_fraction}")

    grid = kernel.grid
    plateau = kernel_plateau_radius(kernel.spec)
    if plateau <= 0:
        raise InfimumNotAttainedError(
            f"Kernel {kernel.spec.kind} has plateau radius 0; inf over the Nehari manifold is "
            f"1/(4 K(0)) = {1.0 / (4.0 * kernel.origin_value):.6g} but it is not attained"
        )

    bump = BumpPotential(0.5 * support_fraction * plateau)
    cells = 2.0 * bump.rho / grid.spacing
    if cells < MIN_CELLS_ACROSS_SUPPORT:
        logger.warning(
            f"Minimizer support spans {cells:.1f} cells; "
            f"the spectral curl is unreliable below {MIN_CELLS_ACROSS_SUPPORT}"
        )

    E = grid.gradient(bump(grid.coordinates()))
    report = kerr_energy(E, kernel)
    logger.info(f"Minimizer support diameter {2 * bump.rho:.4g}, quotient {report.quotient:.6g}")
    return report.t_star * E


def kerr_shrinking_member(potential: Potential, grid: Grid, n: float) -> torch.Tensor:
    """E_n(x) = n^(3/2) (grad phi)(n x), from the spectral gradient of phi(n x)."""
    return math.sqrt(n) * grid.gradient(potential(n * grid.coordinates()))


def kerr_shrinking_family(
    potential: Potential,
    kernel: SampledKernel,
    n_list: Sequence[float],
    logger: Optional[logging.Logger] = None,
) -> List[Tuple[float, KerrReport]]:
    """
    Evaluate the Kerr energy along E_n(x) = n^(3/2) (grad phi)(n x).

    The L^2 norm is independent of n while the quotient decreases to 1/(4 K(0)).

    Args:
        potential: Callable phi evaluated on coordinate tensors of shape (3, ...),
            with a `reach()` method giving the effective support radius of grad phi
        kernel: Sampled kernel on a 3-D grid
        n_list: Scale factors

    Returns:
        (n, KerrReport) per scale factor, with l2_norm and support_diameter filled in

    Raises:
        InvalidConfigError: If a member spans fewer than 8 cells across its support
    """
    logger = default(logger, lambda: setup_logger(__name__))
    grid = kernel.grid
    if grid.dim != 3:
        raise InvalidConfigError("The shrinking family lives on 3-D grids")

    reach = potential.reach() if hasattr(potential, "reach") else None
    results = []
    for n in n_list:
        if not n > 0:
            raise InvalidConfigError(f"Scale factors must be positive, got {n}")
        if exists(reach):
            diameter = 2.0 * reach / n
            if diameter / grid.spacing < MIN_CELLS_ACROSS_SUPPORT:
                raise InvalidConfigError(
                    f"n = {n:g} leaves {diameter / grid.spacing:.1f} cells across the support; "
                    f"at least {MIN_CELLS_ACROSS_SUPPORT} are needed"
                )
            if reach / n >= grid.half_width:
                logger.warning(f"n = {n:g}: support radius {reach / n:.3g} exceeds the box half-width")

        E = kerr_shrinking_member(potential, grid, n)
        report = kerr_energy(E, kernel)
        report.l2_norm = grid.lp_norm(E, 2)
        report.support_diameter = 2.0 * reach / n if exists(reach) else support_diameter(E, grid)
        logger.debug(f"n = {n:g}: quotient {report.quotient}, L2 norm {report.l2_norm:.10g}")
        results.append((n, report))
    return results


def family_rows(results: Sequence[Tuple[float, KerrReport]]) -> List[Dict[str, Any]]:
    """CSV rows (n, I_L, I_NL, quotient, bound, gap)."""
    return [
        {
            "n": n,
            "I_L": report.I_L,
            "I_NL": report.I_NL,
            "quotient": report.quotient,
            "bound": report.bound,
            "gap": report.gap,
            "l2_norm": report.l2_norm,
            "status": "ok",
        }
        for n, report in results
    ]
