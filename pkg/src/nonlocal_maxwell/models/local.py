"""
Explicit solutions of the local equation curl curl E + sign E = sign |E|^(2q-2) E.

Every family member is a unit radial gradient field E = grad Phi supported on a ball or an
annulus. A jump of |E| at radius r0 is smoothed into 1/2 erfc((r - r0) / sigma), the ball's
hedgehog point at the origin into erf(r / sigma), and Phi is the exact antiderivative of the
resulting profile, so curl E vanishes spectrally.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence

import torch

from ..errors import InvalidConfigError
from ..spectral import DTYPE, Grid
from ..utils import default, exists, setup_logger

Family = Literal["shrinking_ball", "annulus"]

# sigma in grid cells when none is given
DEFAULT_SIGMA_CELLS = 4.0
# mollified profiles must have decayed this many widths before the box edge
SIGMA_GUARD = 3.0


@dataclass(frozen=True)
class LocalSolutionSpec:
    """
    A member of the explicit solution families.

    Args:
        family: "shrinking_ball" (support |x| < 1/j) or "annulus" (support rho < |x| < rho + 1/j)
        j: Family index, support width 1/j
        q: Exponent of the nonlinearity, q > 1
        sign: Sign of the E term (+1 focusing model, -1 the sign-flipped variant)
        rho: Inner radius of the annulus
        sigma: Mollification width in length units; None means four grid cells
    """

    family: Family = "shrinking_ball"
    j: int = 2
    q: float = 2.0
    sign: int = 1
    rho: float = 0.0
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("shrinking_ball", "annulus"):
            raise InvalidConfigError(f"Unknown family {self.family!r}, expected shrinking_ball or annulus")
        if int(self.j) != self.j or self.j < 1:
            raise InvalidConfigError(f"Family index j must be an integer >= 1, got {self.j}")
        if not self.q > 1:
            raise InvalidConfigError(f"Exponent q must exceed 1, got {self.q}")
        if self.sign not in (1, -1):
            raise InvalidConfigError(f"sign must be +1 or -1, got {self.sign}")
        if self.rho < 0:
            raise InvalidConfigError(f"rho must be nonnegative, got {self.rho}")
        if exists(self.sigma) and self.sigma < 0:
            raise InvalidConfigError(f"sigma must be nonnegative, got {self.sigma}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LocalSolutionSpec":
        allowed = {"family", "j", "q", "sign", "rho", "sigma"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise InvalidConfigError(f"Unknown local model field(s): {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "j": self.j,
            "q": self.q,
            "sign": self.sign,
            "rho": self.rho,
            "sigma": self.sigma,
        }

    @property
    def width(self) -> float:
        return 1.0 / self.j

    @property
    def inner_radius(self) -> float:
        return self.rho if self.family == "annulus" else 0.0

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.width

    def resolve_sigma(self, grid: Grid) -> float:
        return default(self.sigma, DEFAULT_SIGMA_CELLS * grid.spacing)


@dataclass
class LocalEnergy:
    """I = 1/2 linear - sign / (2q) nonlinear."""

    energy: float
    linear: float
    nonlinear: float

    def to_dict(self) -> Dict[str, Any]:
        return {"I": self.energy, "I_L": self.linear, "nonlinear": self.nonlinear}


def _erfc_antiderivative(x: torch.Tensor) -> torch.Tensor:
    return x * torch.special.erfc(x) - torch.exp(-(x**2)) / math.sqrt(math.pi)


def _ramp_potential(r: torch.Tensor, r0: float, sigma: float) -> torch.Tensor:
    """Antiderivative from 0 of 1/2 erfc((s - r0) / sigma); min(r, r0) when sigma = 0."""
    if sigma == 0:
        return torch.clamp(r, max=r0)
    start = _erfc_antiderivative(torch.tensor(-r0 / sigma, dtype=DTYPE))
    return 0.5 * sigma * (_erfc_antiderivative((r - r0) / sigma) - start)


def _core_potential(r: torch.Tensor, sigma: float) -> torch.Tensor:
    """Antiderivative from 0 of erfc(s / sigma)."""
    return sigma * (_erfc_antiderivative(r / sigma) + 1.0 / math.sqrt(math.pi))


def local_potential(spec: LocalSolutionSpec, grid: Grid) -> torch.Tensor:
    """
    Radial potential Phi whose gradient is the family member.

    On a ball Phi ~ |x| near the origin, a cone whose spectral derivative rings through the whole
    support. Subtracting the core term turns the profile there into erf(r / sigma), so Phi is smooth
    and |E| rises from 0 to 1 over the same width as at the outer edge.
    """
    sigma = spec.resolve_sigma(grid)
    r = grid.radius()
    potential = _ramp_potential(r, spec.outer_radius, sigma)
    if spec.inner_radius > 0:
        potential = potential - _ramp_potential(r, spec.inner_radius, sigma)
    elif sigma > 0:
        potential = potential - _core_potential(r, sigma)
    return potential


def build_local_solution(
    spec: LocalSolutionSpec,
    grid: Grid,
    logger: Optional[logging.Logger] = None,
) -> torch.Tensor:
    """
    Assemble E = grad Phi for a family member.

    Args:
        spec: Family member
        grid: 3-D grid
        logger: Optional logger instance

    Returns:
        Vector field of unit radial magnitude on the support

    Raises:
        InvalidConfigError: If the (mollified) support does not fit inside the box
    """
    logger = default(logger, lambda: setup_logger(__name__))
    if grid.dim != 3:
        raise InvalidConfigError("Local solutions live on 3-D grids")

    sigma = spec.resolve_sigma(grid)
    reach = spec.outer_radius + SIGMA_GUARD * sigma
    if reach >= grid.half_width:
        raise InvalidConfigError(
            f"Support radius {spec.outer_radius:.4g} plus {SIGMA_GUARD:g} sigma ({sigma:.4g}) "
            f"does not fit in the box of half-width {grid.half_width:.4g}"
        )
    if 0 < sigma < grid.spacing:
        logger.warning(f"sigma = {sigma:.3g} is below the grid spacing {grid.spacing:.3g}; expect Gibbs ripples")

    return grid.gradient(local_potential(spec, grid))


def local_energy(E: torch.Tensor, grid: Grid, q: float, sign: int = 1) -> LocalEnergy:
    """
    Energy of the local model.

    I(E) = 1/2 integral (|curl E|^2 + sign |E|^2) - sign / (2q) integral |E|^(2q)
    """
    grid.check_field(E, vector=True)
    magnitude = grid.pointwise_norm(E)
    curl_term = grid.integrate(grid.pointwise_norm(grid.curl(E)) ** 2)
    linear = curl_term + sign * grid.integrate(magnitude**2)
    nonlinear = grid.integrate(magnitude ** (2.0 * q))
    return LocalEnergy(energy=0.5 * linear - sign * nonlinear / (2.0 * q), linear=linear, nonlinear=nonlinear)


def nehari_functional(E: torch.Tensor, grid: Grid, q: float, sign: int = 1) -> float:
    """I'(E)[E] = integral |curl E|^2 + sign |E|^2 - sign |E|^(2q)."""
    parts = local_energy(E, grid, q, sign)
    return parts.linear - sign * parts.nonlinear


def nehari_membership_residual(E: torch.Tensor, grid: Grid, q: float, sign: int = 1) -> float:
    """|I'(E)[E]| / ||E||_2^2; zero fields are rejected."""
    mass = grid.integrate(grid.pointwise_norm(E) ** 2)
    if mass == 0:
        raise InvalidConfigError("The Nehari residual is undefined for the zero field")
    return abs(nehari_functional(E, grid, q, sign)) / mass


def defocusing_nehari_functional(E: torch.Tensor, grid: Grid, q: float) -> float:
    """
    integral |curl E|^2 + |E|^2 + |E|^(2q) for curl curl E + E = -|E|^(2q-2) E.

    Strictly positive for E != 0, so that equation has no nontrivial solution.
    """
    magnitude = grid.pointwise_norm(E)
    curl_term = grid.integrate(grid.pointwise_norm(grid.curl(E)) ** 2)
    return curl_term + grid.integrate(magnitude**2) + grid.integrate(magnitude ** (2.0 * q))


def support_volume(spec: LocalSolutionSpec) -> float:
    return 4.0 * math.pi / 3.0 * (spec.outer_radius**3 - spec.inner_radius**3)


def exact_local_energy(spec: LocalSolutionSpec) -> float:
    """Continuum energy of the unmollified member: sign (q - 1) / (2q) |support|."""
    return spec.sign * (spec.q - 1.0) / (2.0 * spec.q) * support_volume(spec)


def evaluate_local_solution(
    spec: LocalSolutionSpec,
    grid: Grid,
    logger: Optional[logging.Logger] = None,
) -> Dict[str, Any]:
    """Build a member and report its energy parts next to the closed form."""
    E = build_local_solution(spec, grid, logger=logger)
    parts = local_energy(E, grid, spec.q, spec.sign)
    exact = exact_local_energy(spec)
    return {
        "family": spec.family,
        "q": spec.q,
        "sign": spec.sign,
        "r_or_rho": spec.outer_radius if spec.family == "shrinking_ball" else spec.rho,
        "sigma": spec.resolve_sigma(grid),
        **parts.to_dict(),
        "residual": nehari_membership_residual(E, grid, spec.q, spec.sign),
        "exact_I": exact,
        "relative_error": (parts.energy - exact) / abs(exact),
        "identity_gap": parts.energy - spec.sign * (spec.q - 1.0) / (2.0 * spec.q) * parts.nonlinear,
        "curl_norm_rel": grid.lp_norm(grid.curl(E), 2) / grid.lp_norm(E, 2),
    }


def convergence_order(coarse_error: float, fine_error: float, ratio: float) -> float:
    """log(coarse / fine) / log(ratio); nan when either error vanishes."""
    if coarse_error <= 0 or fine_error <= 0:
        return math.nan
    return math.log(coarse_error / fine_error) / math.log(ratio)


@dataclass
class SigmaRefinement:
    rows: List[Dict[str, Any]]
    extrapolated_energy: float
    extrapolated_residual: float
    observed_order: float
    residual_order: float
    exact_energy: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": self.rows,
            "extrapolated_I": self.extrapolated_energy,
            "extrapolated_residual": self.extrapolated_residual,
            "observed_order": self.observed_order,
            "residual_order": self.residual_order,
            "exact_I": self.exact_energy,
        }


def sigma_refinement(
    spec: LocalSolutionSpec,
    grid: Grid,
    sigmas: Sequence[float],
    logger: Optional[logging.Logger] = None,
) -> SigmaRefinement:
    """
    Evaluate a member for a decreasing sequence of mollification widths.

    The observed order is measured on the energy error |I_sigma - I_exact| of the last two widths
    (the residual order next to it), and both the energy and the residual are Richardson-extrapolated
    to sigma = 0 assuming first order.

    Args:
        spec: Family member (its own sigma is ignored)
        grid: 3-D grid
        sigmas: At least two positive widths

    Returns:
        SigmaRefinement with one row per width
    """
    logger = default(logger, lambda: setup_logger(__name__))
    sigmas = sorted((float(s) for s in sigmas), reverse=True)
    if len(sigmas) < 2 or sigmas[-1] <= 0:
        raise InvalidConfigError("sigma_refinement needs at least two positive widths")

    rows = []
    for sigma in sigmas:
        member = LocalSolutionSpec(**{**spec.to_dict(), "sigma": sigma})
        rows.append(evaluate_local_solution(member, grid, logger=logger))
        logger.debug(f"sigma = {sigma:.4g}: I = {rows[-1]['I']:.6g}, residual = {rows[-1]['residual']:.4g}")

    coarse, fine = rows[-2], rows[-1]
    ratio = sigmas[-2] / sigmas[-1]
    exact = exact_local_energy(spec)
    energy_order = convergence_order(abs(coarse["I"] - exact), abs(fine["I"] - exact), ratio)
    residual_order = convergence_order(coarse["residual"], fine["residual"], ratio)

    def extrapolate(key: str) -> float:
        return (ratio * fine[key] - coarse[key]) / (ratio - 1.0)

    result = SigmaRefinement(
        rows=rows,
        extrapolated_energy=extrapolate("I"),
        extrapolated_residual=abs(extrapolate("residual")),
        observed_order=energy_order,
        residual_order=residual_order,
        exact_energy=exact,
    )
    logger.info(
        f"sigma refinement: I -> {result.extrapolated_energy:.6g} (exact {result.exact_energy:.6g}), "
        f"energy order {energy_order:.2f}, residual order {residual_order:.2f}"
    )
    return result
