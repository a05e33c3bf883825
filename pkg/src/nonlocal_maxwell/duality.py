"""
Primal and dual ground states of m(D) u = |u|^(r-2) u on a periodic grid.

The primal functional I(u) = 1/2 integral m |u_hat|^2 - 1/r ||u||_r^r lives on H^s; the dual
functional J(v) = 1/r' ||v||_r'^r' - 1/2 integral (m^-1 v) v lives on L^r'. Ground states of the
two correspond through v = |u|^(r-2) u and share the same energy.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Literal, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from .errors import InvalidConfigError, NonConvergenceError
from .qmax import MaximizeOptions, MaximizerReport, gaussian_bump, maximize_scalar_Q, signed_power
from .spectral import DTYPE, Grid, ScalarMultiplier
from .utils import default, exists, setup_logger

SymbolForm = Literal["bessel", "custom"]


@dataclass(frozen=True)
class SymbolSpec:
    """
    Radial Fourier symbol m(xi) > 0.

    Args:
        form: "bessel" for m = (1 + |xi|^2)^s, or "custom" for a linearly interpolated (|xi|, m) table
        s: Order of the bessel symbol; s = 0 gives m = 1
        table: (|xi|, m) rows with strictly increasing |xi| (custom only)
    """

    form: SymbolForm = "bessel"
    s: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if exists(self.table):
            object.__setattr__(self, "table", tuple((float(k), float(m)) for k, m in self.table))
        self.validate()

    def validate(self) -> None:
        if self.form not in ("bessel", "custom"):
            raise InvalidConfigError(f"Unknown symbol form {self.form!r}, expected bessel or custom")
        if self.form == "bessel" and not (math.isfinite(self.s) and self.s >= 0):
            raise InvalidConfigError(f"Symbol order s must be nonnegative, got {self.s}")
        if self.form == "custom":
            if not self.table or len(self.table) < 2:
                raise InvalidConfigError("custom symbol needs a table with at least two (|xi|, m) rows")
            radii = [k for k, _ in self.table]
            if any(b <= a for a, b in zip(radii, radii[1:])):
                raise InvalidConfigError("custom symbol table |xi| values must be strictly increasing")
            if any(m <= 0 for _, m in self.table):
                raise InvalidConfigError("custom symbol values must be positive")

    @classmethod
    def from_string(cls, text: str) -> "SymbolSpec":
        """Parse "bessel:<s>"."""
        form, _, value = text.partition(":")
        if form != "bessel":
            raise InvalidConfigError(f"Symbol strings have the form bessel:<s>, got {text!r}")
        try:
            return cls(form="bessel", s=float(value) if value else 1.0)
        except ValueError as exc:
            raise InvalidConfigError(f"Malformed symbol order in {text!r}") from exc

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SymbolSpec":
        unknown = sorted(set(data) - {"form", "s", "table"})
        if unknown:
            raise InvalidConfigError(f"Unknown symbol field(s): {', '.join(unknown)}")
        table = data.get("table")
        return cls(
            form=data.get("form", "bessel"),
            s=float(data.get("s", 1.0)),
            table=tuple((k, m) for k, m in table) if exists(table) else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"form": self.form, "s": self.s}
        if exists(self.table):
            data["table"] = [list(row) for row in self.table]
        return data

    @property
    def order(self) -> float:
        """Differential order 2s used by the subcriticality bound; 0 for custom tables."""
        return 2.0 * self.s if self.form == "bessel" else 0.0

    def evaluate(self, grid: Grid) -> torch.Tensor:
        """m on the grid frequencies, FFT order."""
        xi2 = grid.xi_squared()
        if self.form == "bessel":
            return (1.0 + xi2) ** self.s
        radii, values = zip(*self.table)
        xi = xi2.sqrt()
        if float(xi.max()) > radii[-1] or radii[0] > 0:
            raise InvalidConfigError(
                f"custom symbol table covers [{radii[0]}, {radii[-1]}] but the grid needs [0, {float(xi.max()):.6g}]"
            )
        interp = np.interp(xi.cpu().numpy(), np.asarray(radii), np.asarray(values))
        return torch.from_numpy(interp).to(device=xi2.device, dtype=DTYPE)


def check_subcritical(r: float, dim: int, symbol: SymbolSpec) -> None:
    """2 < r < 2d / (d - 2s) when d > 2s."""
    if not r > 2:
        raise InvalidConfigError(f"Exponent r must exceed 2, got {r}")
    order = symbol.order
    if dim > order > 0:
        critical = 2.0 * dim / (dim - order)
        if not r < critical:
            raise InvalidConfigError(f"r = {r} is not subcritical: need r < {critical:.6g} for d = {dim}, 2s = {order}")


def spectral_energy(u: torch.Tensor, grid: Grid, m: torch.Tensor) -> float:
    """integral m |u_hat|^2 by Parseval."""
    weight = grid.cell_volume / grid.num_cells
    return float(weight * (m * grid.fft(u).abs() ** 2).sum())


def primal_energy(u: torch.Tensor, grid: Grid, m: torch.Tensor, r: float) -> float:
    return 0.5 * spectral_energy(u, grid, m) - grid.integrate(u.abs() ** r) / r


def nehari_scale(u: torch.Tensor, grid: Grid, m: torch.Tensor, r: float) -> torch.Tensor:
    """Rescale u so that integral m |u_hat|^2 = ||u||_r^r."""
    quadratic = spectral_energy(u, grid, m)
    power = grid.integrate(u.abs() ** r)
    if not (quadratic > 0 and power > 0):
        raise NonConvergenceError(f"Cannot project onto the Nehari set (quadratic {quadratic}, power {power})")
    return (quadratic / power) ** (1.0 / (r - 2.0)) * u


@dataclass
class PrimalReport:
    r: float
    I_value: float
    iterations: int
    converged: bool
    el_residual: float
    identity_gap: float
    final_delta: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "I_value": self.I_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "el_residual": self.el_residual,
            "primal_identity_gap": self.identity_gap,
            "final_delta": self.final_delta,
        }


def primal_ground_state(
    symbol: SymbolSpec,
    r: float,
    grid: Grid,
    tol: float = 1e-12,
    max_iter: int = 5000,
    init: Optional[torch.Tensor] = None,
    use_tqdm: bool = False,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, PrimalReport]:
    """
    Iterate u <- NehariScale(m^-1 (|u|^(r-2) u)) from a centred gaussian.

    Args:
        symbol: Symbol m
        r: Exponent, subcritical for the grid dimension
        grid: Scalar grid of any dimension
        tol: Stop when ||u_new - u||_2 <= tol ||u||_2
        max_iter: Iteration cap
        init: Optional starting field

    Returns:
        (u_star, report); non-convergence is reported, not raised
    """
    logger = default(logger, lambda: setup_logger(__name__))
    check_subcritical(r, grid.dim, symbol)
    m = symbol.evaluate(grid)

    u = nehari_scale(default(init, lambda: gaussian_bump(grid)).to(DTYPE), grid, m, r)
    converged = False
    delta = math.inf
    iterations = 0
    for iterations in tqdm(range(1, max_iter + 1), disable=not use_tqdm, desc="primal"):
        candidate = nehari_scale(grid.ifft(grid.fft(u.abs() ** (r - 2.0) * u) / m), grid, m, r)
        delta = grid.lp_norm(candidate - u, 2) / grid.lp_norm(candidate, 2)
        u = candidate
        if delta <= tol:
            converged = True
            break

    if not converged:
        logger.warning(f"Primal iteration stopped after {iterations} iterations with delta {delta:.3e}")

    lhs = grid.ifft(m * grid.fft(u))
    power = grid.integrate(u.abs() ** r)
    I_value = primal_energy(u, grid, m, r)
    report = PrimalReport(
        r=r,
        I_value=I_value,
        iterations=iterations,
        converged=converged,
        el_residual=grid.lp_norm(lhs - u.abs() ** (r - 2.0) * u, 2) / grid.lp_norm(lhs, 2),
        identity_gap=abs(2.0 * I_value - (1.0 - 2.0 / r) * power) / abs(2.0 * I_value),
        final_delta=delta,
    )
    logger.info(f"Primal: I = {I_value:.12g} after {iterations} iterations, EL residual {report.el_residual:.3e}")
    return u, report


@dataclass
class DualScalarReport:
    r: float
    r_prime: float
    J_value: float
    t_star: float
    dual_residual: float
    identity_gap: float
    maximizer: Optional[MaximizerReport] = None

    @property
    def converged(self) -> bool:
        return bool(self.maximizer.converged) if exists(self.maximizer) else False

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "r": self.r,
            "r_prime": self.r_prime,
            "J_value": self.J_value,
            "t_star": self.t_star,
            "dual_residual": self.dual_residual,
            "dual_identity_gap": self.identity_gap,
        }
        if exists(self.maximizer):
            data["maximizer"] = self.maximizer.to_dict()
        return data


def dual_scalar_energy(v: torch.Tensor, inverse: ScalarMultiplier, r_prime: float) -> float:
    grid = inverse.grid
    return grid.integrate(v.abs() ** r_prime) / r_prime - 0.5 * inverse.quadratic_form(v)


def dual_ground_state_scalar(
    symbol: SymbolSpec,
    r: float,
    grid: Grid,
    opts: Optional[MaximizeOptions] = None,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, DualScalarReport]:
    """
    Maximize integral (m^-1 v) v on the unit sphere of L^r', then scale onto the Nehari set of J.

    Returns:
        (v_star, report) with J(v_star) = (1/r' - 1/2) integral (m^-1 v_star) v_star
    """
    logger = default(logger, lambda: setup_logger(__name__))
    check_subcritical(r, grid.dim, symbol)
    r_prime = r / (r - 1.0)
    inverse = ScalarMultiplier(grid, 1.0 / symbol.evaluate(grid))
    opts = replace(opts, p=r_prime) if exists(opts) else MaximizeOptions(p=r_prime)

    v, report = maximize_scalar_Q(inverse, opts, logger=logger)
    q_value = inverse.quadratic_form(v)
    mass = grid.integrate(v.abs() ** r_prime)
    t_star = (q_value / mass) ** (1.0 / (r_prime - 2.0))
    v_star = t_star * v

    Kv = inverse.apply(v_star)
    J_value = dual_scalar_energy(v_star, inverse, r_prime)
    result = DualScalarReport(
        r=r,
        r_prime=r_prime,
        J_value=J_value,
        t_star=t_star,
        dual_residual=grid.lp_norm(signed_power(v_star, grid, r_prime - 1.0) - Kv, 2) / grid.lp_norm(Kv, 2),
        identity_gap=abs(2.0 * J_value - (2.0 / r_prime - 1.0) * grid.integrate(v_star.abs() ** r_prime))
        / abs(2.0 * J_value),
        maximizer=report,
    )
    logger.info(f"Dual: J = {J_value:.12g}, dual residual {result.dual_residual:.3e}")
    return v_star, result


@dataclass
class CorrespondenceReport:
    map_residual: float
    energy_gap: float
    I_value: float
    J_value: float
    shift: Tuple[int, ...] = ()
    sign: int = 1
    primal: Optional[PrimalReport] = None
    dual: Optional[DualScalarReport] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "map_residual": self.map_residual,
            "energy_gap": self.energy_gap,
            "I_value": self.I_value,
            "J_value": self.J_value,
            "shift": list(self.shift),
            "sign": self.sign,
            **self.extras,
        }
        if exists(self.primal):
            data["primal"] = self.primal.to_dict()
        if exists(self.dual):
            data["dual"] = self.dual.to_dict()
        return data


def align(reference: torch.Tensor, field_values: torch.Tensor, grid: Grid) -> Tuple[torch.Tensor, Tuple[int, ...], int]:
    """
    Translate and sign-flip `field_values` onto `reference` by the peak of their circular cross-correlation.

    Returns:
        (aligned field, cell shift, sign)
    """
    correlation = grid.ifft(grid.fft(reference) * grid.fft(field_values).conj())
    index = int(torch.argmax(correlation.abs()))
    shift = tuple(int(i) for i in np.unravel_index(index, grid.shape))
    sign = 1 if float(correlation.reshape(-1)[index]) >= 0 else -1
    return sign * grid.shift(field_values, shift), shift, sign


def duality_correspondence_check(
    u_star: torch.Tensor,
    v_star: torch.Tensor,
    grid: Grid,
    symbol: SymbolSpec,
    r: float,
) -> CorrespondenceReport:
    """
    Compare v_star with |u_star|^(r-2) u_star after alignment, and I(u_star) with J(v_star).
    """
    r_prime = r / (r - 1.0)
    m = symbol.evaluate(grid)
    mapped, shift, sign = align(v_star, u_star.abs() ** (r - 2.0) * u_star, grid)
    I_value = primal_energy(u_star, grid, m, r)
    J_value = dual_scalar_energy(v_star, ScalarMultiplier(grid, 1.0 / m), r_prime)
    return CorrespondenceReport(
        map_residual=grid.lp_norm(v_star - mapped, r_prime) / grid.lp_norm(v_star, r_prime),
        energy_gap=abs(I_value - J_value) / abs(I_value),
        I_value=I_value,
        J_value=J_value,
        shift=shift,
        sign=sign,
    )


def legendre_identity_check(z: torch.Tensor, r: float) -> Dict[str, float]:
    """
    Pointwise identities of the power pair F(u) = |u|^r / r, G(v) = |v|^r' / r'.

    Returns:
        Max relative errors of F(G'(z)) = z G'(z) - G(z) and F'(G'(z)) = z
    """
    r_prime = r / (r - 1.0)
    z = z.to(DTYPE)
    g_prime = z.abs() ** (r_prime - 2.0) * z
    lhs = g_prime.abs() ** r / r
    rhs = z * g_prime - z.abs() ** r_prime / r_prime
    inverse = g_prime.abs() ** (r - 2.0) * g_prime
    scale = z.abs().clamp(min=torch.finfo(DTYPE).tiny)
    return {
        "legendre": float(((lhs - rhs).abs() / rhs.abs().clamp(min=torch.finfo(DTYPE).tiny)).max()),
        "inverse": float(((inverse - z).abs() / scale).max()),
    }


def sech_ground_state(grid: Grid, r: float) -> torch.Tensor:
    """Exact 1-D ground state of -u'' + u = |u|^(r-2) u: (r/2)^(1/(r-2)) sech^(2/(r-2))((r-2) x / 2)."""
    if grid.dim != 1:
        raise InvalidConfigError("The closed-form ground state is one-dimensional")
    x = grid.coordinates()[0]
    return (r / 2.0) ** (1.0 / (r - 2.0)) / torch.cosh((r - 2.0) * x / 2.0) ** (2.0 / (r - 2.0))


def run_duality_check(
    symbol: SymbolSpec,
    r: float,
    grid: Grid,
    opts: Optional[MaximizeOptions] = None,
    tol: float = 1e-12,
    max_iter: int = 5000,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, torch.Tensor, CorrespondenceReport]:
    """
    Primal and dual ground states plus their correspondence.

    Raises:
        NonConvergenceError: If either iteration did not converge
    """
    logger = default(logger, lambda: setup_logger(__name__))
    logger.info(f"Duality check: {symbol.form} s = {symbol.s:g}, r = {r:g}, grid {grid.shape}, L = {grid.half_width:g}")

    u_star, primal = primal_ground_state(symbol, r, grid, tol=tol, max_iter=max_iter, logger=logger)
    v_star, dual = dual_ground_state_scalar(symbol, r, grid, opts=opts, logger=logger)
    report = duality_correspondence_check(u_star, v_star, grid, symbol, r)
    report.primal, report.dual = primal, dual

    if grid.dim == 1 and symbol.form == "bessel" and symbol.s == 1.0:
        oracle = sech_ground_state(grid, r)
        aligned, _, _ = align(oracle, u_star, grid)
        report.extras["oracle_error"] = float((aligned - oracle).abs().max())

    if not (primal.converged and dual.converged):
        raise NonConvergenceError("Duality check did not converge", report.to_dict())
    logger.info(f"Energy gap {report.energy_gap:.3e}, map residual {report.map_residual:.3e}")
    return u_star, v_star, report
