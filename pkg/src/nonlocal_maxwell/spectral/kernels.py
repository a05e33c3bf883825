"""Convolution kernels, their Fourier symbols and the dual tensor multiplier."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
import torch

from ..errors import InvalidConfigError
from ..utils import default, exists, setup_logger
from .grid import DTYPE, Grid

KernelKind = Literal["gaussian", "exponential", "ball", "custom_radial"]
KERNEL_KINDS = ("gaussian", "exponential", "ball", "custom_radial")

# K(L) above this fraction of K(0) means the periodic images interact
EDGE_DECAY_TOLERANCE = 1e-12
PLATEAU_TOLERANCE = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """
    Radial convolution kernel K(z).

    Args:
        kind: One of
            - "gaussian": K(z) = a * exp(-|z|^2)
            - "exponential": K(z) = a * exp(-|z|)
            - "ball": K(z) = a * 1{|z| < R}
            - "custom_radial": a times the linear interpolant of a (r, value) table
        amplitude: Prefactor a > 0
        radius: Ball radius R (ball only)
        table: (r, value) pairs with strictly increasing r (custom_radial only)
    """

    kind: KernelKind
    amplitude: float = 1.0
    radius: Optional[float] = None
    table: Optional[Tuple[Tuple[float, float], ...]] = field(default=None)

    def __post_init__(self):
        if exists(self.table):
            object.__setattr__(self, "table", tuple((float(r), float(v)) for r, v in self.table))
        self.validate()

    def validate(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise InvalidConfigError(f"Unknown kernel kind {self.kind!r}, expected one of {', '.join(KERNEL_KINDS)}")
        if not (math.isfinite(self.amplitude) and self.amplitude > 0):
            raise InvalidConfigError(f"Kernel amplitude must be positive, got {self.amplitude}")
        if self.kind == "ball":
            if not exists(self.radius) or not (math.isfinite(self.radius) and self.radius > 0):
                raise InvalidConfigError(f"Ball kernel needs a positive radius, got {self.radius}")
        if self.kind == "custom_radial":
            if not self.table or len(self.table) < 2:
                raise InvalidConfigError("custom_radial kernel needs a table with at least two (r, value) rows")
            radii = [r for r, _ in self.table]
            if any(b <= a for a, b in zip(radii, radii[1:])):
                raise InvalidConfigError("custom_radial table radii must be strictly increasing")
            if radii[0] < 0:
                raise InvalidConfigError("custom_radial table radii must be nonnegative")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelSpec":
        if not isinstance(data, dict):
            raise InvalidConfigError(f"Kernel spec must be a JSON object, got {type(data).__name__}")
        unknown = sorted(set(data) - {"kind", "amplitude", "radius", "table"})
        if unknown:
            raise InvalidConfigError(f"Unknown kernel field(s): {', '.join(unknown)}")
        if "kind" not in data:
            raise InvalidConfigError("Kernel spec is missing required field: kind")
        table = data.get("table")
        try:
            return cls(
                kind=data["kind"],
                amplitude=float(data.get("amplitude", 1.0)),
                radius=float(data["radius"]) if exists(data.get("radius")) else None,
                table=tuple((r, v) for r, v in table) if exists(table) else None,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfigError):
                raise
            raise InvalidConfigError(f"Malformed kernel spec: {exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind, "amplitude": self.amplitude}
        if exists(self.radius):
            data["radius"] = self.radius
        if exists(self.table):
            data["table"] = [list(row) for row in self.table]
        return data

    def evaluate(self, r: torch.Tensor) -> torch.Tensor:
        """K as a function of the radius r >= 0."""
        r = r.to(DTYPE)
        if self.kind == "gaussian":
            values = torch.exp(-(r**2))
        elif self.kind == "exponential":
            values = torch.exp(-r)
        elif self.kind == "ball":
            values = (r < self.radius).to(DTYPE)
        else:
            radii, table_values = zip(*self.table)
            interp = np.interp(r.detach().cpu().numpy(), np.asarray(radii), np.asarray(table_values))
            values = torch.from_numpy(interp).to(device=r.device, dtype=DTYPE)
        return self.amplitude * values

    def value_at(self, r: float) -> float:
        return float(self.evaluate(torch.tensor([float(r)], dtype=DTYPE))[0])


class FourierMultiplier:
    """
    Scalar Fourier multiplier f -> F^-1(symbol * F f) on a grid.

    Applied componentwise to vector fields.
    """

    def __init__(self, grid: Grid, symbol: torch.Tensor):
        if tuple(symbol.shape) != grid.shape:
            raise InvalidConfigError(f"Symbol of shape {tuple(symbol.shape)} does not match grid {grid.shape}")
        self.grid = grid
        self.symbol = symbol.to(DTYPE)

    def apply(self, f: torch.Tensor) -> torch.Tensor:
        return self.grid.ifft(self.symbol * self.grid.fft(f))

    def quadratic_form(self, f: torch.Tensor) -> float:
        """Q(f) = integral of (K * f) . f"""
        return self.grid.inner(self.apply(f), f)

    def max_symbol(self) -> float:
        return float(self.symbol.max())


class ScalarMultiplier(FourierMultiplier):
    """Generic scalar multiplier, e.g. 1/m(xi) for the duality check."""


class SampledKernel(FourierMultiplier):
    """
    A kernel sampled on a grid with its real Fourier symbol.

    `values` is centred (the origin cell holds K(0)); the symbol is
    (FFT of the origin-shifted sample) * cell_volume, so `apply` is the
    cell_volume-scaled circular convolution.
    """

    def __init__(self, grid: Grid, values: torch.Tensor, spec: Optional[KernelSpec] = None):
        grid.check_field(values, vector=False)
        shifted = torch.fft.ifftshift(values.to(DTYPE), dim=grid.axes)
        symbol = (grid.fft(shifted) * grid.cell_volume).real
        super().__init__(grid, symbol)
        self.spec = spec
        self.values = values.to(DTYPE)

    @classmethod
    def from_values(cls, grid: Grid, values: torch.Tensor) -> "SampledKernel":
        """Wrap an arbitrary centred sample, e.g. a Dirac-like or constant kernel."""
        return cls(grid, values)

    @classmethod
    def dirac(cls, grid: Grid) -> "SampledKernel":
        values = grid.zeros()
        values[(grid.origin_index,) * grid.dim] = 1.0 / grid.cell_volume
        return cls(grid, values)

    @property
    def origin_value(self) -> float:
        return float(self.values[(self.grid.origin_index,) * self.grid.dim])


class TensorMultiplier:
    """
    Per-frequency symmetric 3x3 symbol acting on vector fields.

    Args:
        grid: 3-D grid
        symbol: Tensor of shape (3, 3, n, n, n)
    """

    def __init__(self, grid: Grid, symbol: torch.Tensor):
        if grid.dim != 3 or tuple(symbol.shape) != (3, 3, *grid.shape):
            raise InvalidConfigError(f"Tensor symbol of shape {tuple(symbol.shape)} does not match grid {grid.shape}")
        self.grid = grid
        self.symbol = symbol.to(DTYPE)

    @classmethod
    def scalar(cls, grid: Grid, symbol: torch.Tensor) -> "TensorMultiplier":
        """symbol(xi) * Id."""
        eye = torch.eye(3, dtype=DTYPE, device=symbol.device).reshape(3, 3, *([1] * grid.dim))
        return cls(grid, eye * symbol)

    def apply(self, U: torch.Tensor) -> torch.Tensor:
        self.grid.check_field(U, vector=True)
        return self.grid.ifft(self.grid.apply_symbol(self.symbol, self.grid.fft(U)))

    def quadratic_form(self, U: torch.Tensor) -> float:
        return self.grid.inner(self.apply(U), U)

    def max_symbol(self) -> float:
        """Largest eigenvalue of the symbol over all frequencies."""
        matrices = self.symbol.permute(*range(2, 2 + self.grid.dim), 0, 1)
        return float(torch.linalg.eigvalsh(matrices).max())


def sample_kernel(spec: KernelSpec, grid: Grid, logger: Optional[logging.Logger] = None) -> SampledKernel:
    """
    Evaluate K at the minimum-image distance of every cell from the origin cell.

    Args:
        spec: Kernel specification
        grid: Target grid
        logger: Optional logger instance

    Returns:
        SampledKernel with values and Fourier symbol

    Raises:
        InvalidConfigError: If a custom_radial table does not cover [0, sqrt(dim) * L]
    """
    logger = default(logger, lambda: setup_logger(__name__))

    if spec.kind == "custom_radial":
        reach = math.sqrt(grid.dim) * grid.half_width
        first, last = spec.table[0][0], spec.table[-1][0]
        if first > 0 or last < reach:
            raise InvalidConfigError(
                f"custom_radial table covers [{first}, {last}] but the grid needs [0, {reach:.6g}]"
            )

    decay = edge_decay(spec, grid)
    if decay > EDGE_DECAY_TOLERANCE:
        logger.warning(
            f"Kernel {spec.kind} is not negligible at the box edge (K(L)/K(0) = {decay:.3e}); "
            "periodic images will interact"
        )

    return SampledKernel(grid, spec.evaluate(grid.radius()), spec=spec)


def convolve(kernel: FourierMultiplier, f: torch.Tensor) -> torch.Tensor:
    """Circular FFT convolution approximating (K * f)(x) = integral K(x - y) f(y) dy."""
    return kernel.apply(f)


def kernel_plateau_radius(spec: KernelSpec) -> float:
    """delta_K = sup{delta : K(z) = K(0) for |z| < delta}."""
    if spec.kind in ("gaussian", "exponential"):
        return 0.0
    if spec.kind == "ball":
        return float(spec.radius)

    radii = [r for r, _ in spec.table]
    values = [v for _, v in spec.table]
    if radii[0] > 0:
        return 0.0
    plateau = 0.0
    for r, v in zip(radii[1:], values[1:]):
        if abs(v - values[0]) > PLATEAU_TOLERANCE * max(abs(values[0]), 1.0):
            break
        plateau = r
    return plateau


def edge_decay(spec: KernelSpec, grid: Grid) -> float:
    """K(L) / K(0); for a ball, 1 when R >= L and 0 otherwise."""
    if spec.kind == "ball":
        return 1.0 if spec.radius >= grid.half_width else 0.0
    origin = spec.value_at(0.0)
    if origin == 0:
        return math.inf
    return abs(spec.value_at(grid.half_width)) / abs(origin)


def max_symbol(kernel: Union[FourierMultiplier, TensorMultiplier]) -> float:
    """sup of the symbol; a positive value admits a positive maximizer of the quadratic form."""
    return kernel.max_symbol()


def dual_multiplier(
    kernel: Union[KernelSpec, SampledKernel],
    grid: Optional[Grid] = None,
) -> TensorMultiplier:
    """
    Dual tensor symbol K_hat(xi) * [(Id - R(xi)) / (|xi|^2 + 1) + R(xi)] with R(0) := 0.

    Args:
        kernel: KernelSpec (sampled on `grid`) or an already sampled kernel
        grid: 3-D grid, required with a KernelSpec

    Returns:
        TensorMultiplier of shape (3, 3, n, n, n)
    """
    if isinstance(kernel, KernelSpec):
        if not exists(grid):
            raise InvalidConfigError("dual_multiplier needs a grid to sample a KernelSpec")
        kernel = sample_kernel(kernel, grid)
    grid = kernel.grid
    if grid.dim != 3:
        raise InvalidConfigError("The dual multiplier needs a 3-D grid")

    R = grid.projector_symbol()
    eye = torch.eye(3, dtype=DTYPE, device=R.device).reshape(3, 3, 1, 1, 1)
    resolvent = 1.0 / (grid.xi_squared() + 1.0)
    return TensorMultiplier(grid, kernel.symbol * ((eye - R) * resolvent + R))


def dual_convolve_composed(U: torch.Tensor, kernel: SampledKernel) -> torch.Tensor:
    """
    Dual convolution assembled from its parts.

    Solenoidal part through (-Laplacian + 1)^-1, irrotational part unchanged,
    then convolution with K.
    """
    grid = kernel.grid
    solenoidal, irrotational = grid.helmholtz_project(U)
    smoothed = grid.ifft(grid.fft(solenoidal) / (grid.xi_squared() + 1.0))
    return kernel.apply(smoothed + irrotational)


def kernel_summary(kernel: SampledKernel) -> Dict[str, Any]:
    """Report fields describing a sampled kernel."""
    summary: Dict[str, Any] = {
        "origin_value": kernel.origin_value,
        "max_symbol": kernel.max_symbol(),
        "integral": kernel.grid.integrate(kernel.values),
    }
    if exists(kernel.spec):
        summary["spec"] = kernel.spec.to_dict()
        summary["plateau_radius"] = kernel_plateau_radius(kernel.spec)
        summary["edge_decay"] = edge_decay(kernel.spec, kernel.grid)
    return summary

