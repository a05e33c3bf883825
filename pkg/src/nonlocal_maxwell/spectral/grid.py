"""
Periodic-box spectral calculus.

Fields are plain float64 tensors living on a `Grid`:

- a scalar field has shape (n,) * dim
- a vector field has shape (3, n, n, n), component axis first (3-D grids only)

Cell i along an axis sits at x_i = -L + i * h with h = 2L / n, so the origin cell is i = n / 2.
Transforms act on the trailing `dim` axes. First derivatives use the wavenumbers with the
Nyquist entry set to zero, and the Laplacian uses the same vector, so the discrete identities
curl grad = 0, div curl = 0 and curl curl = grad div - Laplacian hold to round-off.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import torch
from einops import reduce

from ..errors import InvalidConfigError

ScalarField = torch.Tensor
VectorField = torch.Tensor

DTYPE = torch.float64


@dataclass(frozen=True)
class Grid:
    """
    Periodic box [-L, L)^dim sampled with n points per axis.

    Args:
        dim: Spatial dimension (1, 2 or 3)
        n: Points per axis (even, at least 8)
        half_width: Box half-width L
        device: Torch device for every tensor created on this grid

    Example:
        grid = Grid(dim=3, n=48, half_width=8.0)
        E = grid.gradient(torch.exp(-grid.radius() ** 2))
        E1, E2 = grid.helmholtz_project(E)
    """

    dim: int
    n: int
    half_width: float
    device: str = "cpu"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidConfigError(f"Grid dim must be 1, 2 or 3, got {self.dim}")
        if not isinstance(self.n, int) or self.n < 8 or self.n % 2:
            raise InvalidConfigError(f"Grid n must be an even integer >= 8, got {self.n}")
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise InvalidConfigError(f"Grid half_width must be positive, got {self.half_width}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Grid":
        missing = [key for key in ("dim", "n", "L") if key not in data]
        if missing:
            raise InvalidConfigError(f"Grid config is missing required field(s): {', '.join(missing)}")
        return cls(dim=int(data["dim"]), n=int(data["n"]), half_width=float(data["L"]))

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "n": self.n, "L": self.half_width}

    # Geometry

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def num_cells(self) -> int:
        return self.n**self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        """Trailing tensor axes carrying the spatial dimensions."""
        return tuple(range(-self.dim, 0))

    @property
    def origin_index(self) -> int:
        return self.n // 2

    @cached_property
    def axis(self) -> torch.Tensor:
        """Cell coordinates along one axis."""
        return -self.half_width + self.spacing * torch.arange(self.n, dtype=DTYPE, device=self.device)

    @cached_property
    def _offsets(self) -> torch.Tensor:
        axis = torch.arange(self.n, device=self.device) - self.origin_index
        return torch.stack(torch.meshgrid(*([axis] * self.dim), indexing="ij"))

    def lattice_offsets(self) -> torch.Tensor:
        """Signed integer offsets of every cell from the origin cell, shape (dim, n, ...)."""
        return self._offsets

    def coordinates(self) -> torch.Tensor:
        """Cell coordinates, shape (dim, n, ...)."""
        return self.spacing * self._offsets.to(DTYPE)

    @cached_property
    def _radius(self) -> torch.Tensor:
        return self.spacing * self._offsets.pow(2).sum(dim=0).to(DTYPE).sqrt()

    def radius(self) -> torch.Tensor:
        """Minimum-image distance of every cell from the origin cell."""
        return self._radius

    def zeros(self, vector: bool = False) -> torch.Tensor:
        shape = (3, *self.shape) if vector else self.shape
        return torch.zeros(shape, dtype=DTYPE, device=self.device)

    def is_vector(self, field: torch.Tensor) -> bool:
        return field.ndim == self.dim + 1

    def check_field(self, field: torch.Tensor, vector: Optional[bool] = None) -> None:
        if tuple(field.shape[-self.dim :]) != self.shape or field.ndim not in (self.dim, self.dim + 1):
            raise InvalidConfigError(f"Field of shape {tuple(field.shape)} does not live on grid {self.shape}")
        if vector is not None and self.is_vector(field) != vector:
            kind = "vector" if vector else "scalar"
            raise InvalidConfigError(f"Expected a {kind} field, got shape {tuple(field.shape)}")
        if self.is_vector(field) and (self.dim != 3 or field.shape[0] != 3):
            raise InvalidConfigError("Vector fields need a 3-D grid and exactly 3 components")

    # Fourier space

    @cached_property
    def wavenumbers(self) -> torch.Tensor:
        """Per-axis frequencies pi * m / L in FFT order, m in [-n/2, n/2)."""
        return 2.0 * math.pi * torch.fft.fftfreq(self.n, d=self.spacing, dtype=DTYPE, device=self.device)

    @cached_property
    def derivative_wavenumbers(self) -> torch.Tensor:
        k = self.wavenumbers.clone()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def _wavevector(self) -> torch.Tensor:
        return torch.stack(torch.meshgrid(*([self.derivative_wavenumbers] * self.dim), indexing="ij"))

    def wavevector(self) -> torch.Tensor:
        """Derivative wavevector xi, shape (dim, n, ...)."""
        return self._wavevector

    @cached_property
    def _xi_squared(self) -> torch.Tensor:
        return self._wavevector.pow(2).sum(dim=0)

    def xi_squared(self) -> torch.Tensor:
        return self._xi_squared

    @cached_property
    def _projector_symbol(self) -> torch.Tensor:
        xi = self._wavevector
        xi2 = self._xi_squared
        inv = torch.where(xi2 > 0, 1.0 / torch.where(xi2 > 0, xi2, torch.ones_like(xi2)), torch.zeros_like(xi2))
        return torch.einsum("a...,b...->ab...", xi, xi) * inv

    def projector_symbol(self) -> torch.Tensor:
        """R(xi) = xi xi^T / |xi|^2 with R(0) := 0, shape (3, 3, n, n, n)."""
        if self.dim != 3:
            raise InvalidConfigError("The Helmholtz projector needs a 3-D grid")
        return self._projector_symbol

    def fft(self, field: torch.Tensor) -> torch.Tensor:
        return torch.fft.fftn(field, dim=self.axes)

    def ifft(self, spectrum: torch.Tensor) -> torch.Tensor:
        return torch.fft.ifftn(spectrum, dim=self.axes).real

    # Quadrature

    def pointwise_norm(self, field: torch.Tensor) -> torch.Tensor:
        """|f| for scalar fields, Euclidean magnitude for vector fields."""
        if self.is_vector(field):
            return reduce(field**2, "c ... -> ...", "sum").sqrt()
        return field.abs()

    def integrate(self, field: torch.Tensor) -> float:
        """Rectangle rule: cell_volume * sum of values."""
        return float(self.cell_volume * field.sum())

    def inner(self, f: torch.Tensor, g: torch.Tensor) -> float:
        """L2 inner product, summed over components for vector fields."""
        return self.integrate(f * g)

    def lp_norm(self, field: torch.Tensor, p: float) -> float:
        if p < 1:
            raise InvalidConfigError(f"lp_norm needs p >= 1, got {p}")
        return self.integrate(self.pointwise_norm(field) ** p) ** (1.0 / p)

    def spectral_inner(self, f: torch.Tensor, g: torch.Tensor) -> float:
        """Parseval evaluation of the L2 inner product."""
        weight = self.cell_volume / self.num_cells
        return float(weight * (self.fft(f) * self.fft(g).conj()).real.sum())

    # Differential operators

    def gradient(self, phi: ScalarField) -> VectorField:
        phi_hat = self.fft(phi)
        return self.ifft(1j * self._wavevector * phi_hat)

    def divergence(self, field: VectorField) -> ScalarField:
        self.check_field(field, vector=True)
        return self.ifft((1j * self._wavevector * self.fft(field)).sum(dim=0))

    def curl(self, field: VectorField) -> VectorField:
        self.check_field(field, vector=True)
        E = self.fft(field)
        k = 1j * self._wavevector
        curl_hat = torch.stack([k[1] * E[2] - k[2] * E[1], k[2] * E[0] - k[0] * E[2], k[0] * E[1] - k[1] * E[0]])
        return self.ifft(curl_hat)

    def laplacian(self, field: torch.Tensor) -> torch.Tensor:
        return self.ifft(-self._xi_squared * self.fft(field))

    def curl_curl(self, field: VectorField) -> VectorField:
        """Spectral curl curl: symbol |xi|^2 E - xi (xi . E)."""
        self.check_field(field, vector=True)
        field_hat = self.fft(field)
        xi = self._wavevector
        return self.ifft(self._xi_squared * field_hat - xi * (xi * field_hat).sum(dim=0))

    def helmholtz_project(self, field: VectorField) -> Tuple[VectorField, VectorField]:
        """
        Split E into its solenoidal part E1 = Pi E and irrotational part E2 = (1 - Pi) E.

        Constants (the zero mode) belong to E1.

        Returns:
            (E1, E2) with E1 + E2 = E
        """
        self.check_field(field, vector=True)
        irrotational = self.ifft(self.apply_symbol(self.projector_symbol(), self.fft(field)))
        return field - irrotational, irrotational

    @staticmethod
    def apply_symbol(symbol: torch.Tensor, spectrum: torch.Tensor) -> torch.Tensor:
        """Apply a per-frequency 3x3 matrix symbol to a vector spectrum."""
        return torch.einsum("ab...,b...->a...", symbol.to(spectrum.dtype), spectrum)

    def shift(self, field: torch.Tensor, offsets: Tuple[int, ...]) -> torch.Tensor:
        """Circular translation by whole cells along each axis."""
        return torch.roll(field, shifts=tuple(int(o) for o in offsets), dims=self.axes)
