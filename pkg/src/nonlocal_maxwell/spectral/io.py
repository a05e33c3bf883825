"""
Field dumps.

One flat little-endian float64 file per component in row-major cell order,
`<name>_<component>.bin`, next to a JSON sidecar `<name>_<component>.json`
holding {dim, n, L, component, name}. Scalar fields use component "s",
vector fields "x", "y" and "z".
"""

import json
import os
from typing import List, Optional

import numpy as np
import torch

from ..errors import InvalidConfigError
from .grid import DTYPE, Grid

VECTOR_COMPONENTS = ("x", "y", "z")
SCALAR_COMPONENT = "s"


def save_field(directory: str, name: str, values: torch.Tensor, grid: Grid) -> List[str]:
    """
    Write a scalar or vector field.

    Args:
        directory: Output directory (created if missing)
        name: Field name used in file names and sidecars
        values: Field samples on `grid`
        grid: Grid the field lives on

    Returns:
        Paths of the binary files written
    """
    grid.check_field(values)
    os.makedirs(directory, exist_ok=True)

    if grid.is_vector(values):
        parts = list(zip(VECTOR_COMPONENTS, values))
    else:
        parts = [(SCALAR_COMPONENT, values)]

    written = []
    for component, data in parts:
        stem = os.path.join(directory, f"{name}_{component}")
        array = np.ascontiguousarray(data.detach().cpu().numpy(), dtype="<f8")
        array.tofile(stem + ".bin")
        sidecar = {**grid.to_dict(), "component": component, "name": name}
        with open(stem + ".json", "w", encoding="utf-8") as handle:
            json.dump(sidecar, handle, indent=2, sort_keys=True)
        written.append(stem + ".bin")
    return written


def load_field(directory: str, name: str, grid: Optional[Grid] = None) -> torch.Tensor:
    """
    Read a field written by `save_field`.

    A vector field is detected by the presence of the "x" component.
    When `grid` is given the sidecar geometry must match it.
    """
    components = VECTOR_COMPONENTS
    if not os.path.exists(os.path.join(directory, f"{name}_x.bin")):
        components = (SCALAR_COMPONENT,)

    arrays = []
    for component in components:
        stem = os.path.join(directory, f"{name}_{component}")
        if not os.path.exists(stem + ".bin"):
            raise InvalidConfigError(f"Missing field dump {stem}.bin")
        with open(stem + ".json", "r", encoding="utf-8") as handle:
            sidecar = json.load(handle)
        stored = Grid.from_dict(sidecar)
        if grid is not None and stored.to_dict() != grid.to_dict():
            raise InvalidConfigError(f"Dump {stem} was written on {stored.to_dict()}, expected {grid.to_dict()}")
        array = np.fromfile(stem + ".bin", dtype="<f8")
        if array.size != stored.num_cells:
            raise InvalidConfigError(f"Dump {stem}.bin holds {array.size} values, expected {stored.num_cells}")
        arrays.append(array.reshape(stored.shape))

    values = torch.from_numpy(np.stack(arrays) if len(arrays) > 1 else arrays[0]).to(DTYPE)
    return values
