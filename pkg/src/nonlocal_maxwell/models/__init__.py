"""
Curl-curl models.

- local: explicit solution families of the local power model
- kerr: nonlocal Kerr model, attained and non-attained infima
- power: nonlocal power model, irrotational ground states and the supercritical demo
- dual: fully nonlocal model through its dual functional
"""

from .dual import (
    DualGroundStateReport,
    PositivityTransfer,
    dual_energy,
    dual_fibering,
    dual_ground_state,
    maxwell_residual,
    positivity_transfer_check,
)
from .kerr import (
    BumpPotential,
    GaussianPotential,
    KerrReport,
    family_rows,
    kerr_energy,
    kerr_functional,
    kerr_minimizer,
    kerr_shrinking_family,
    l2_fraction_within,
    support_diameter,
)
from .local import (
    LocalSolutionSpec,
    build_local_solution,
    convergence_order,
    defocusing_nehari_functional,
    evaluate_local_solution,
    local_energy,
    nehari_membership_residual,
    sigma_refinement,
)
from .power import (
    PowerGroundStateReport,
    SupercriticalDemo,
    ground_state_q,
    iq_energy,
    residual_q,
    supercritical_blowup_demo,
)

__all__ = [
    # Local
    "LocalSolutionSpec",
    "build_local_solution",
    "local_energy",
    "nehari_membership_residual",
    "defocusing_nehari_functional",
    "evaluate_local_solution",
    "convergence_order",
    "sigma_refinement",
    # Kerr
    "KerrReport",
    "BumpPotential",
    "GaussianPotential",
    "kerr_energy",
    "kerr_functional",
    "kerr_minimizer",
    "kerr_shrinking_family",
    "family_rows",
    "l2_fraction_within",
    "support_diameter",
    # Power
    "PowerGroundStateReport",
    "SupercriticalDemo",
    "iq_energy",
    "residual_q",
    "ground_state_q",
    "supercritical_blowup_demo",
    # Dual
    "DualGroundStateReport",
    "PositivityTransfer",
    "dual_energy",
    "dual_fibering",
    "maxwell_residual",
    "positivity_transfer_check",
    "dual_ground_state",
]
