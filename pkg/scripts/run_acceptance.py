#!/usr/bin/env python3
"""
Run the desk-scale acceptance checks.

Usage:
    python scripts/run_acceptance.py --out-dir ./acceptance
    python scripts/run_acceptance.py --out-dir ./acceptance --only kerr_attained,duality

Each check writes <name>.json to the output directory; summary.json collects the verdicts.
The script exits with 1 when any check failed.
"""

import argparse
import math
import os
import sys
import tempfile
import time
from typing import Any, Callable, Dict

import torch

from nonlocal_maxwell.cli import main as cli_main
from nonlocal_maxwell.duality import SymbolSpec, legendre_identity_check, run_duality_check
from nonlocal_maxwell.errors import NonlocalMaxwellError
from nonlocal_maxwell.models import (
    GaussianPotential,
    LocalSolutionSpec,
    build_local_solution,
    dual_ground_state,
    ground_state_q,
    kerr_energy,
    kerr_minimizer,
    kerr_shrinking_family,
    l2_fraction_within,
    local_energy,
    positivity_transfer_check,
    sigma_refinement,
    supercritical_blowup_demo,
)
from nonlocal_maxwell.models.power import nehari_level
from nonlocal_maxwell.qmax import (
    MaximizeOptions,
    brute_force_max_Q,
    concentration_diagnostics,
    gaussian_bump,
    maximize_scalar_Q,
    schwarz_rearrange,
)
from nonlocal_maxwell.spectral import Grid, KernelSpec, sample_kernel
from nonlocal_maxwell.utils import write_report


def _relative(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).norm() / max(float(b.norm()), 1e-300))


def check_kerr_attained(seed: int) -> Dict[str, Any]:
    """Ball kernel R = 0.5: quotient 1/(4a) for a = 1 and a = 2."""
    grid = Grid(dim=3, n=48, half_width=2.0)
    rows = []
    for amplitude, tolerance in ((1.0, 2e-2), (2.0, 1e-2)):
        kernel = sample_kernel(KernelSpec(kind="ball", amplitude=amplitude, radius=0.5), grid)
        E = kerr_minimizer(kernel)
        report = kerr_energy(E, kernel)
        curl_rel = grid.lp_norm(grid.curl(E), 2) / grid.lp_norm(E, 2)
        rows.append(
            {
                "amplitude": amplitude,
                "quotient": report.quotient,
                "bound": report.bound,
                "curl_rel": curl_rel,
                "l2_share_in_support": l2_fraction_within(E, grid, 0.225),
                "passed": abs(report.quotient - 0.25 / amplitude) <= tolerance and curl_rel <= 1e-10,
            }
        )
    return {"rows": rows, "passed": all(row["passed"] for row in rows)}


def check_kerr_non_attained(seed: int) -> Dict[str, Any]:
    """Gaussian kernel: shrinking quotients decrease towards 0.25 and random fields stay above it."""
    grid = Grid(dim=3, n=64, half_width=2.0)
    kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
    family = kerr_shrinking_family(GaussianPotential(0.6), kernel, [1, 2, 4])
    quotients = [report.quotient for _, report in family]

    small_grid = Grid(dim=3, n=16, half_width=3.0)
    small_kernel = sample_kernel(KernelSpec(kind="gaussian"), small_grid)
    generator = torch.Generator().manual_seed(seed)
    samples = [torch.randn((3, *small_grid.shape), generator=generator, dtype=torch.float64) for _ in range(50)]
    random_quotients = [kerr_energy(E, small_kernel).quotient for E in samples]
    decreasing = all(b < a for a, b in zip(quotients, quotients[1:]))
    return {
        "quotients": quotients,
        "min_random_quotient": min(random_quotients),
        "passed": decreasing and quotients[-1] <= 1.1 * 0.25 and min(random_quotients) >= 0.25 - 1e-3,
    }


def check_local_vanishing(seed: int) -> Dict[str, Any]:
    """
    q = 2: I = (pi/3) r^3 for r = 0.5 and 0.25, ratio 1/8, Nehari residual vanishing with sigma.

    The first-order energy convergence is checked on q = 3, r = 1, where sigma is small against the radius.
    """
    grid = Grid(dim=3, n=96, half_width=0.75)
    sigmas = [4 * grid.spacing, 2 * grid.spacing]
    rows = []
    for j in (2, 4):
        refinement = sigma_refinement(LocalSolutionSpec(j=j, q=2.0), grid, sigmas)
        rows.append(
            {
                "r": 1.0 / j,
                "extrapolated_I": refinement.extrapolated_energy,
                "exact_I": math.pi / 3.0 * (1.0 / j) ** 3,
                "extrapolated_residual": refinement.extrapolated_residual,
                "energy_order": refinement.observed_order,
                "residual_order": refinement.residual_order,
            }
        )
    order_grid = Grid(dim=3, n=128, half_width=1.25)
    order_sweep = sigma_refinement(
        LocalSolutionSpec(j=1, q=3.0), order_grid, [4 * order_grid.spacing, 2 * order_grid.spacing]
    )
    energies = [
        local_energy(build_local_solution(LocalSolutionSpec(j=j, q=2.0, sigma=sigmas[0]), grid), grid, 2.0).energy
        for j in (2, 4)
    ]
    ratio = energies[1] / energies[0]
    passed = abs(ratio - 0.125) <= 0.0125 and all(
        abs(row["extrapolated_I"] - row["exact_I"]) <= 0.05 * row["exact_I"] and row["extrapolated_residual"] <= 5e-2
        for row in rows
    )
    passed = passed and order_sweep.observed_order >= 0.8
    return {"rows": rows, "ratio": ratio, "energy_order_q3_r1": order_sweep.observed_order, "passed": passed}


def check_power_ground_state(seed: int) -> Dict[str, Any]:
    """q = 1.5 for the gaussian and ball kernels, 48^3, L = 8."""
    grid = Grid(dim=3, n=48, half_width=8.0)
    rows = []
    for spec in (KernelSpec(kind="gaussian"), KernelSpec(kind="ball", radius=1.0)):
        kernel = sample_kernel(spec, grid)
        reports = []
        try:
            for run_seed in (seed + 1, seed + 2):
                _, report = ground_state_q(kernel, 1.5, MaximizeOptions(p=4.0 / 3.0, init="random", seed=run_seed))
                reports.append(report)
        except NonlocalMaxwellError as exc:
            rows.append({"kernel": spec.to_dict(), "error": str(exc), "passed": False})
            continue
        first, second = reports
        identity = abs(first.energy - nehari_level(first.I_L, first.I_NL, 1.5)) / abs(first.energy)
        seed_agreement = abs(first.max_Q - second.max_Q) / first.max_Q
        rows.append(
            {
                "kernel": spec.to_dict(),
                "report": first.to_dict(),
                "nehari_identity": identity,
                "seed_agreement": seed_agreement,
                "passed": identity <= 1e-10
                and abs(first.energy_gap) <= 1e-10
                and first.assembly_gap >= -1e-8
                and first.curl_norm_rel <= 1e-10
                and first.weak_residual <= 1e-3
                and seed_agreement <= 1e-4,
            }
        )
    return {"rows": rows, "passed": all(row["passed"] for row in rows)}


def check_supercritical(seed: int) -> Dict[str, Any]:
    """q = 3, epsilon = 0.5: Nehari level strictly decreasing with I_L bounded."""
    kernel = sample_kernel(KernelSpec(kind="gaussian"), Grid(dim=3, n=48, half_width=2.0))
    demo = supercritical_blowup_demo(kernel, 3.0, 0.5, [1, 2, 3, 4])
    return {**demo.to_dict(), "passed": demo.level_decreasing and demo.I_L_bounded}


def check_dual_ground_state(seed: int) -> Dict[str, Any]:
    """r = 4 for the gaussian and ball kernels at 48^3."""
    grid = Grid(dim=3, n=48, half_width=8.0)
    bump = gaussian_bump(grid)
    rows = []
    for spec in (KernelSpec(kind="gaussian"), KernelSpec(kind="ball", radius=1.0)):
        kernel = sample_kernel(spec, grid)
        positivity = positivity_transfer_check(bump - bump.mean(), kernel)
        try:
            _, _, report = dual_ground_state(kernel, 4.0, opts=MaximizeOptions(p=4.0 / 3.0, tol=1e-11))
        except NonlocalMaxwellError as exc:
            rows.append({"kernel": spec.to_dict(), "error": str(exc), "passed": False})
            continue
        rows.append(
            {
                "kernel": spec.to_dict(),
                **report.to_dict(),
                "positivity_gap": abs(positivity.gap) / abs(positivity.scalar_Q),
                "passed": report.dual_residual <= 1e-6
                and max(report.maxwell_residual_sol, report.maxwell_residual_irr) <= 1e-5
                and abs(report.J_value - report.predicted_J) <= 1e-10 * abs(report.predicted_J)
                and abs(positivity.gap) <= 1e-10 * abs(positivity.scalar_Q),
            }
        )
    return {"rows": rows, "passed": all(row["passed"] for row in rows)}


def check_spectral_suite(seed: int) -> Dict[str, Any]:
    """Projector idempotence, div/curl annihilation, curl-curl identity and FFT round trip on 20 fields."""
    grid = Grid(dim=3, n=32, half_width=4.0)
    generator = torch.Generator().manual_seed(seed)
    worst = {"idempotence": 0.0, "div_curl": 0.0, "curl_curl": 0.0, "round_trip": 0.0}
    for _ in range(20):
        noise = torch.randn((3, *grid.shape), generator=generator, dtype=torch.float64)
        E = grid.ifft(grid.fft(noise) * torch.exp(-grid.xi_squared() / 4.0))
        solenoidal, irrotational = grid.helmholtz_project(E)
        again_solenoidal, again_irrotational = grid.helmholtz_project(irrotational)
        scale = float(E.norm()) * float(grid.xi_squared().max().sqrt())
        worst["idempotence"] = max(
            worst["idempotence"], _relative(again_irrotational, irrotational), float(again_solenoidal.norm() / E.norm())
        )
        worst["div_curl"] = max(
            worst["div_curl"],
            float(grid.divergence(solenoidal).norm()) / scale,
            float(grid.curl(irrotational).norm()) / scale,
        )
        worst["curl_curl"] = max(
            worst["curl_curl"], _relative(grid.curl_curl(E), grid.gradient(grid.divergence(E)) - grid.laplacian(E))
        )
        worst["round_trip"] = max(worst["round_trip"], _relative(grid.ifft(grid.fft(noise)), noise))
    limits = {"idempotence": 1e-12, "div_curl": 1e-10, "curl_curl": 1e-12, "round_trip": 1e-12}
    return {"worst": worst, "limits": limits, "passed": all(worst[key] <= limits[key] for key in limits)}


def check_rearrangement(seed: int) -> Dict[str, Any]:
    """L^p norms are preserved and Q(f) <= Q(f*) for 100 random nonnegative fields."""
    rows = []
    generator = torch.Generator().manual_seed(seed)
    for grid in (Grid(dim=1, n=256, half_width=8.0), Grid(dim=3, n=32, half_width=4.0)):
        kernel = sample_kernel(KernelSpec(kind="gaussian"), grid)
        norm_error, violations = 0.0, 0
        for _ in range(100):
            f = torch.rand(grid.shape, generator=generator, dtype=torch.float64) ** 4
            rearranged = schwarz_rearrange(f, grid)
            for p in (1.0, 4.0 / 3.0, 2.0):
                norm_error = max(norm_error, abs(grid.lp_norm(rearranged, p) / grid.lp_norm(f, p) - 1.0))
            if kernel.quadratic_form(f) > kernel.quadratic_form(rearranged) * (1 + 1e-8) + 1e-12:
                violations += 1
        rows.append({"dim": grid.dim, "norm_error": norm_error, "riesz_violations": violations})
    return {"rows": rows, "passed": all(row["norm_error"] <= 1e-12 and row["riesz_violations"] == 0 for row in rows)}


def check_oracle(seed: int) -> Dict[str, Any]:
    """1-D n = 8: power iteration and the dense oracle agree on five kernels."""
    grid = Grid(dim=1, n=8, half_width=2.0)
    specs = [
        KernelSpec(kind="gaussian"),
        KernelSpec(kind="gaussian", amplitude=2.0),
        KernelSpec(kind="exponential"),
        KernelSpec(kind="ball", radius=1.0),
        KernelSpec(kind="custom_radial", table=((0.0, 1.0), (1.0, 0.5), (4.0, 0.0))),
    ]
    rows = []
    for spec in specs:
        kernel = sample_kernel(spec, grid)
        inits = [{"init": "gaussian_bump"}] + [{"init": "random", "seed": seed + k} for k in range(4)]
        best = max(maximize_scalar_Q(kernel, MaximizeOptions(p=1.5, tol=1e-13, **kw))[1].q_value for kw in inits)
        oracle, _ = brute_force_max_Q(kernel, 1.5, starts=16, seed=seed)
        rows.append({"kernel": spec.to_dict(), "power_iteration": best, "oracle": oracle})
    passed = all(abs(row["oracle"] - row["power_iteration"]) <= 1e-6 * row["oracle"] for row in rows)
    return {"rows": rows, "passed": passed}


def check_concentration(seed: int) -> Dict[str, Any]:
    """Centred bump, two separated bumps and a flat field."""
    grid = Grid(dim=2, n=64, half_width=4.0)
    x, y = grid.coordinates()
    width = 2 * 0.15**2
    separation = grid.half_width / 2.0
    bump = torch.exp(-(grid.radius() ** 2) / width)
    pair = torch.exp(-((x + separation) ** 2 + y**2) / width) + torch.exp(-((x - separation) ** 2 + y**2) / width)
    flat_grid = Grid(dim=3, n=16, half_width=2.0)
    noise = torch.rand(flat_grid.shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)

    compact = concentration_diagnostics(bump, grid, 4.0 / 3.0)
    dichotomy = concentration_diagnostics(pair, grid, 4.0 / 3.0)
    vanishing = concentration_diagnostics(1.0 + 0.01 * noise, flat_grid, 1.5)
    passed = (
        compact.cc_class == "compact"
        and dichotomy.cc_class == "dichotomy"
        and abs(dichotomy.lam - 0.5) <= 0.05
        and vanishing.cc_class == "vanishing"
    )
    return {
        "compact": compact.to_dict(),
        "dichotomy": dichotomy.to_dict(),
        "vanishing": vanishing.to_dict(),
        "passed": passed,
    }


def check_duality(seed: int) -> Dict[str, Any]:
    """m = 1 + xi^2 in one dimension, r in {3, 4, 6}."""
    grid = Grid(dim=1, n=256, half_width=16.0)
    sample = torch.randn(1000, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    rows = []
    for r in (3.0, 4.0, 6.0):
        _, _, report = run_duality_check(SymbolSpec(s=1.0), r, grid)
        legendre = legendre_identity_check(sample, r)
        rows.append(
            {
                **report.to_dict(),
                "legendre": legendre,
                "passed": report.energy_gap <= 1e-6
                and report.map_residual <= 1e-5
                and max(legendre.values()) <= 1e-12,
            }
        )
    return {"rows": rows, "passed": all(row["passed"] for row in rows)}


def check_determinism(seed: int) -> Dict[str, Any]:
    """Two CLI runs with the same seed write identical bytes."""
    with tempfile.TemporaryDirectory() as directory:
        out = os.path.join(directory, "report.json")
        contents = []
        for _ in range(2):
            args = ["duality", "--dim", "1", "--n", "128", "--L", "16", "--seed", str(seed), "--out", out]
            status = cli_main(args)
            with open(out, "rb") as handle:
                contents.append((status, handle.read()))
    return {"exit_codes": [status for status, _ in contents], "passed": contents[0] == contents[1]}


CHECKS: Dict[str, Callable[[int], Dict[str, Any]]] = {
    "kerr_attained": check_kerr_attained,
    "kerr_non_attained": check_kerr_non_attained,
    "local_vanishing": check_local_vanishing,
    "power_ground_state": check_power_ground_state,
    "supercritical": check_supercritical,
    "dual_ground_state": check_dual_ground_state,
    "spectral_suite": check_spectral_suite,
    "rearrangement": check_rearrangement,
    "oracle": check_oracle,
    "concentration": check_concentration,
    "duality": check_duality,
    "determinism": check_determinism,
}


def main():
    parser = argparse.ArgumentParser(
        description="Run the nonlocal-maxwell acceptance checks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Checks:
    {", ".join(CHECKS)}

Example:
    python scripts/run_acceptance.py --out-dir ./acceptance --only duality,oracle
        """,
    )
    parser.add_argument("--out-dir", type=str, required=True, help="Directory for the check reports")
    parser.add_argument("--only", type=str, default="", help="Comma separated subset of checks")
    parser.add_argument("--seed", type=int, default=0, help="Seed for the random samples")
    args = parser.parse_args()

    selected = [name.strip() for name in args.only.split(",") if name.strip()] or list(CHECKS)
    unknown = [name for name in selected if name not in CHECKS]
    if unknown:
        parser.error(f"unknown check(s): {', '.join(unknown)}")

    out_dir = os.path.abspath(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    print(f"\nRunning {len(selected)} acceptance checks, reports in: {out_dir}\n")

    summary = {}
    for name in selected:
        print(f"{name}...")
        start = time.perf_counter()
        try:
            result = CHECKS[name](args.seed)
        except NonlocalMaxwellError as exc:
            result = {"passed": False, "error": str(exc)}
        result["seconds"] = time.perf_counter() - start
        write_report(os.path.join(out_dir, f"{name}.json"), result)
        summary[name] = {"passed": bool(result["passed"]), "seconds": result["seconds"]}
        print(f"  {'PASS' if result['passed'] else 'FAIL'} in {result['seconds']:.1f} s")

    write_report(os.path.join(out_dir, "summary.json"), summary)
    failed = [name for name, entry in summary.items() if not entry["passed"]]
    print(f"\n{len(selected) - len(failed)}/{len(selected)} checks passed")
    if failed:
        print(f"Failed: {', '.join(failed)}")
        sys.exit(1)


if __name__ == "__main__":
    main()
