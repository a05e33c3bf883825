"""
Command line front end.

Every subcommand resolves a RunConfig (config file first, then flags), runs one solver and writes
a JSON report that embeds the resolved configuration. Sweeps also write a CSV table with one row
per parameter value.

Exit codes: 0 success, 1 invalid configuration, 2 solver failure.

Usage:
    nonlocal-maxwell power --q 1.5 --kernel gaussian.json --n 48 --L 8 --out report.json
    nonlocal-maxwell kerr --kernel ball.json --minimizer --out report.json
    nonlocal-maxwell duality --symbol bessel:1.0 --r 4 --dim 1 --n 256 --L 16 --out report.json
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import torch

from .duality import SymbolSpec, check_subcritical, legendre_identity_check, run_duality_check
from .errors import InvalidConfigError, NonConvergenceError, NonlocalMaxwellError, SolverError
from .models import (
    BumpPotential,
    GaussianPotential,
    LocalSolutionSpec,
    build_local_solution,
    convergence_order,
    defocusing_nehari_functional,
    dual_ground_state,
    evaluate_local_solution,
    family_rows,
    ground_state_q,
    kerr_energy,
    kerr_minimizer,
    kerr_shrinking_family,
    l2_fraction_within,
    positivity_transfer_check,
    sigma_refinement,
    supercritical_blowup_demo,
)
from .qmax import MaximizeOptions, brute_force_max_Q, gaussian_bump, maximize_scalar_Q
from .spectral import Grid, KernelSpec, SampledKernel, kernel_plateau_radius, kernel_summary, sample_kernel, save_field
from .spectral.kernels import KERNEL_KINDS
from .utils import (
    compact,
    default,
    dumps_report,
    exists,
    parse_number_list,
    set_package_level,
    setup_logger,
    write_csv,
    write_report,
)

COMMANDS = ("local", "kerr", "power", "dual", "duality", "qmax")
THREADS_ENV = "NONLOCAL_MAXWELL_NUM_THREADS"

DEFAULT_GRIDS = {
    "local": {"dim": 3, "n": 48, "L": 2.0},
    "kerr": {"dim": 3, "n": 48, "L": 2.0},
    "power": {"dim": 3, "n": 48, "L": 8.0},
    "dual": {"dim": 3, "n": 48, "L": 8.0},
    "duality": {"dim": 1, "n": 256, "L": 16.0},
    "qmax": {"dim": 3, "n": 32, "L": 4.0},
}

COMMAND_PARAMS = {
    "local": ("q", "family", "j", "rho", "sign", "sigma", "sigmas"),
    "kerr": ("minimizer", "support_fraction", "shrink", "potential"),
    "power": ("q", "epsilon", "supercritical"),
    "dual": ("r",),
    "duality": ("r",),
    "qmax": ("p", "symmetrize", "brute_force"),
}
SWEEP_PARAMS = ("sigmas", "shrink", "supercritical")
SOLVER_FIELDS = ("tol", "max_iter", "relaxation", "init", "safeguard")
NEEDS_KERNEL = ("kerr", "power", "dual", "qmax")
CONFIG_FIELDS = (
    "command",
    "grid",
    "kernel",
    "symbol",
    "params",
    "solver",
    "seed",
    "out",
    "csv",
    "dump_fields",
    "timestamp",
)

LOCAL_COLUMNS = (
    "sigma",
    "I",
    "I_L",
    "nonlinear",
    "residual",
    "observed_order",
    "exact_I",
    "relative_error",
    "identity_gap",
    "status",
)
KERR_COLUMNS = ("n", "I_L", "I_NL", "quotient", "bound", "gap", "l2_norm", "status")
SUPERCRITICAL_COLUMNS = ("n", "exponent", "I_L", "I_NL", "nehari_level", "status")


def load_json(path: str) -> Any:
    """Read a JSON file; decoder errors carry the file, line and column."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidConfigError(f"Cannot read {path}: {exc.strerror}") from exc


def resolve_kernel(value: Any) -> Dict[str, Any]:
    """A kernel kind ("gaussian"), a KernelSpec JSON file or an inline dict."""
    if isinstance(value, str):
        if value in KERNEL_KINDS and not os.path.exists(value):
            value = {"kind": value}
        else:
            value = load_json(value)
    if not isinstance(value, dict):
        raise InvalidConfigError(f"Kernel spec must be a JSON object, got {type(value).__name__}")
    KernelSpec.from_dict(value)
    return value


def resolve_symbol(value: Any) -> Dict[str, Any]:
    """A "bessel:<s>" string, a SymbolSpec JSON file or an inline dict."""
    if isinstance(value, str):
        value = load_json(value) if value.endswith(".json") else SymbolSpec.from_string(value).to_dict()
    if not isinstance(value, dict):
        raise InvalidConfigError(f"Symbol spec must be a JSON object, got {type(value).__name__}")
    return SymbolSpec.from_dict(value).to_dict()


def as_number_list(value: Any, name: str) -> List[float]:
    if isinstance(value, str):
        try:
            return parse_number_list(value)
        except ValueError as exc:
            raise InvalidConfigError(f"{name}: {exc}") from exc
    if isinstance(value, (list, tuple)) and all(isinstance(item, (int, float)) for item in value):
        return [float(item) for item in value]
    raise InvalidConfigError(f"{name} must be a list of numbers, got {value!r}")


def _section(data: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise InvalidConfigError(f"Config field {key!r} must be a JSON object")
    return value


@dataclass
class RunConfig:
    """
    Fully resolved run.

    Args:
        command: One of local, kerr, power, dual, duality, qmax
        grid: {"dim", "n", "L"}
        kernel: KernelSpec fields (kerr, power, dual, qmax)
        symbol: SymbolSpec fields (duality)
        params: Model parameters of the command, including sweep axes
        solver: MaximizeOptions fields except p and seed
        seed: Seed of every stochastic initialization
        out: JSON report path; the report goes to stdout when absent
        csv: CSV path for sweeps; defaults to the report path with a .csv suffix
        dump_fields: Directory for binary field dumps
        timestamp: Add a created_at field to the report
    """

    command: str
    grid: Dict[str, Any] = field(default_factory=dict)
    kernel: Optional[Dict[str, Any]] = None
    symbol: Optional[Dict[str, Any]] = None
    params: Dict[str, Any] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None
    csv: Optional[str] = None
    dump_fields: Optional[str] = None
    timestamp: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InvalidConfigError(f"Unknown command {self.command!r}, expected one of {', '.join(COMMANDS)}")
        Grid.from_dict(self.grid)

        unknown = sorted(set(self.params) - set(COMMAND_PARAMS[self.command]))
        if unknown:
            raise InvalidConfigError(f"Unknown {self.command} parameter(s): {', '.join(unknown)}")
        unknown = sorted(set(self.solver) - set(SOLVER_FIELDS))
        if unknown:
            raise InvalidConfigError(f"Unknown solver option(s): {', '.join(unknown)}")

        if self.command in NEEDS_KERNEL and not exists(self.kernel):
            raise InvalidConfigError(f"{self.command} needs a kernel (--kernel spec.json or a kind name)")
        if exists(self.kernel):
            KernelSpec.from_dict(self.kernel)
        if exists(self.symbol):
            SymbolSpec.from_dict(self.symbol)

        for key in SWEEP_PARAMS:
            if key in self.params and len(self.params[key]) == 0:
                raise InvalidConfigError(f"Sweep axis {key} is empty")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        unknown = sorted(set(data) - set(CONFIG_FIELDS))
        if unknown:
            raise InvalidConfigError(f"Unknown config field(s): {', '.join(unknown)}")
        if "command" not in data:
            raise InvalidConfigError("Config is missing required field: command")
        params = dict(_section(data, "params"))
        for key in SWEEP_PARAMS:
            if key in params:
                params[key] = as_number_list(params[key], key)
        return cls(
            command=data["command"],
            grid=dict(_section(data, "grid")),
            kernel=resolve_kernel(data["kernel"]) if exists(data.get("kernel")) else None,
            symbol=resolve_symbol(data["symbol"]) if exists(data.get("symbol")) else None,
            params=params,
            solver=dict(_section(data, "solver")),
            seed=data.get("seed", 0),
            out=data.get("out"),
            csv=data.get("csv"),
            dump_fields=data.get("dump_fields"),
            timestamp=bool(data.get("timestamp", False)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "grid": self.grid,
            "kernel": self.kernel,
            "symbol": self.symbol,
            "params": self.params,
            "solver": self.solver,
            "seed": self.seed,
            "out": self.out,
            "csv": self.csv,
            "dump_fields": self.dump_fields,
        }

    def build_grid(self) -> Grid:
        return Grid.from_dict(self.grid)

    def build_kernel(self, grid: Grid, logger: logging.Logger) -> SampledKernel:
        return sample_kernel(KernelSpec.from_dict(self.kernel), grid, logger=logger)

    def build_symbol(self) -> SymbolSpec:
        return SymbolSpec.from_dict(default(self.symbol, {"form": "bessel", "s": 1.0}))

    def maximizer_options(self, p: float, **overrides: Any) -> MaximizeOptions:
        return MaximizeOptions.from_dict(self.solver, p=p, seed=self.seed, **overrides)

    @property
    def csv_path(self) -> Optional[str]:
        if exists(self.csv):
            return self.csv
        return os.path.splitext(self.out)[0] + ".csv" if exists(self.out) else None


@dataclass
class CommandResult:
    report: Dict[str, Any]
    rows: Optional[List[Dict[str, Any]]] = None
    columns: Sequence[str] = ()
    fields: Dict[str, torch.Tensor] = field(default_factory=dict)


def sweep(
    axis: str,
    values: Sequence[float],
    evaluate: Callable[[float], Dict[str, Any]],
    logger: logging.Logger,
) -> List[Dict[str, Any]]:
    """
    Evaluate one row per value; failed rows keep their error in the status column.

    Raises:
        The last row error when no row succeeded
    """
    rows = []
    last_error = None
    for value in values:
        try:
            rows.append({axis: value, **evaluate(value), "status": "ok"})
        except NonlocalMaxwellError as exc:
            logger.warning(f"{axis} = {value:g}: {exc}")
            rows.append({axis: value, "status": f"error: {exc}"})
            last_error = exc
    if exists(last_error) and all(row["status"] != "ok" for row in rows):
        raise last_error
    return rows


def parse_potential(text: str) -> Union[GaussianPotential, BumpPotential]:
    """"gaussian:<width>" or "bump:<rho>"."""
    kind, _, value = str(text).partition(":")
    try:
        size = float(value)
    except ValueError as exc:
        raise InvalidConfigError(f"Potentials have the form gaussian:<width> or bump:<rho>, got {text!r}") from exc
    if kind == "gaussian":
        return GaussianPotential(size)
    if kind == "bump":
        return BumpPotential(size)
    raise InvalidConfigError(f"Unknown potential {kind!r}, expected gaussian or bump")


def run_local(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    params = config.params
    spec = LocalSolutionSpec.from_dict(
        compact({key: params.get(key) for key in ("q", "family", "j", "rho", "sign", "sigma")})
    )

    if "sigmas" in params:
        sigmas = sorted(params["sigmas"], reverse=True)

        def evaluate(sigma: float) -> Dict[str, Any]:
            member = LocalSolutionSpec(**{**spec.to_dict(), "sigma": sigma})
            return evaluate_local_solution(member, grid, logger=logger)

        rows = sweep("sigma", sigmas, evaluate, logger)
        good = [row for row in rows if row["status"] == "ok"]
        for coarse, fine in zip(good, good[1:]):
            fine["observed_order"] = convergence_order(
                abs(coarse["I"] - coarse["exact_I"]), abs(fine["I"] - fine["exact_I"]), coarse["sigma"] / fine["sigma"]
            )
        report: Dict[str, Any] = {"spec": spec.to_dict(), "rows": rows}
        if len(good) >= 2:
            refinement = sigma_refinement(spec, grid, [row["sigma"] for row in good], logger=logger)
            report.update({key: value for key, value in refinement.to_dict().items() if key != "rows"})
        return CommandResult(report=report, rows=rows, columns=LOCAL_COLUMNS)

    E = build_local_solution(spec, grid, logger=logger)
    report = {
        "spec": spec.to_dict(),
        **evaluate_local_solution(spec, grid, logger=logger),
        "defocusing_nehari": defocusing_nehari_functional(E, grid, spec.q),
    }
    return CommandResult(report=report, fields={"E": E})


def run_kerr(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    params = config.params
    if not params.get("minimizer") and "shrink" not in params:
        raise InvalidConfigError("kerr needs --minimizer and/or --shrink")

    kernel = config.build_kernel(grid, logger)
    result = CommandResult(report={"kernel": kernel_summary(kernel)})

    if params.get("minimizer"):
        fraction = float(params.get("support_fraction", 0.9))
        E = kerr_minimizer(kernel, support_fraction=fraction, logger=logger)
        minimizer = kerr_energy(E, kernel)
        minimizer.l2_norm = grid.lp_norm(E, 2)
        minimizer.support_diameter = fraction * kernel_plateau_radius(kernel.spec)
        result.report["minimizer"] = {
            **minimizer.to_dict(),
            "l2_share_in_support": l2_fraction_within(E, grid, 0.5 * minimizer.support_diameter),
        }
        result.fields["E_min"] = E

    if "shrink" in params:
        potential = parse_potential(params.get("potential", "gaussian:0.6"))

        def evaluate(n: float) -> Dict[str, Any]:
            return family_rows(kerr_shrinking_family(potential, kernel, [n], logger=logger))[0]

        rows = sweep("n", params["shrink"], evaluate, logger)
        quotients = [row["quotient"] for row in rows if row["status"] == "ok"]
        result.report["shrinking"] = {
            "potential": potential.to_dict(),
            "rows": rows,
            "quotient_decreasing": all(b < a for a, b in zip(quotients, quotients[1:])),
        }
        result.rows, result.columns = rows, KERR_COLUMNS
    return result


def run_power(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    params = config.params
    q = float(params.get("q", 1.5))
    kernel = config.build_kernel(grid, logger)

    if "supercritical" in params:
        demo = supercritical_blowup_demo(
            kernel, q, float(params.get("epsilon", 0.5)), params["supercritical"], logger=logger
        )
        return CommandResult(report=demo.to_dict(), rows=demo.rows, columns=SUPERCRITICAL_COLUMNS)

    if not 1.0 < q < 2.0:
        raise InvalidConfigError(f"Ground states need q in (1, 2), got {q}; use --supercritical for q > 2")
    E_star, report = ground_state_q(kernel, q, config.maximizer_options(2.0 / q), logger=logger)
    return CommandResult(report={"kernel": kernel_summary(kernel), **report.to_dict()}, fields={"E_star": E_star})


def run_dual(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    r = float(config.params.get("r", 4.0))
    if not r > 2:
        raise InvalidConfigError(f"Exponent r must exceed 2, got {r}")
    kernel = config.build_kernel(grid, logger)
    U_star, E_star, report = dual_ground_state(
        kernel, r, opts=config.maximizer_options(r / (r - 1.0)), logger=logger
    )
    bump = gaussian_bump(grid)
    positivity = positivity_transfer_check(bump - bump.mean(), kernel)
    return CommandResult(
        report={"kernel": kernel_summary(kernel), **report.to_dict(), "positivity_transfer": positivity.to_dict()},
        fields={"U_star": U_star, "E_star": E_star},
    )


def run_duality(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    r = float(config.params.get("r", 4.0))
    symbol = config.build_symbol()
    check_subcritical(r, grid.dim, symbol)
    u_star, v_star, report = run_duality_check(
        symbol,
        r,
        grid,
        opts=config.maximizer_options(r / (r - 1.0)),
        max_iter=int(config.solver.get("max_iter", 5000)),
        logger=logger,
    )
    sample = torch.randn(1000, generator=torch.Generator().manual_seed(config.seed), dtype=torch.float64)
    return CommandResult(
        report={"symbol": symbol.to_dict(), **report.to_dict(), "legendre": legendre_identity_check(sample, r)},
        fields={"u_star": u_star, "v_star": v_star},
    )


def run_qmax(config: RunConfig, grid: Grid, logger: logging.Logger) -> CommandResult:
    params = config.params
    p = float(params.get("p", 4.0 / 3.0))
    kernel = config.build_kernel(grid, logger)
    opts = config.maximizer_options(p, symmetrize=bool(params.get("symmetrize", False)))
    f, maximizer = maximize_scalar_Q(kernel, opts, logger=logger)
    report = {"kernel": kernel_summary(kernel), **maximizer.to_dict()}

    if params.get("brute_force"):
        if grid.dim != 1 or grid.n > 64:
            raise InvalidConfigError("The dense oracle needs a 1-D grid with n <= 64")
        best, _ = brute_force_max_Q(kernel, p, seed=config.seed)
        report["brute_force"] = {"q_value": best, "relative_gap": abs(best - maximizer.q_value) / abs(best)}

    if not maximizer.converged:
        raise NonConvergenceError(f"Maximizer did not converge (delta {maximizer.final_delta:.3e})", report)
    return CommandResult(report=report, fields={"f": f})


RUNNERS: Dict[str, Callable[[RunConfig, Grid, logging.Logger], CommandResult]] = {
    "local": run_local,
    "kerr": run_kerr,
    "power": run_power,
    "dual": run_dual,
    "duality": run_duality,
    "qmax": run_qmax,
}


def emit(config: RunConfig, report: Dict[str, Any]) -> None:
    if exists(config.out):
        write_report(config.out, report, config=config.to_dict(), timestamp=config.timestamp)
    else:
        sys.stdout.write(dumps_report({**report, "config": config.to_dict()}))


def run(config: RunConfig, logger: Optional[logging.Logger] = None) -> Dict[str, Any]:
    """
    Execute one resolved run and write its artifacts.

    Returns:
        The report as written

    Raises:
        InvalidConfigError: If a parameter is outside its admissible range
        SolverError: If the solver failed
    """
    logger = default(logger, lambda: setup_logger(__name__))
    grid = config.build_grid()
    logger.info(f"{config.command}: grid dim {grid.dim}, n {grid.n}, L {grid.half_width:g}, seed {config.seed}")
    result = RUNNERS[config.command](config, grid, logger)
    report = {"command": config.command, "status": "ok", **result.report}

    if exists(result.rows) and exists(config.csv_path):
        report["csv"] = write_csv(config.csv_path, result.rows, result.columns)
    if exists(config.dump_fields):
        report["fields"] = {
            name: save_field(config.dump_fields, name, values, grid) for name, values in result.fields.items()
        }
    emit(config, report)
    return report


def configure_threads() -> None:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return
    try:
        threads = int(value)
    except ValueError as exc:
        raise InvalidConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from exc
    if threads < 1:
        raise InvalidConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    torch.set_num_threads(threads)


def apply_seed(seed: int) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors raise InvalidConfigError so they share exit code 1."""

    def error(self, message: str):
        raise InvalidConfigError(f"{self.prog}: {message}")


def build_parser() -> ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="RunConfig JSON file; flags override its values")
    common.add_argument("--kernel", type=str, help="KernelSpec JSON file or a kernel kind (gaussian, exponential)")
    common.add_argument("--dim", type=int, help="Grid dimension")
    common.add_argument("--n", type=int, help="Grid points per axis")
    common.add_argument("--L", type=float, dest="L", help="Box half-width")
    common.add_argument("--seed", type=int, help="Seed for every stochastic initialization")
    common.add_argument("--tol", type=float, help="Maximizer tolerance")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="Iteration cap")
    common.add_argument("--relaxation", type=float, help="Initial maximizer relaxation")
    common.add_argument("--init", choices=["gaussian_bump", "random"], help="Maximizer initialization")
    common.add_argument("--out", type=str, help="JSON report path (stdout when absent)")
    common.add_argument("--csv", type=str, help="CSV path for sweeps")
    common.add_argument("--dump-fields", type=str, dest="dump_fields", help="Directory for binary field dumps")
    common.add_argument("--timestamp", action="store_true", default=None, help="Add created_at to the report")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--log-timestamps", action="store_true", dest="log_timestamps", help="Timestamped logs")

    parser = ArgumentParser(
        prog="nonlocal-maxwell",
        description="Spectral variational solvers for nonlocal nonlinear curl-curl ground states",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Environment:
    {THREADS_ENV}  torch thread count (positive integer)

Exit codes:
    0 success, 1 invalid configuration, 2 solver failure
        """,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    local = subparsers.add_parser("local", parents=[common], help="Explicit solutions of the local model")
    local.add_argument("--q", type=float, help="Exponent q > 1")
    local.add_argument("--family", choices=["shrinking_ball", "annulus"])
    local.add_argument("--j", type=int, help="Family index, support width 1/j")
    local.add_argument("--rho", type=float, help="Inner annulus radius")
    local.add_argument("--sign", type=int, choices=[1, -1], help="Sign of the E term")
    local.add_argument("--sigma", type=float, help="Mollification width")
    local.add_argument("--sigmas", type=str, help="Sigma-refinement sweep, e.g. 0.2,0.1,0.05")

    kerr = subparsers.add_parser("kerr", parents=[common], help="Nonlocal Kerr model")
    kerr.add_argument("--minimizer", action="store_true", default=None, help="Build the exact minimizer")
    kerr.add_argument("--support-fraction", type=float, dest="support_fraction", help="Minimizer support / delta_K")
    kerr.add_argument("--shrink", type=str, help="Shrinking-family sweep over n, e.g. 1,2,4")
    kerr.add_argument("--potential", type=str, help="gaussian:<width> or bump:<rho> (default gaussian:0.6)")

    power = subparsers.add_parser("power", parents=[common], help="Nonlocal power model")
    power.add_argument("--q", type=float, help="Exponent, in (1, 2) for ground states, > 2 for --supercritical")
    power.add_argument("--epsilon", type=float, help="Support radius of the supercritical fields")
    power.add_argument("--supercritical", type=str, help="Supercritical sweep over n, e.g. 1,2,3,4")

    dual = subparsers.add_parser("dual", parents=[common], help="Fully nonlocal model, dual ground state")
    dual.add_argument("--r", type=float, help="Exponent r > 2")

    duality = subparsers.add_parser("duality", parents=[common], help="Primal/dual correspondence check")
    duality.add_argument("--r", type=float, help="Subcritical exponent r > 2")
    duality.add_argument("--symbol", type=str, help="bessel:<s> or a SymbolSpec JSON file")

    qmax = subparsers.add_parser("qmax", parents=[common], help="Maximize Q on the unit sphere of L^p")
    qmax.add_argument("--p", type=float, help="Exponent in (1, 2)")
    qmax.add_argument("--symmetrize", action="store_true", default=None, help="Schwarz-rearrange every iterate")
    qmax.add_argument("--brute-force", action="store_true", default=None, dest="brute_force", help="Dense oracle")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and the flags, in that order."""
    data = load_json(args.config) if exists(args.config) else {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{args.config}: a RunConfig must be a JSON object")
    if data.get("command", args.command) != args.command:
        raise InvalidConfigError(f"{args.config} configures {data['command']!r}, not {args.command!r}")

    flags = {key: getattr(args, key, None) for key in COMMAND_PARAMS[args.command]}
    grid_flags = compact({"dim": args.dim, "n": args.n, "L": args.L})
    merged = {
        **data,
        "command": args.command,
        "grid": {**DEFAULT_GRIDS[args.command], **_section(data, "grid"), **grid_flags},
        "params": {**_section(data, "params"), **compact(flags)},
        "solver": {
            **_section(data, "solver"),
            **compact({"tol": args.tol, "max_iter": args.max_iter, "relaxation": args.relaxation, "init": args.init}),
        },
        **compact(
            {
                "kernel": args.kernel,
                "symbol": getattr(args, "symbol", None),
                "seed": args.seed,
                "out": args.out,
                "csv": args.csv,
                "dump_fields": args.dump_fields,
                "timestamp": args.timestamp,
            }
        ),
    }
    return RunConfig.from_dict(merged)


def write_failure(config: RunConfig, exc: SolverError) -> None:
    if not exists(config.out):
        return
    report = {"command": config.command, "status": "failed", "error": str(exc), "partial": getattr(exc, "report", {})}
    write_report(config.out, report, config=config.to_dict(), timestamp=config.timestamp)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logger = setup_logger(__name__)
    config = None
    try:
        args = build_parser().parse_args(argv)
        set_package_level(logging.DEBUG if args.verbose else logging.INFO, timestamp=args.log_timestamps)
        configure_threads()
        config = resolve_config(args)
        apply_seed(config.seed)
        run(config, logger=logger)
    except InvalidConfigError as exc:
        logger.error(f"Invalid configuration: {exc}")
        return 1
    except SolverError as exc:
        logger.error(f"Solver failed: {exc}")
        if exists(config):
            write_failure(config, exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
