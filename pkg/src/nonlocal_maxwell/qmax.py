"""
Maximization of Q(f) = integral (K * f) . f over the unit sphere of L^p, 1 < p < 2.

The scalar solver iterates the Euler-Lagrange fixed-point map

    f <- normalize_p( max(K * f, 0) ** (1 / (p - 1)) )

and the vector solver its tensor analogue U <- normalize_p(|W| ** ((2 - p) / (p - 1)) W), W = K * U.
A safeguard retries a Q-decreasing step with relaxation halved down to 1/64. Diagnostics classify
the maximizer as compact, vanishing or dichotomy from its best-ball mass profile.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from einops import rearrange
from tqdm import tqdm

from .errors import InvalidConfigError, SolverError
from .spectral import DTYPE, FourierMultiplier, Grid, SampledKernel, TensorMultiplier
from .utils import default, exists, setup_logger

InitMode = Literal["gaussian_bump", "random"]
CCClass = Literal["compact", "vanishing", "dichotomy", "undetermined"]

MIN_RELAXATION = 1.0 / 64.0
# a window must cut the best step distance by this factor to count as progress
STALL_FACTOR = 0.9
# Q changes below this relative size are round-off, not descent
Q_ROUNDOFF = 1e-13
CC_EPSILON = 0.05

Operator = Union[FourierMultiplier, TensorMultiplier]


@dataclass
class MaximizeOptions:
    """
    Knobs of the fixed-point maximizer.

    Args:
        p: Exponent in (1, 2)
        tol: Stop when the L^p distance between successive iterates is at most tol
        max_iter: Iteration cap
        el_tol: When the iteration stalls or hits max_iter, it counts as converged if the relative
            Euler-Lagrange residual is at most el_tol
        stall_window: Iterations per progress check; a window that does not cut the best step
            distance by STALL_FACTOR stops the run with stalled=True
        relaxation: Initial blend alpha in (0, 1] of f <- normalize((1 - alpha) f + alpha step)
        symmetrize: Apply the Schwarz rearrangement to the initial field and every step (scalar only)
        init: "gaussian_bump", "random" or a field on the grid
        seed: Seed for init="random"
        safeguard: Reject Q-decreasing steps by halving the relaxation
        record_history: Keep the per-iteration Q values in the report
        use_tqdm: Show a progress bar
    """

    p: float
    tol: float = 1e-10
    max_iter: int = 5000
    el_tol: float = 1e-6
    stall_window: int = 250
    relaxation: float = 1.0
    symmetrize: bool = False
    init: Union[InitMode, torch.Tensor] = "gaussian_bump"
    seed: int = 0
    safeguard: bool = True
    record_history: bool = True
    use_tqdm: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (1.0 < self.p < 2.0):
            raise InvalidConfigError(f"Exponent p must lie in (1, 2), got {self.p}")
        if not (0.0 < self.relaxation <= 1.0):
            raise InvalidConfigError(f"Relaxation must lie in (0, 1], got {self.relaxation}")
        if not self.tol > 0:
            raise InvalidConfigError(f"Tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if not self.el_tol > 0:
            raise InvalidConfigError(f"EL tolerance must be positive, got {self.el_tol}")
        if self.stall_window < 1:
            raise InvalidConfigError(f"stall_window must be at least 1, got {self.stall_window}")
        if isinstance(self.init, str) and self.init not in ("gaussian_bump", "random"):
            raise InvalidConfigError(f"Unknown init {self.init!r}, expected gaussian_bump, random or a field")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], **overrides: Any) -> "MaximizeOptions":
        allowed = {
            "p",
            "tol",
            "max_iter",
            "el_tol",
            "stall_window",
            "relaxation",
            "symmetrize",
            "init",
            "seed",
            "safeguard",
            "record_history",
        }
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise InvalidConfigError(f"Unknown maximizer option(s): {', '.join(unknown)}")
        merged = {**data, **overrides}
        if "p" not in merged:
            raise InvalidConfigError("Maximizer options are missing required field: p")
        return cls(**merged)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "el_tol": self.el_tol,
            "stall_window": self.stall_window,
            "relaxation": self.relaxation,
            "symmetrize": self.symmetrize,
            "init": self.init if isinstance(self.init, str) else "provided",
            "seed": self.seed,
            "safeguard": self.safeguard,
        }


@dataclass
class ConcentrationProfile:
    """Best-ball masses C(R) = max_x integral over B_R(x) of |f|^p, normalized by the total mass."""

    radii: List[float]
    masses: List[float]
    centers: List[List[float]]
    cc_class: CCClass
    lam: Optional[float] = None
    epsilon: float = CC_EPSILON

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radii": self.radii,
            "masses": self.masses,
            "centers": self.centers,
            "cc_class": self.cc_class,
            "lambda": self.lam,
            "epsilon": self.epsilon,
        }


@dataclass
class MaximizerReport:
    p: float
    q_value: float
    iterations: int
    converged: bool
    el_residual: float
    final_delta: float
    cc_class: CCClass = "undetermined"
    shift: Tuple[int, ...] = ()
    reinitialized: bool = False
    stalled: bool = False
    stop_reason: str = ""
    q_history: List[float] = field(default_factory=list)
    concentration: Optional[ConcentrationProfile] = None

    def to_dict(self, include_history: bool = False) -> Dict[str, Any]:
        data = {
            "p": self.p,
            "q_value": self.q_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "el_residual": self.el_residual,
            "final_delta": self.final_delta,
            "cc_class": self.cc_class,
            "shift": list(self.shift),
            "reinitialized": self.reinitialized,
            "stalled": self.stalled,
            "stop_reason": self.stop_reason,
        }
        if exists(self.concentration):
            data["concentration"] = self.concentration.to_dict()
        if include_history:
            data["q_history"] = list(self.q_history)
        return data


def quadratic_form(op: Operator, f: torch.Tensor) -> float:
    """Q(f) = integral (K * f) . f for scalar or vector fields."""
    return op.quadratic_form(f)


def normalize_lp(f: torch.Tensor, grid: Grid, p: float) -> torch.Tensor:
    norm = grid.lp_norm(f, p)
    if not (norm > 0 and math.isfinite(norm)):
        raise SolverError(f"Cannot normalize a field with L^{p} norm {norm}")
    return f / norm


def signed_power(field_values: torch.Tensor, grid: Grid, exponent: float) -> torch.Tensor:
    """|F|^(exponent - 1) F, zero where F vanishes."""
    magnitude = grid.pointwise_norm(field_values)
    safe = torch.where(magnitude > 0, magnitude, torch.ones_like(magnitude))
    factor = torch.where(magnitude > 0, safe ** (exponent - 1.0), torch.zeros_like(magnitude))
    return factor * field_values


def gaussian_bump(grid: Grid, width: Optional[float] = None) -> torch.Tensor:
    width = default(width, grid.half_width / 4.0)
    return torch.exp(-((grid.radius() / width) ** 2))


@lru_cache(maxsize=8)
def _rearrangement_order(grid: Grid) -> np.ndarray:
    # cells by exact lattice radius, ties in lexicographic (flat) order
    squared = rearrange(grid.lattice_offsets().pow(2).sum(dim=0), "... -> (...)").cpu().numpy()
    return np.argsort(squared, kind="stable")


def schwarz_rearrange(f: torch.Tensor, grid: Grid) -> torch.Tensor:
    """
    Schwarz-symmetric rearrangement of |f| on the grid.

    The values of |f| are assigned in nonincreasing order to the cells sorted by
    lattice distance from the origin cell, so every L^p norm is preserved exactly.
    """
    grid.check_field(f, vector=False)
    values = torch.sort(rearrange(f.abs(), "... -> (...)"), descending=True).values
    order = torch.from_numpy(_rearrangement_order(grid)).to(f.device)
    out = torch.empty_like(values)
    out[order] = values
    return out.reshape(grid.shape)


def _ball_masses(density: torch.Tensor, grid: Grid, radius: float) -> torch.Tensor:
    ball = SampledKernel.from_values(grid, (grid.radius() < radius).to(DTYPE))
    return ball.apply(density)


def recenter(
    f: torch.Tensor,
    grid: Grid,
    p: float,
    radius: Optional[float] = None,
) -> Tuple[torch.Tensor, Tuple[int, ...]]:
    """
    Translate f circularly so that its heaviest |f|^p ball of the given radius sits at the origin.

    Returns:
        (shifted field, integer cell shift per axis)
    """
    radius = default(radius, grid.half_width / 4.0)
    masses = _ball_masses(grid.pointwise_norm(f) ** p, grid, radius)
    index = np.unravel_index(int(torch.argmax(masses)), grid.shape)
    shift = tuple(int((grid.origin_index - i + grid.n // 2) % grid.n - grid.n // 2) for i in index)
    return grid.shift(f, shift), shift


def default_cc_radii(grid: Grid) -> List[float]:
    L = grid.half_width
    return [L * k / 16.0 for k in range(1, 9)] + [0.75 * L, L]


def concentration_diagnostics(
    f: torch.Tensor,
    grid: Grid,
    p: float,
    radii: Optional[Sequence[float]] = None,
    epsilon: float = CC_EPSILON,
) -> ConcentrationProfile:
    """
    Classify the concentration behaviour of a normalized field.

    - compact: C(R) >= 1 - epsilon for some R <= L/2
    - vanishing: C(L/4) <= epsilon
    - dichotomy: C(R) stays in (epsilon, 1 - epsilon) and varies by at most epsilon over R in [L/8, L/2];
      lambda is its mean there
    - undetermined otherwise

    Args:
        f: Scalar or vector field
        grid: Grid of f
        p: Exponent of the mass density |f|^p
        radii: Radii at which C(R) is reported (L/8, L/4 and L/2 are always included)
        epsilon: Classification threshold

    Returns:
        ConcentrationProfile
    """
    L = grid.half_width
    radii = sorted(set(float(r) for r in default(radii, default_cc_radii(grid))) | {L / 8.0, L / 4.0, L / 2.0})
    density = grid.pointwise_norm(f) ** p
    total = grid.integrate(density)
    if not total > 0:
        raise SolverError("Concentration diagnostics need a nonzero field")

    coordinates = rearrange(grid.coordinates(), "d ... -> (...) d")
    masses, centers = [], []
    for radius in radii:
        ball_masses = _ball_masses(density, grid, radius)
        best = int(torch.argmax(ball_masses))
        masses.append(float(ball_masses.flatten()[best]) / total)
        centers.append([float(c) for c in coordinates[best]])

    def within(lo: float, hi: float) -> List[float]:
        return [m for r, m in zip(radii, masses) if lo - 1e-12 <= r <= hi + 1e-12]

    cc_class: CCClass = "undetermined"
    lam = None
    plateau = within(L / 8.0, L / 2.0)
    if max(within(0.0, L / 2.0)) >= 1.0 - epsilon:
        cc_class = "compact"
    elif masses[radii.index(L / 4.0)] <= epsilon:
        cc_class = "vanishing"
    elif min(plateau) > epsilon and max(plateau) < 1.0 - epsilon and max(plateau) - min(plateau) <= epsilon:
        cc_class = "dichotomy"
        lam = float(np.mean(plateau))

    return ConcentrationProfile(
        radii=radii, masses=masses, centers=centers, cc_class=cc_class, lam=lam, epsilon=epsilon
    )


@dataclass
class DichotomySplit:
    q_total: float
    q_split: float
    lam: float
    splitting_factor: float

    @property
    def strict(self) -> bool:
        return self.splitting_factor < 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q_total": self.q_total,
            "q_split": self.q_split,
            "lambda": self.lam,
            "splitting_factor": self.splitting_factor,
            "strict": self.strict,
        }


def dichotomy_split_check(
    f: torch.Tensor,
    kernel: Operator,
    p: float,
    radius: float,
    center: Optional[Tuple[int, ...]] = None,
) -> DichotomySplit:
    """
    Split f into the part inside B_R(center), the part outside B_2R(center) and the remainder.

    Reports Q(f), Q(f1) + Q(f2), lambda = mass fraction of f1 and the factor
    lambda^(2/p) + (1 - lambda)^(2/p), which is < 1 for 0 < lambda < 1 and p < 2.
    """
    grid = kernel.grid
    center = default(center, (grid.origin_index,) * grid.dim)
    to_origin = tuple(grid.origin_index - int(c) for c in center)
    distance = grid.shift(grid.radius(), tuple(-s for s in to_origin))

    inner = f * (distance < radius).to(DTYPE)
    outer = f * (distance >= 2.0 * radius).to(DTYPE)
    mass = grid.integrate(grid.pointwise_norm(f) ** p)
    lam = grid.integrate(grid.pointwise_norm(inner) ** p) / mass
    factor = lam ** (2.0 / p) + (1.0 - lam) ** (2.0 / p)
    return DichotomySplit(
        q_total=kernel.quadratic_form(f),
        q_split=kernel.quadratic_form(inner) + kernel.quadratic_form(outer),
        lam=lam,
        splitting_factor=factor,
    )


def _initial_field(op: Operator, opts: MaximizeOptions, vector: bool, mode: Union[str, torch.Tensor]) -> torch.Tensor:
    grid = op.grid
    if isinstance(mode, torch.Tensor):
        grid.check_field(mode, vector=vector)
        return mode.to(DTYPE)
    if mode == "random":
        generator = torch.Generator().manual_seed(int(opts.seed))
        if vector:
            return torch.randn((3, *grid.shape), generator=generator, dtype=DTYPE).to(grid.device)
        return torch.rand(grid.shape, generator=generator, dtype=DTYPE).to(grid.device)
    bump = gaussian_bump(grid)
    return grid.gradient(bump) if vector else bump


def _euler_lagrange_residual(op: Operator, f: torch.Tensor, p: float, q: float) -> float:
    grid = op.grid
    Kf = op.apply(f)
    denominator = grid.lp_norm(Kf, 2)
    if denominator == 0:
        return math.inf
    return grid.lp_norm(q * signed_power(f, grid, p - 1.0) - Kf, 2) / denominator


def _maximize(
    op: Operator,
    opts: MaximizeOptions,
    vector: bool,
    logger: logging.Logger,
) -> Tuple[torch.Tensor, MaximizerReport]:
    grid = op.grid
    p = opts.p
    exponent = 1.0 / (p - 1.0)

    def step_map(f: torch.Tensor) -> torch.Tensor:
        W = op.apply(f)
        if vector:
            step = signed_power(W, grid, exponent)
        else:
            step = W.clamp(min=0.0) ** exponent
            if opts.symmetrize:
                step = schwarz_rearrange(step, grid)
        return normalize_lp(step, grid, p)

    def prepare(mode) -> Tuple[torch.Tensor, float]:
        f = _initial_field(op, opts, vector, mode)
        if opts.symmetrize:
            f = schwarz_rearrange(f, grid)
        f = normalize_lp(f, grid, p)
        return f, op.quadratic_form(f)

    f, q = prepare(opts.init)
    reinitialized = False
    if not q > 0:
        logger.warning(f"Q = {q:.3e} at the initial field, restarting from a gaussian bump")
        f, q = prepare("gaussian_bump")
        reinitialized = True
        if not q > 0:
            raise SolverError(f"Q = {q:.3e} is not positive at the gaussian bump; no ascent is possible")

    history = [q]
    converged = stalled = False
    stop_reason = "max_iter"
    delta = math.inf
    best_delta = window_start_best = math.inf
    iterations = 0

    for iterations in tqdm(range(1, opts.max_iter + 1), disable=not opts.use_tqdm, desc="qmax"):
        step = step_map(f)
        alpha = opts.relaxation
        while True:
            candidate = step if alpha == 1.0 else normalize_lp((1.0 - alpha) * f + alpha * step, grid, p)
            q_candidate = op.quadratic_form(candidate)
            if not opts.safeguard or q_candidate >= q - Q_ROUNDOFF * abs(q):
                break
            alpha /= 2.0
            if alpha < MIN_RELAXATION:
                candidate = None
                break

        if candidate is None:
            # keep the previous iterate; the unrelaxed step distance decides convergence
            delta = grid.lp_norm(step - f, p)
            stalled = True
            converged = delta <= opts.tol
            stop_reason = "safeguard"
            logger.debug(f"Safeguard stalled at iteration {iterations} (delta {delta:.3e})")
            break

        delta = grid.lp_norm(candidate - f, p)
        f, q = candidate, q_candidate
        history.append(q)
        best_delta = min(best_delta, delta)
        if iterations % 500 == 0:
            logger.debug(f"Iteration {iterations}: Q = {q:.12g}, delta = {delta:.3e}")
        if delta <= opts.tol:
            converged = True
            stop_reason = "tol"
            break
        if iterations % opts.stall_window == 0:
            if best_delta > STALL_FACTOR * window_start_best:
                stalled = True
                stop_reason = "stalled"
                logger.debug(f"No progress over {opts.stall_window} iterations (best delta {best_delta:.3e})")
                break
            window_start_best = best_delta

    el_residual = _euler_lagrange_residual(op, f, p, q)
    if not converged and el_residual <= opts.el_tol:
        converged = True
    if not converged:
        logger.warning(
            f"Maximizer stopped ({stop_reason}) after {iterations} iterations with delta {delta:.3e} > tol "
            f"{opts.tol:.1e} and EL residual {el_residual:.3e} > {opts.el_tol:.1e}"
        )

    f, shift = recenter(f, grid, p)
    profile = concentration_diagnostics(f, grid, p)
    report = MaximizerReport(
        p=p,
        q_value=q,
        iterations=iterations,
        converged=converged,
        el_residual=el_residual,
        final_delta=delta,
        stop_reason=stop_reason,
        cc_class=profile.cc_class,
        shift=shift,
        reinitialized=reinitialized,
        stalled=stalled,
        q_history=history if opts.record_history else [],
        concentration=profile,
    )
    logger.info(
        f"Q = {q:.12g} after {iterations} iterations (converged={converged}, "
        f"EL residual {report.el_residual:.3e}, {profile.cc_class})"
    )
    return f, report


def maximize_scalar_Q(
    kernel: FourierMultiplier,
    opts: MaximizeOptions,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, MaximizerReport]:
    """
    Maximize Q(f) = integral (K * f) f over the unit sphere of L^p.

    Args:
        kernel: Sampled kernel (or scalar multiplier) on the target grid
        opts: Solver options
        logger: Optional logger instance

    Returns:
        (f, report) with ||f||_p = 1 and f >= 0, recentred at the origin

    Raises:
        SolverError: If Q stays nonpositive after re-initialization
    """
    logger = default(logger, lambda: setup_logger(__name__))
    return _maximize(kernel, opts, vector=False, logger=logger)


def maximize_vector_Q(
    multiplier: TensorMultiplier,
    opts: MaximizeOptions,
    logger: Optional[logging.Logger] = None,
) -> Tuple[torch.Tensor, MaximizerReport]:
    """
    Maximize Q(U) = integral (K * U) . U over the unit sphere of L^p(R^3; R^3).

    The default initialization is the gradient of a gaussian bump.
    """
    logger = default(logger, lambda: setup_logger(__name__))
    if opts.symmetrize:
        raise InvalidConfigError("Schwarz rearrangement is only defined for scalar fields")
    if multiplier.grid.dim != 3:
        raise InvalidConfigError("Vector maximization needs a 3-D grid")
    return _maximize(multiplier, opts, vector=True, logger=logger)


def dense_convolution_matrix(kernel: FourierMultiplier) -> np.ndarray:
    """Matrix C with (K * f) = C f on flattened fields (small grids only)."""
    grid = kernel.grid
    size = grid.num_cells
    basis = torch.eye(size, dtype=DTYPE).reshape(size, *grid.shape)
    columns = kernel.apply(basis)
    return rearrange(columns, "j ... -> (...) j").cpu().numpy()


def brute_force_max_Q(
    kernel: FourierMultiplier,
    p: float,
    starts: int = 32,
    seed: int = 0,
    steps: int = 4000,
) -> Tuple[float, np.ndarray]:
    """
    Dense oracle for max Q on tiny grids.

    Multi-start projected gradient ascent on the nonnegative part of the L^p sphere with
    per-start backtracking. Every unit cell vector and the constant field are added to the
    random starts.

    Returns:
        (best Q, maximizing field as a flat array)
    """
    if not (1.0 < p < 2.0):
        raise InvalidConfigError(f"Exponent p must lie in (1, 2), got {p}")
    grid = kernel.grid
    C = dense_convolution_matrix(kernel)
    C = 0.5 * (C + C.T)
    size = C.shape[0]
    weight = grid.cell_volume

    rng = np.random.default_rng(seed)
    F = np.concatenate([np.eye(size), np.ones((1, size)), rng.random((starts, size))])

    def normalize(X: np.ndarray) -> np.ndarray:
        norms = (weight * np.sum(np.abs(X) ** p, axis=1, keepdims=True)) ** (1.0 / p)
        return X / norms

    def q_values(X: np.ndarray) -> np.ndarray:
        return weight * np.einsum("si,ij,sj->s", X, C, X)

    F = normalize(F)
    Q = q_values(F)
    eta = np.full(F.shape[0], 0.5)
    for _ in range(steps):
        G = 2.0 * F @ C
        normal = np.abs(F) ** (p - 1.0)
        along = np.sum(G * normal, axis=1, keepdims=True) / np.sum(normal * normal, axis=1, keepdims=True)
        tangent = G - along * normal
        trial = np.clip(F + eta[:, None] * tangent, 0.0, None)
        alive = trial.sum(axis=1) > 0
        trial[~alive] = F[~alive]
        trial = normalize(trial)
        Q_trial = q_values(trial)
        accept = Q_trial >= Q
        F[accept], Q[accept] = trial[accept], Q_trial[accept]
        eta = np.where(accept, eta * 1.5, eta * 0.5)
        if np.all(eta < 1e-14):
            break

    best = int(np.argmax(Q))
    return float(Q[best]), F[best]
