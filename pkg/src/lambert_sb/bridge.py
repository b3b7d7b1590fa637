"""Fixed-point recursion for the endpoint Schroedinger factors.

One pass:

    phi_hat(t1) <- forward IVP from phi_hat_0
    phi_1       <- rho1 / phi_hat(t1)
    phi(t0)     <- backward IVP from phi_1
    phi_hat_0   <- rho0 / phi(t0)

The pass is repeated until the endpoint pair stops moving in Hilbert's
projective metric, after which the transient factors, the density
rho = phi_hat * phi and the value function psi = 2 eps log phi are formed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import SpaceTimeGrid, cell_weight, discrete_integral
from .rdsolve import (
    POSITIVITY_FLOOR,
    HeatKernel,
    ReactionDiffusionProblem,
    SolverStats,
    solve_backward,
    solve_forward,
)

logger = logging.getLogger(__name__)


class BridgeError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EndpointDensities:
    """Discretised endpoint densities, each integrating to one on ``grid``."""

    rho0: np.ndarray
    rho1: np.ndarray
    grid: SpaceTimeGrid
    support_floor: float = 1e-12  # relative to each density's maximum

    def __post_init__(self) -> None:
        for name in ("rho0", "rho1"):
            rho = self.grid.check_field(getattr(self, name), name)
            if not np.all(np.isfinite(rho)) or np.any(rho < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
            mass = discrete_integral(rho, self.grid)
            if abs(mass - 1.0) > 1e-9:
                raise ValueError(f"{name} integrates to {mass!r}, expected 1")
            object.__setattr__(self, name, rho)

    @classmethod
    def normalized(cls, rho0, rho1, grid: SpaceTimeGrid, support_floor: float = 1e-12):
        rho0 = grid.check_field(rho0, "rho0")
        rho1 = grid.check_field(rho1, "rho1")
        for name, rho in (("rho0", rho0), ("rho1", rho1)):
            if not discrete_integral(rho, grid) > 0:
                raise ValueError(f"{name} has no mass on the grid")
        return cls(
            rho0 / discrete_integral(rho0, grid),
            rho1 / discrete_integral(rho1, grid),
            grid,
            support_floor,
        )

    @property
    def mask0(self) -> np.ndarray:
        return self.rho0 > self.support_floor * self.rho0.max()

    @property
    def mask1(self) -> np.ndarray:
        return self.rho1 > self.support_floor * self.rho1.max()


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    metric_change: float
    # L1 mismatch at t1 of the pair that entered this iteration (nan on the first)
    terminal_residual: float


@dataclass(eq=False)
class BridgeSolution:
    phi_hat_series: np.ndarray
    phi_series: np.ndarray
    rho_series: np.ndarray
    psi_series: np.ndarray
    convergence_trace: list[IterationRecord]
    epsilon: float
    iterations_used: int
    converged: bool
    terminal_residual: float
    grid: SpaceTimeGrid
    clamp_count: int = 0
    kappa: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def phi_hat_0(self) -> np.ndarray:
        return self.phi_hat_series[0]

    @property
    def phi_1(self) -> np.ndarray:
        return self.phi_series[-1]

    def log_phi(self, k: int) -> np.ndarray:
        return np.log(self.phi_series[k])


def hilbert_metric(u: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None) -> float:
    """log max(u/v) - log min(u/v) over ``mask``; zero iff u is a positive multiple of v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if mask is not None:
        u, v = u[mask], v[mask]
    if u.size == 0:
        raise ValueError("empty mask")
    if np.any(u <= 0) or np.any(v <= 0):
        raise ValueError("hilbert_metric needs strictly positive values on the mask")
    log_ratio = np.log(u) - np.log(v)
    return float(log_ratio.max() - log_ratio.min())


def _divide(rho: np.ndarray, denom: np.ndarray, mask: np.ndarray, floor: float, step: str) -> np.ndarray:
    if np.any(denom[mask] <= floor):
        n_bad = int(np.count_nonzero(denom[mask] <= floor))
        raise BridgeError(f"{step}: propagated factor is below the floor at {n_bad} support nodes")
    out = rho / np.maximum(denom, floor)
    # keep the factor strictly positive off the support (rho can underflow to 0 there)
    return np.maximum(out, floor)


def recover_psi(phi_series: np.ndarray, epsilon: float) -> np.ndarray:
    """psi = 2 eps log phi, slice-wise."""
    phi_series = np.asarray(phi_series, dtype=float)
    if np.any(phi_series <= 0):
        raise ValueError("phi must be strictly positive to take its logarithm")
    return 2.0 * epsilon * np.log(phi_series)


def run_recursion(
    endpoints: EndpointDensities,
    fwd: ReactionDiffusionProblem,
    max_iters: int = 30,
    tol: float = 1e-4,
    *,
    epsilon: float = 1.0,
    initial_guess: np.ndarray | float = 1.0,
    floor: float = POSITIVITY_FLOOR,
    normalize: bool = True,
) -> BridgeSolution:
    """Repeat the forward/backward pass until the endpoint pair converges, then form the full solution.

    Convergence is declared when both endpoint factors move by less than
    ``tol`` in Hilbert's projective metric between consecutive passes.  When
    ``max_iters`` is exhausted the solution is still returned, with
    ``converged=False``.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    grid = endpoints.grid
    if fwd.grid != grid:
        raise ValueError("problem and endpoints live on different grids")

    rho0, rho1 = endpoints.rho0, endpoints.rho1
    mask0, mask1 = endpoints.mask0, endpoints.mask1
    kernel = HeatKernel(grid, fwd.a)
    stats = SolverStats()
    dv = cell_weight(grid)

    phi_hat_0 = np.broadcast_to(np.asarray(initial_guess, dtype=float), grid.shape).copy()
    if np.any(phi_hat_0 <= 0) or not np.all(np.isfinite(phi_hat_0)):
        raise ValueError("initial guess must be finite and everywhere positive")

    phi_1 = None
    backward = None
    trace: list[IterationRecord] = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        forward_t1 = solve_forward(phi_hat_0, fwd, positive=True, floor=floor, kernel=kernel, stats=stats)[-1]
        residual = math.nan
        if phi_1 is not None:
            residual = float(np.abs(forward_t1 * phi_1 - rho1).sum() * dv)
        new_phi_1 = _divide(rho1, forward_t1, mask1, floor, "terminal update")
        backward = solve_backward(new_phi_1, fwd, positive=True, floor=floor, kernel=kernel, stats=stats)
        new_phi_hat_0 = _divide(rho0, backward[0], mask0, floor, "initial update")

        change = hilbert_metric(new_phi_hat_0, phi_hat_0, mask0)
        if phi_1 is not None:
            change = max(change, hilbert_metric(new_phi_1, phi_1, mask1))
        trace.append(IterationRecord(iteration, change, residual))
        logger.info("iteration %d: hilbert change %.3e, terminal residual %.3e", iteration, change, residual)

        phi_hat_0, phi_1 = new_phi_hat_0, new_phi_1
        if change < tol:
            converged = True
            break

    if not converged:
        logger.warning("factor recursion did not converge in %d iterations", max_iters)

    phi_hat = solve_forward(phi_hat_0, fwd, positive=True, floor=floor, kernel=kernel, stats=stats)
    phi = backward

    kappa = 1.0
    if normalize:
        kappa = 1.0 / discrete_integral(phi_hat[0], grid)
        phi_hat = phi_hat * kappa
        phi = phi / kappa

    rho = phi_hat * phi
    terminal_residual = float(np.abs(rho[-1] - rho1).sum() * dv)
    return BridgeSolution(
        phi_hat_series=phi_hat,
        phi_series=phi,
        rho_series=rho,
        psi_series=recover_psi(phi, epsilon),
        convergence_trace=trace,
        epsilon=epsilon,
        iterations_used=iteration,
        converged=converged,
        terminal_residual=terminal_residual,
        grid=grid,
        clamp_count=stats.clamped,
        kappa=kappa,
        extras={"kernel_mass_deficit": kernel.mass_deficit()},
    )
