"""Initial-value solver for du/dt = a Lap(u) + b(x) u on the lattice.

The solution is written as heat-propagated initial data plus a Duhamel
reaction integral,

    u(t_k) = H(k dt) u0 + sum_{q<k} H((k - q) dt) [b u(t_q)] dV dt,

where ``H(s)`` is the lattice-truncated Gaussian kernel of variance 2 a s and
the time integral is a left Riemann sum (u is frozen at its slice value on
``[t_q, t_{q+1})``).  The kernel factorises over the three axes, so every
application is three small matrix products instead of a dense
``n_nodes x n_nodes`` product; the arithmetic is the same triple sum.

Fields are plain ``ndarray`` objects shaped like ``grid.shape``; a series of
fields is an array of shape ``(nt + 1, *grid.shape)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import SpaceTimeGrid
from .potential import PotentialModel, potential_regularized
from .scaling import ScalingMap

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-300


class DivergenceError(FloatingPointError):
    """A non-finite value appeared while marching the recursion."""

    def __init__(self, step: int, node: tuple[int, ...]):
        super().__init__(f"non-finite value at time index {step}, node {node}")
        self.step = step
        self.node = node


@dataclass(frozen=True, eq=False)
class ReactionDiffusionProblem:
    """Coefficients of du/dt = a Lap(u) + b u on ``grid`` (all factors folded in)."""

    a: float
    b: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("diffusion coefficient a must be > 0")
        b = np.broadcast_to(np.asarray(self.b, dtype=float), self.grid.shape)
        if not np.all(np.isfinite(b)):
            raise ValueError("reaction field b must be finite at every node")
        object.__setattr__(self, "b", b)

    @classmethod
    def from_potential(
        cls,
        grid: SpaceTimeGrid,
        model: PotentialModel,
        epsilon: float,
        *,
        potential_off: bool = False,
    ) -> "ReactionDiffusionProblem":
        """Scaled factor PDE: a = eps T / R^2, b = (T / 2 eps) V_bar_reg at each node.

        ``grid`` must be in scaled coordinates.  Nodes inside the Earth use the
        surface-clamped potential (the J2 formula is singular at the origin,
        which the default lattice contains).
        """
        if not epsilon > 0:
            raise ValueError("epsilon must be > 0")
        scaling = ScalingMap(model.r_scale, model.t_scale)
        a = scaling.diffusion_coefficient(epsilon)
        if potential_off:
            b = np.zeros(grid.shape)
        else:
            b = scaling.reaction_coefficient(epsilon) * potential_regularized(
                grid.points(), model, surface_clamp=True
            )
        return cls(a=a, b=b, grid=grid)


def heat_kernel_1d(coords: np.ndarray, elapsed: float, a: float) -> np.ndarray:
    """Lattice Gaussian kernel along one axis, quadrature weight included.

    Entry ``[i, m]`` is exp(-(x_i - x_m)^2 / (4 a s)) / sqrt(4 pi a s) * dx.
    """
    if not elapsed > 0:
        raise ValueError("elapsed time must be > 0")
    if not a > 0:
        raise ValueError("diffusion coefficient a must be > 0")
    coords = np.asarray(coords, dtype=float)
    h = (coords[-1] - coords[0]) / (coords.size - 1)
    diff = coords[:, None] - coords[None, :]
    return np.exp(-(diff**2) / (4.0 * a * elapsed)) / np.sqrt(4.0 * np.pi * a * elapsed) * h


def apply_separable(kx: np.ndarray, ky: np.ndarray, kz: np.ndarray, u: np.ndarray) -> np.ndarray:
    """out[a, b, c] = sum_{i,j,k} kx[a, i] ky[b, j] kz[c, k] u[i, j, k]."""
    out = np.tensordot(kx, u, axes=(1, 0))
    out = np.tensordot(ky, out, axes=(1, 1))
    out = np.tensordot(kz, out, axes=(1, 2))
    return out.transpose(2, 1, 0)


@dataclass(eq=False)
class HeatKernel:
    """Per-lag kernel cache for one (grid, a) pair.

    The separable factors are tiny ((N + 1)^2 entries per axis), so every lag
    up to ``nt`` fits comfortably in memory; ``max_cached`` bounds the cache
    anyway for very long horizons.
    """

    grid: SpaceTimeGrid
    a: float
    max_cached: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def factors(self, elapsed: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = float(elapsed)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        xs, ys, zs = self.grid.axes
        mats = (
            heat_kernel_1d(xs, elapsed, self.a),
            heat_kernel_1d(ys, elapsed, self.a),
            heat_kernel_1d(zs, elapsed, self.a),
        )
        if self.max_cached is None or len(self._cache) < self.max_cached:
            self._cache[key] = mats
        return mats

    def lag(self, steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.factors(steps * self.grid.dt)

    def apply(self, u: np.ndarray, elapsed: float) -> np.ndarray:
        return apply_separable(*self.factors(elapsed), u)

    def apply_lag(self, u: np.ndarray, steps: int) -> np.ndarray:
        return apply_separable(*self.lag(steps), u)

    def row_mass(self, elapsed: float) -> np.ndarray:
        """Discrete kernel mass seen by every node (1 in the untruncated limit)."""
        kx, ky, kz = self.factors(elapsed)
        return (
            kx.sum(axis=1)[:, None, None] * ky.sum(axis=1)[None, :, None] * kz.sum(axis=1)[None, None, :]
        )

    def mass_deficit(self) -> float:
        """Worst 1 - row mass over all nodes and all lags 1..nt."""
        return float(max(np.max(1.0 - self.row_mass(k * self.grid.dt)) for k in range(1, self.grid.nt + 1)))


@dataclass
class SolverStats:
    clamped: int = 0


def heat_propagate(u0: np.ndarray, elapsed: float, a: float, grid: SpaceTimeGrid) -> np.ndarray:
    """Gaussian-kernel convolution of ``u0`` over ``elapsed`` time units."""
    u0 = grid.check_field(u0, "u0")
    return HeatKernel(grid, a).apply(u0, elapsed)


def _check_finite(u: np.ndarray, step: int) -> None:
    bad = ~np.isfinite(u)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DivergenceError(step, node)


def solve_forward(
    u0: np.ndarray,
    problem: ReactionDiffusionProblem,
    *,
    positive: bool = False,
    floor: float = POSITIVITY_FLOOR,
    kernel: HeatKernel | None = None,
    stats: SolverStats | None = None,
) -> np.ndarray:
    """March the left-Riemann recursion from ``t0`` to ``t1``.

    Returns the series ``u[k] ~ u(t0 + k dt)`` with ``u[0] = u0``.  With
    ``positive=True`` slices that dip to ``<= 0`` are clamped to ``floor`` and
    counted in ``stats``.
    """
    grid = problem.grid
    u0 = grid.check_field(u0, "u0")
    _check_finite(u0, 0)
    kernel = kernel if kernel is not None else HeatKernel(grid, problem.a)
    b = problem.b
    # the lattice kernel already carries the cell volume, so sources only scale by dt
    dt = grid.dt
    has_reaction = bool(np.any(b != 0.0))

    out = np.empty((grid.nt + 1, *grid.shape))
    out[0] = u0
    sources = [b * u0 * dt] if has_reaction else None
    for k in range(1, grid.nt + 1):
        acc = kernel.apply_lag(u0, k)
        if has_reaction:
            for q in range(k):
                acc += kernel.apply_lag(sources[q], k - q)
        _check_finite(acc, k)
        if positive:
            low = acc <= 0.0
            n_low = int(low.sum())
            if n_low:
                acc[low] = floor
                if stats is not None:
                    stats.clamped += n_low
                logger.debug("clamped %d nonpositive values at slice %d", n_low, k)
        out[k] = acc
        if has_reaction:
            sources.append(b * acc * dt)
    return out


def solve_backward(
    u1: np.ndarray,
    problem: ReactionDiffusionProblem,
    **kwargs,
) -> np.ndarray:
    """Terminal-value problem du/dt = -(a Lap + b) u, u(t1) = u1.

    Solved as a forward problem in reversed time t_bar = t0 + t1 - t; slice
    ``k`` of the result holds ``u(t0 + k dt)``.
    """
    return solve_forward(u1, problem, **kwargs)[::-1].copy()
