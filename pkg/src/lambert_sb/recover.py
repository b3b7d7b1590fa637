"""Density, marginals and the feedback velocity field from converged factors."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .bridge import BridgeSolution
from .grid import SpaceTimeGrid, discrete_integral
from .rdsolve import apply_separable
from .scaling import ScalingMap, velocity_pullback

AXES = {"x": 0, "y": 1, "z": 2}


def recover_density(solution: BridgeSolution, t_index: int, *, normalize: bool = False) -> np.ndarray:
    """rho(., t_k) = phi_hat(., t_k) * phi(., t_k); optionally rescaled to unit mass."""
    nt = solution.grid.nt
    if not 0 <= t_index <= nt:
        raise IndexError(f"t_index {t_index} outside 0..{nt}")
    rho = solution.phi_hat_series[t_index] * solution.phi_series[t_index]
    if normalize:
        rho = rho / discrete_integral(rho, solution.grid)
    return rho


def marginal_1d(field: np.ndarray, grid: SpaceTimeGrid, axis: str | int) -> tuple[np.ndarray, np.ndarray]:
    """Univariate marginal along ``axis``: sum over the other two axes times their cell area."""
    ax = AXES[axis] if isinstance(axis, str) else int(axis)
    field = grid.check_field(field)
    spacing = grid.spacing
    others = [i for i in range(3) if i != ax]
    dens = field.sum(axis=tuple(others)) * spacing[others[0]] * spacing[others[1]]
    return grid.axes[ax], dens


def linear_interpolation_matrix(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Row ``i`` holds the 1-D linear interpolation weights of ``fine[i]`` on ``coarse`` nodes."""
    h = (coarse[-1] - coarse[0]) / (coarse.size - 1)
    s = np.clip((fine - coarse[0]) / h, 0.0, coarse.size - 1)
    lo = np.minimum(np.floor(s).astype(int), coarse.size - 2)
    w = s - lo
    mat = np.zeros((fine.size, coarse.size))
    rows = np.arange(fine.size)
    mat[rows, lo] = 1.0 - w
    mat[rows, lo + 1] += w
    return mat


def _round_half_down(s: np.ndarray) -> np.ndarray:
    return np.ceil(np.asarray(s) - 0.5).astype(int)


@dataclass(eq=False)
class VelocityField:
    """Optimal feedback velocity on a dense lattice, in physical km/s.

    Dense slices are built on demand from the coarse log-factor series
    (trilinear interpolation of log phi, then second-order finite
    differences) and kept in a small LRU cache.  A full 101^3 x 51 x 3 float
    array would need more than a gigabyte, so only recently used slices are
    held.

    Queries use the nearest node in space and the nearest of the first
    ``query_slices`` time slices.  By default that excludes the terminal slice:
    phi(t1) = rho1 / phi_hat(t1) is not smoothed by any diffusion and
    inherits the underflowed Gaussian tails of rho1, so its log-gradient is
    meaningless as a control.
    """

    dense: SpaceTimeGrid  # scaled coordinates
    coarse: SpaceTimeGrid
    log_phi: np.ndarray  # coarse series, shape (nt + 1, *coarse.shape)
    epsilon: float
    scaling: ScalingMap
    query_slices: int | None = None
    cache_size: int = 4
    _cache: OrderedDict = field(default_factory=OrderedDict, repr=False)

    def __post_init__(self) -> None:
        self.coarse.check_series(self.log_phi, "log_phi")
        if self.dense.nt != self.coarse.nt or self.dense.t0 != self.coarse.t0 or self.dense.t1 != self.coarse.t1:
            raise ValueError("dense and coarse grids must share the time discretisation")
        if not (np.allclose(self.dense.lower, self.coarse.lower) and np.allclose(self.dense.upper, self.coarse.upper)):
            raise ValueError("dense and coarse grids must share spatial bounds")
        if not np.all(np.isfinite(self.log_phi)):
            raise ValueError("log phi must be finite (phi strictly positive)")
        if self.query_slices is None:
            self.query_slices = max(self.coarse.nt, 1)
        if not 1 <= self.query_slices <= self.coarse.nt + 1:
            raise ValueError("query_slices must lie in 1..nt+1")
        self._interp = tuple(
            linear_interpolation_matrix(c, f) for c, f in zip(self.coarse.axes, self.dense.axes)
        )

    @property
    def n_slices(self) -> int:
        return self.coarse.nt + 1

    def dense_log_phi(self, k: int) -> np.ndarray:
        return apply_separable(*self._interp, self.log_phi[k])

    def scaled_gradient(self, k: int) -> np.ndarray:
        """grad' log phi on the dense lattice at slice ``k``, shape ``(*dense.shape, 3)``."""
        if not 0 <= k <= self.coarse.nt:
            raise IndexError(f"slice {k} outside 0..{self.coarse.nt}")
        hit = self._cache.get(k)
        if hit is not None:
            self._cache.move_to_end(k)
            return hit
        grads = np.gradient(self.dense_log_phi(k), *self.dense.spacing, edge_order=2)
        out = np.stack(grads, axis=-1)
        self._cache[k] = out
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return out

    def components(self, k: int) -> np.ndarray:
        """Physical velocity (km/s) at slice ``k``, shape ``(*dense.shape, 3)``."""
        return velocity_pullback(self.scaled_gradient(k), self.epsilon, self.scaling)

    def node_index(self, r_km: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rp = self.scaling.to_scaled_position(r_km)
        lo = self.dense.lower
        idx = []
        for i, (h, n) in enumerate(zip(self.dense.spacing, self.dense.shape)):
            idx.append(np.clip(_round_half_down((rp[..., i] - lo[i]) / h), 0, n - 1))
        return tuple(idx)

    def slice_index(self, t_s: float) -> int:
        s = (self.scaling.to_scaled_time(t_s) - self.coarse.t0) / self.coarse.dt
        return int(np.clip(_round_half_down(s), 0, self.query_slices - 1))

    def query(self, r_km: np.ndarray, t_s: float) -> np.ndarray:
        return query_velocity(self, r_km, t_s)

    __call__ = query


def build_velocity_field(
    phi_series: np.ndarray,
    epsilon: float,
    scaling: ScalingMap,
    dense: SpaceTimeGrid,
    coarse: SpaceTimeGrid,
    *,
    query_slices: int | None = None,
) -> VelocityField:
    """v = (2 eps / R) grad' log phi, resampled on ``dense`` (same bounds as ``coarse``)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    phi_series = coarse.check_series(phi_series, "phi_series")
    if np.any(phi_series <= 0):
        k, *node = (int(i) for i in np.argwhere(phi_series <= 0)[0])
        raise ValueError(f"phi is nonpositive at slice {k}, node {tuple(node)}")
    return VelocityField(
        dense=dense,
        coarse=coarse,
        log_phi=np.log(phi_series),
        epsilon=epsilon,
        scaling=scaling,
        query_slices=query_slices,
    )


def query_velocity(field: VelocityField, r_km: np.ndarray, t_s: float) -> np.ndarray:
    """Nearest-neighbour lookup; points outside the box clamp to the nearest face node.

    Ties go to the lower index.  ``r_km`` may hold many points (trailing axis 3).
    """
    i, j, k = field.node_index(np.asarray(r_km, dtype=float))
    return field.components(field.slice_index(t_s))[i, j, k]
