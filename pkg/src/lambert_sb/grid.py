"""Uniform space-time lattice shared by every solver stage.

Nodes are indexed ``0..N`` inclusive along each axis, so an axis with ``N``
steps carries ``N + 1`` nodes.  Spatial fields are stored as C-ordered arrays
of shape ``(Nx + 1, Ny + 1, Nz + 1)`` (x outermost, z innermost).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SpaceTimeGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float
    t0: float
    t1: float
    nx: int
    ny: int
    nz: int
    nt: int

    def __post_init__(self) -> None:
        for lo, hi, name in (
            (self.x_min, self.x_max, "x"),
            (self.y_min, self.y_max, "y"),
            (self.z_min, self.z_max, "z"),
            (self.t0, self.t1, "t"),
        ):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"{name} bounds must be finite")
            if not hi > lo:
                raise ValueError(f"{name}_max must exceed {name}_min (got {lo}, {hi})")
        for n, name in ((self.nx, "nx"), (self.ny, "ny"), (self.nz, "nz"), (self.nt, "nt")):
            if int(n) != n or n < 1:
                raise ValueError(f"{name} must be a positive integer (got {n})")

    @classmethod
    def from_bounds(
        cls,
        x: tuple[float, float],
        y: tuple[float, float],
        z: tuple[float, float],
        t: tuple[float, float],
        n: tuple[int, int, int],
        nt: int,
    ) -> "SpaceTimeGrid":
        return cls(x[0], x[1], y[0], y[1], z[0], z[1], t[0], t[1], n[0], n[1], n[2], nt)

    @classmethod
    def cube(cls, lo: float, hi: float, n: int, t: tuple[float, float] = (0.0, 1.0), nt: int = 1):
        """Same bounds and step count on all three spatial axes."""
        return cls(lo, hi, lo, hi, lo, hi, t[0], t[1], n, n, n, nt)

    # derived step sizes -- never stored, so they cannot drift from the bounds
    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.nz

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.nt

    @property
    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx + 1, self.ny + 1, self.nz + 1)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1) * (self.nz + 1)

    @property
    def n_slices(self) -> int:
        return self.nt + 1

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.z_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max, self.z_max])

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x_min, self.x_max, self.nx + 1),
            np.linspace(self.y_min, self.y_max, self.ny + 1),
            np.linspace(self.z_min, self.z_max, self.nz + 1),
        )

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.nt + 1)

    def points(self) -> np.ndarray:
        """All node coordinates as an array of shape ``(*shape, 3)``."""
        xs, ys, zs = self.axes
        return np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1)

    def with_resolution(self, nx: int, ny: int | None = None, nz: int | None = None, nt: int | None = None):
        """Same bounds, different step counts (used for the dense resampling grid)."""
        return replace(
            self,
            nx=nx,
            ny=nx if ny is None else ny,
            nz=nx if nz is None else nz,
            nt=self.nt if nt is None else nt,
        )

    def check_field(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise ValueError(f"{name} has shape {values.shape}, grid expects {self.shape}")
        return values

    def check_series(self, values: np.ndarray, name: str = "series") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        expected = (self.nt + 1, *self.shape)
        if values.shape != expected:
            raise ValueError(f"{name} has shape {values.shape}, grid expects {expected}")
        return values


def node_point(m: int, n: int, j: int, grid: SpaceTimeGrid) -> np.ndarray:
    """Coordinates of lattice node ``(m, n, j)``."""
    for idx, hi, name in ((m, grid.nx, "m"), (n, grid.ny, "n"), (j, grid.nz, "j")):
        if not 0 <= idx <= hi:
            raise IndexError(f"node index {name}={idx} outside 0..{hi}")
    xs, ys, zs = grid.axes
    return np.array([xs[m], ys[n], zs[j]])


def cell_weight(grid: SpaceTimeGrid) -> float:
    """Spatial quadrature weight ``dx * dy * dz``."""
    return grid.dx * grid.dy * grid.dz


def time_weight(grid: SpaceTimeGrid) -> float:
    return grid.dt


def discrete_integral(f: np.ndarray, grid: SpaceTimeGrid) -> float:
    """Rectangle-rule integral over all ``(N + 1)^3`` nodes."""
    f = grid.check_field(f)
    return float(f.sum() * cell_weight(grid))
