"""Earth gravitational potential with the J2 zonal term.

Three flavours are exposed:

* ``potential_physical`` -- V(r) in km^2/s^2 for r in km.
* ``potential_scaled`` -- the same potential expressed on the scaled position
  r' = r / R.  Substituting mu_new = mu T / R^2 gives mu_new R / T = mu / R, so
  the scaled potential keeps its physical value and units: V_bar(r') = V(R r').
  The (T / 2 eps) factor of the scaled factor PDE then makes the reaction rate
  dimensionless.
* ``potential_regularized`` -- V_bar plus the surface-avoidance term
  gamma (|r'|^2 - (R_earth + c)^2 / R^2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class SingularityError(ZeroDivisionError):
    """Potential requested at the origin."""


class SubSurfaceWarning(UserWarning):
    """Potential evaluated below the Earth's surface, where the J2 model is not valid."""


@dataclass(frozen=True)
class PotentialModel:
    mu: float = 398600.4415  # km^3/s^2
    j2: float = 1.08263e-3
    r_earth: float = 6378.1363  # km
    r_scale: float = 6600.0  # km
    t_scale: float = 5399.0  # s
    gamma: float = 7.5
    buffer_radius: float = 6560.0  # km, R_earth + c

    def __post_init__(self) -> None:
        for name in ("mu", "r_earth", "r_scale", "t_scale", "buffer_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.j2 < 0.01:
            raise ValueError("j2 must lie in (0, 0.01)")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")

    @property
    def mu_new(self) -> float:
        return self.mu * self.t_scale / self.r_scale**2


def _norms(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise ValueError(f"points must have a trailing dimension of 3, got {r.shape}")
    rad = np.linalg.norm(r, axis=-1)
    if np.any(rad == 0.0):
        raise SingularityError("potential is singular at |r| = 0")
    return r, rad


def oblateness_factor(r: np.ndarray, model: PotentialModel) -> np.ndarray:
    """The positive bracket 1 + J2 Re^2 / (2 |r|^2) (1 - 3 z^2/|r|^2), r in km."""
    r, rad = _norms(r)
    zonal = 1.0 - 3.0 * r[..., 2] ** 2 / rad**2
    return 1.0 + model.j2 * model.r_earth**2 / (2.0 * rad**2) * zonal


def potential_physical(r: np.ndarray, model: PotentialModel) -> np.ndarray | float:
    """V(r) = -mu/|r| - mu J2 Re^2 / (2|r|^3) (1 - 3 z^2/|r|^2), r in km.

    Points under the surface are evaluated anyway; a ``SubSurfaceWarning`` flags them.
    """
    r, rad = _norms(r)
    if np.any(rad < model.r_earth):
        warnings.warn("potential evaluated below the Earth's surface", SubSurfaceWarning, stacklevel=2)
    zonal = 1.0 - 3.0 * r[..., 2] ** 2 / rad**2
    v = -model.mu / rad - model.mu * model.j2 * model.r_earth**2 / (2.0 * rad**3) * zonal
    return v if np.ndim(v) else float(v)


def potential_scaled(r_prime: np.ndarray, model: PotentialModel, *, surface_clamp: bool = False):
    """Potential at scaled position r' (km^2/s^2).

    With ``surface_clamp`` the radial distance is floored at R_earth / R before
    evaluation, so nodes inside the Earth (including the origin) see the
    surface value along their direction instead of the singular exterior
    formula.  The direction-dependent J2 bracket is unchanged.
    """
    if surface_clamp:
        r_prime = np.asarray(r_prime, dtype=float)
        rad = np.linalg.norm(r_prime, axis=-1)
        safe = np.where(rad > 0, rad, 1.0)
        # the origin has no direction; use the equatorial bracket there
        cos2 = np.where(rad > 0, r_prime[..., 2] ** 2 / safe**2, 0.0)
        rad = np.maximum(rad, model.r_earth / model.r_scale)
    else:
        r_prime, rad = _norms(r_prime)
        cos2 = r_prime[..., 2] ** 2 / rad**2
    mn, R, T = model.mu_new, model.r_scale, model.t_scale
    v = -mn * R / (T * rad) - mn * model.j2 * model.r_earth**2 / (2.0 * R * T * rad**3) * (1.0 - 3.0 * cos2)
    return v if np.ndim(v) else float(v)


def regularizer(r_prime: np.ndarray, model: PotentialModel):
    r_prime = np.asarray(r_prime, dtype=float)
    sq = np.sum(r_prime**2, axis=-1)
    v = model.gamma * (sq - (model.buffer_radius / model.r_scale) ** 2)
    return v if np.ndim(v) else float(v)


def potential_regularized(r_prime: np.ndarray, model: PotentialModel, *, surface_clamp: bool = False):
    """V_bar(r') + gamma (|r'|^2 - (R_earth + c)^2 / R^2).  No sign clamping."""
    return potential_scaled(r_prime, model, surface_clamp=surface_clamp) + regularizer(r_prime, model)
