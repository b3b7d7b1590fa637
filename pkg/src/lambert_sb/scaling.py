"""Physical <-> scaled coordinates (r' = r / R, t' = t / T).

The diffusion strength eps is used as-is in both frames; only its
coefficients change (eps T / R^2 for the scaled Laplacian, 2 eps / R for the
scaled velocity).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

Density = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalingMap:
    r_scale: float = 6600.0  # km
    t_scale: float = 5399.0  # s

    def __post_init__(self) -> None:
        if not (self.r_scale > 0 and self.t_scale > 0):
            raise ValueError("r_scale and t_scale must be > 0")

    def to_scaled_position(self, r_km):
        return np.asarray(r_km, dtype=float) / self.r_scale

    def to_physical_position(self, r_prime):
        return np.asarray(r_prime, dtype=float) * self.r_scale

    def to_scaled_time(self, t_s):
        return t_s / self.t_scale

    def to_physical_time(self, t_prime):
        return t_prime * self.t_scale

    def diffusion_coefficient(self, epsilon: float) -> float:
        """Laplacian coefficient of the scaled factor PDEs."""
        return epsilon * self.t_scale / self.r_scale**2

    def reaction_coefficient(self, epsilon: float) -> float:
        """Multiplier turning the (scaled) potential into a reaction rate."""
        return self.t_scale / (2.0 * epsilon)


def density_pushforward(rho_physical: Density, scaling: ScalingMap) -> Density:
    """rho'(r') = R^3 rho(R r')."""
    R = scaling.r_scale

    def rho_prime(r_prime):
        return R**3 * rho_physical(np.asarray(r_prime, dtype=float) * R)

    return rho_prime


def density_pullback(rho_prime: Density, scaling: ScalingMap) -> Density:
    """rho(r) = rho'(r / R) / R^3."""
    R = scaling.r_scale

    def rho_physical(r):
        return rho_prime(np.asarray(r, dtype=float) / R) / R**3

    return rho_physical


def gaussian_pushforward(mean, cov, scaling: ScalingMap) -> tuple[np.ndarray, np.ndarray]:
    """Parameters of N(mean, cov) pushed through r -> r / R."""
    R = scaling.r_scale
    return np.asarray(mean, dtype=float) / R, np.asarray(cov, dtype=float) / R**2


def velocity_pullback(grad_log_phi_prime, epsilon: float, scaling: ScalingMap) -> np.ndarray:
    """Physical velocity (km/s) from the scaled gradient of log phi: (2 eps / R) grad' log phi."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    return (2.0 * epsilon / scaling.r_scale) * np.asarray(grad_log_phi_prime, dtype=float)


def gaussian_density(mean, cov) -> Density:
    """Multivariate normal pdf as a vectorised callable over trailing-axis points."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    chol = np.linalg.cholesky(cov)
    log_norm = -0.5 * mean.size * np.log(2.0 * np.pi) - np.log(np.diag(chol)).sum()

    def pdf(x):
        d = np.asarray(x, dtype=float) - mean
        sol = np.linalg.solve(chol, d.reshape(-1, mean.size).T).T
        quad = np.sum(sol**2, axis=-1).reshape(d.shape[:-1])
        return np.exp(log_norm - 0.5 * quad)

    return pdf
