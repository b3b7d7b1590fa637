"""Closed-loop Monte-Carlo check of the recovered control.

Sample paths follow dr = v(r, t) dt + sqrt(2 eps) dw, integrated with
Euler-Maruyama in physical units (km, s).  This is the same law as the scaled
SDE with diffusion eps T / R^2; working in km keeps stored states identical
to the states the control was queried at.

Random streams are Philox counter-based generators derived from one seed:
initial draws use spawn key ``(0,)`` and path ``p`` draws its increments
from spawn key ``(1, p)``, so results do not depend on the order in which
paths are processed.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

Velocity = Callable[[np.ndarray, float], np.ndarray]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(eq=False)
class SamplePathSet:
    states: np.ndarray  # (path, step, 3) km
    controls: np.ndarray  # (path, step, 3) km/s
    times: np.ndarray  # (step,) s
    dt_sim: float
    seed: int
    epsilon: float

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class EnsembleStatistics:
    mean: np.ndarray
    covariance: np.ndarray
    std_error: np.ndarray
    n: int


def sample_initial(mean, cov, n: int, seed: int) -> np.ndarray:
    """``n`` draws from N(mean, cov) (km).  A zero covariance returns the mean exactly."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise ValueError("covariance shape does not match the mean")
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance must be symmetric")
    if not np.any(cov):
        return np.tile(mean, (n, 1))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    xi = _stream(seed, 0).standard_normal((n, mean.size))
    return mean + xi @ chol.T


def propagate(
    initials: np.ndarray,
    field: Velocity,
    epsilon: float,
    dt_sim: float,
    horizon: tuple[float, float],
    seed: int,
) -> SamplePathSet:
    """Euler-Maruyama from ``horizon[0]`` to ``horizon[1]`` (s) under the feedback ``field``.

    ``field(r_km, t_s)`` returns km/s for an ``(n, 3)`` batch of positions.
    The control is recorded at every stored state, including the final one.
    """
    initials = np.atleast_2d(np.asarray(initials, dtype=float))
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if not dt_sim > 0:
        raise ValueError("dt_sim must be > 0")
    t0, t1 = horizon
    span = t1 - t0
    n_steps = int(round(span / dt_sim))
    if n_steps < 1 or abs(n_steps * dt_sim - span) > 1e-9 * abs(span):
        raise ValueError(f"dt_sim={dt_sim} does not divide the horizon {span}")
    n_paths = initials.shape[0]
    times = t0 + dt_sim * np.arange(n_steps + 1)

    noise = np.empty((n_paths, n_steps, 3))
    for p in range(n_paths):
        noise[p] = _stream(seed, 1, p).standard_normal((n_steps, 3))
    scale = np.sqrt(2.0 * epsilon * dt_sim)

    states = np.empty((n_paths, n_steps + 1, 3))
    controls = np.empty_like(states)
    states[:, 0] = initials
    for k in range(n_steps + 1):
        if n_paths:
            controls[:, k] = field(states[:, k], times[k])
        if k == n_steps:
            break
        states[:, k + 1] = states[:, k] + controls[:, k] * dt_sim + scale * noise[:, k]
        bad = ~np.isfinite(states[:, k + 1]).all(axis=1)
        if bad.any():
            raise FloatingPointError(f"non-finite state on path {int(np.argmax(bad))} at step {k + 1}")
    return SamplePathSet(states, controls, times, dt_sim, seed, epsilon)


def ensemble_statistics(points: np.ndarray) -> EnsembleStatistics:
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two paths for ensemble statistics")
    mean = points.mean(axis=0)
    cov = np.cov(points, rowvar=False, ddof=1)
    return EnsembleStatistics(mean, cov, np.sqrt(np.diag(cov) / n), n)


def endpoint_statistics(paths: SamplePathSet) -> EnsembleStatistics:
    """Sample mean and unbiased covariance of the final states."""
    return ensemble_statistics(paths.states[:, -1])
