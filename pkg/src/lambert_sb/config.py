"""Run configuration: JSON document in, validated ``RunConfig`` out.

Every field is optional; omitted fields take the LEO transfer defaults
(12^3 x 50 lattice, eps = 15000, gamma = 7.5, 50 closed-loop paths).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .grid import SpaceTimeGrid
from .potential import PotentialModel
from .scaling import ScalingMap

SNAPSHOT_HOURS = (0.0, 0.25, 0.5, 0.75, 1.0)


class ConfigError(ValueError):
    """Unreadable or invalid run configuration."""


def _default_cov(mean) -> tuple:
    return tuple(tuple(float(v) for v in row) for row in np.diag(np.square(mean)) / 100.0)


@dataclass(frozen=True)
class RunConfig:
    # potential and scaling constants
    mu: float = 398600.4415
    j2: float = 1.08263e-3
    r_earth: float = 6378.1363
    r_scale: float = 6600.0
    t_scale: float = 5399.0
    gamma: float = 7.5
    buffer_radius: float = 6560.0
    potential_off: bool = False
    # lattice (km) and horizon (s)
    x_bounds: tuple = (-30000.0, 10000.0)
    y_bounds: tuple = (-5000.0, 25000.0)
    z_bounds: tuple = (-5000.0, 25000.0)
    nx: int = 12
    ny: int = 12
    nz: int = 12
    nt: int = 50
    horizon: tuple = (0.0, 3600.0)
    epsilon: float = 15000.0
    # endpoint Gaussians (km); covariances default to diag(mean^2) / 100
    mu0: tuple = (5000.0, 10000.0, 2100.0)
    sigma0: tuple | None = None
    mu1: tuple = (-14600.0, 2500.0, 7000.0)
    sigma1: tuple | None = None
    # factor recursion
    max_iters: int = 30
    tol: float = 1e-4
    initial_guess: float = 1.0
    support_floor: float = 1e-12
    positivity_floor: float = 1e-300
    # recovery and closed loop
    dense_n: int = 100
    n_paths: int = 50
    dt_sim: float | None = None
    seed: int = 0
    snapshot_hours: tuple = SNAPSHOT_HOURS
    output_dir: str = "out"
    write_fields: bool = False

    def __post_init__(self) -> None:
        _validate(self)

    # resolved helpers ---------------------------------------------------
    @property
    def cov0(self) -> np.ndarray:
        return np.array(self.sigma0 if self.sigma0 is not None else _default_cov(self.mu0), dtype=float)

    @property
    def cov1(self) -> np.ndarray:
        return np.array(self.sigma1 if self.sigma1 is not None else _default_cov(self.mu1), dtype=float)

    @property
    def sim_step(self) -> float:
        return self.dt_sim if self.dt_sim is not None else (self.horizon[1] - self.horizon[0]) / 500.0

    def potential_model(self) -> PotentialModel:
        return PotentialModel(
            mu=self.mu,
            j2=self.j2,
            r_earth=self.r_earth,
            r_scale=self.r_scale,
            t_scale=self.t_scale,
            gamma=self.gamma,
            buffer_radius=self.buffer_radius,
        )

    def scaling(self) -> ScalingMap:
        return ScalingMap(self.r_scale, self.t_scale)

    def scaled_grid(self) -> SpaceTimeGrid:
        R, T = self.r_scale, self.t_scale
        return SpaceTimeGrid(
            self.x_bounds[0] / R,
            self.x_bounds[1] / R,
            self.y_bounds[0] / R,
            self.y_bounds[1] / R,
            self.z_bounds[0] / R,
            self.z_bounds[1] / R,
            self.horizon[0] / T,
            self.horizon[1] / T,
            self.nx,
            self.ny,
            self.nz,
            self.nt,
        )


def _fail(msg: str):
    raise ConfigError(msg)


def _validate(c: RunConfig) -> None:
    for name in ("mu", "r_earth", "r_scale", "t_scale", "buffer_radius"):
        if not getattr(c, name) > 0:
            _fail(f"{name} must be > 0")
    if not 0 < c.j2 < 0.01:
        _fail("j2 must lie in (0, 0.01)")
    if not c.gamma >= 0:
        _fail("gamma must be ≥ 0")
    if not c.epsilon > 0:
        _fail("epsilon must be > 0")
    for name in ("x_bounds", "y_bounds", "z_bounds", "horizon"):
        lo, hi = getattr(c, name)
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            _fail(f"{name} must be a finite (min, max) pair with max > min")
    for name in ("nx", "ny", "nz", "nt", "max_iters", "dense_n"):
        v = getattr(c, name)
        if not (isinstance(v, int) and not isinstance(v, bool) and v >= 1):
            _fail(f"{name} must be a positive integer")
    if not (isinstance(c.n_paths, int) and c.n_paths >= 0):
        _fail("n_paths must be a nonnegative integer")
    if not (isinstance(c.seed, int) and 0 <= c.seed < 2**64):
        _fail("seed must be an unsigned 64-bit integer")
    if not c.tol > 0:
        _fail("tol must be > 0")
    if not c.initial_guess > 0:
        _fail("initial_guess must be > 0")
    if not 0 <= c.support_floor < 1:
        _fail("support_floor must lie in [0, 1)")
    if not c.positivity_floor > 0:
        _fail("positivity_floor must be > 0")
    if c.dt_sim is not None:
        span = c.horizon[1] - c.horizon[0]
        n = round(span / c.dt_sim) if c.dt_sim > 0 else 0
        if not c.dt_sim > 0 or n < 1 or abs(n * c.dt_sim - span) > 1e-9 * span:
            _fail("dt_sim must be > 0 and divide the horizon")
    for name in ("mu0", "mu1"):
        if len(getattr(c, name)) != 3:
            _fail(f"{name} must have three components")
    for name, cov in (("sigma0", c.cov0), ("sigma1", c.cov1)):
        if cov.shape != (3, 3) or not np.allclose(cov, cov.T):
            _fail(f"{name} must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            _fail(f"{name} must be positive definite")
    for h in c.snapshot_hours:
        t = h * 3600.0
        if not c.horizon[0] - 1e-9 <= t <= c.horizon[1] + 1e-9:
            _fail(f"snapshot time {h} h lies outside the horizon")


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


_FLOAT_FIELDS = {f.name for f in fields(RunConfig) if f.type in ("float", "float | None")}


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        value = _tupleize(value)
        if key in _FLOAT_FIELDS and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number")
            value = float(value)
        kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:  # e.g. a string where a number belongs
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: RunConfig) -> dict:
    return asdict(config)


def dump_config(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2) + "\n"


def loads_config(text: str, source: str = "<string>") -> RunConfig:
    if not text.strip():
        return RunConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return loads_config(path.read_text(encoding="utf-8"), str(path))
