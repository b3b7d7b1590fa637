"""End-to-end run: scale, discretise endpoints, solve, recover, simulate, write files."""

from __future__ import annotations

import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bridge import BridgeSolution, EndpointDensities, run_recursion
from .config import RunConfig, dump_config
from .recover import VelocityField, build_velocity_field, marginal_1d
from .rdsolve import ReactionDiffusionProblem
from .scaling import density_pushforward, gaussian_density
from .simulate import SamplePathSet, endpoint_statistics, ensemble_statistics, propagate, sample_initial

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"LSBF"
FIELD_VERSION = 1

EPSILON_NOTE = (
    "epsilon is used unscaled: eps T / R^2 multiplies the scaled Laplacian, "
    "sqrt(2 eps) km/sqrt(s) drives the physical sample paths"
)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunSummary:
    status: str = "pending"  # ok | not_converged | failed
    converged: bool | None = None
    iterations_used: int | None = None
    hilbert_trace: list = field(default_factory=list)
    terminal_residual: float | None = None
    kernel_mass_deficit: float | None = None
    clamp_count: int | None = None
    endpoint_statistics: dict | None = None
    min_radius_km: float | None = None
    stage_seconds: dict = field(default_factory=dict)
    seed: int | None = None
    epsilon_note: str = EPSILON_NOTE
    error: str | None = None
    failed_stage: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass(eq=False)
class PipelineRun:
    config: RunConfig
    summary: RunSummary
    endpoints: EndpointDensities | None = None
    solution: BridgeSolution | None = None
    velocity: VelocityField | None = None
    paths: SamplePathSet | None = None
    manifest: list = field(default_factory=list)


def discretize_endpoints(config: RunConfig) -> EndpointDensities:
    """Push the physical endpoint Gaussians to scaled coordinates and sample them at the nodes."""
    grid = config.scaled_grid()
    scaling = config.scaling()
    pts = grid.points()
    rho0 = density_pushforward(gaussian_density(config.mu0, config.cov0), scaling)(pts)
    rho1 = density_pushforward(gaussian_density(config.mu1, config.cov1), scaling)(pts)
    return EndpointDensities.normalized(rho0, rho1, grid, config.support_floor)


def execute(config: RunConfig, *, simulate: bool = True, out_dir: str | Path | None = None,
            write: bool = True) -> PipelineRun:
    """Run every stage; on failure the summary (and whatever else exists) is still written."""
    summary = RunSummary(seed=config.seed)
    run = PipelineRun(config=config, summary=summary)
    out = Path(out_dir if out_dir is not None else config.output_dir)
    stage = "setup"
    try:
        stage = "discretize"
        tic = time.perf_counter()
        grid = config.scaled_grid()
        run.endpoints = discretize_endpoints(config)
        problem = ReactionDiffusionProblem.from_potential(
            grid, config.potential_model(), config.epsilon, potential_off=config.potential_off
        )
        summary.stage_seconds[stage] = time.perf_counter() - tic

        stage = "bridge"
        tic = time.perf_counter()
        initial = config.initial_guess * np.ones(grid.shape)
        sol = run_recursion(
            run.endpoints,
            problem,
            config.max_iters,
            config.tol,
            epsilon=config.epsilon,
            initial_guess=initial,
            floor=config.positivity_floor,
        )
        run.solution = sol
        summary.converged = sol.converged
        summary.iterations_used = sol.iterations_used
        summary.hilbert_trace = [rec.metric_change for rec in sol.convergence_trace]
        summary.terminal_residual = sol.terminal_residual
        summary.kernel_mass_deficit = sol.extras.get("kernel_mass_deficit")
        summary.clamp_count = sol.clamp_count
        summary.stage_seconds[stage] = time.perf_counter() - tic

        stage = "recover"
        tic = time.perf_counter()
        dense = grid.with_resolution(config.dense_n)
        run.velocity = build_velocity_field(sol.phi_series, config.epsilon, config.scaling(), dense, grid)
        summary.stage_seconds[stage] = time.perf_counter() - tic

        if simulate:
            stage = "simulate"
            tic = time.perf_counter()
            x0 = sample_initial(config.mu0, config.cov0, config.n_paths, config.seed)
            run.paths = propagate(x0, run.velocity, config.epsilon, config.sim_step, config.horizon, config.seed)
            if run.paths.n_paths:
                summary.min_radius_km = float(np.linalg.norm(run.paths.states, axis=-1).min())
            if run.paths.n_paths >= 2:
                st = endpoint_statistics(run.paths)
                summary.endpoint_statistics = {
                    "mean_km": st.mean.tolist(),
                    "covariance_km2": st.covariance.tolist(),
                    "std_error_km": st.std_error.tolist(),
                    "n": st.n,
                }
            summary.stage_seconds[stage] = time.perf_counter() - tic

        summary.status = "ok" if sol.converged else "not_converged"
    except Exception as exc:
        summary.status = "failed"
        summary.failed_stage = stage
        summary.error = f"{type(exc).__name__}: {exc}"
        if write:
            _write_partial(run, out)
        raise StageError(stage, exc) from exc

    if write:
        tic = time.perf_counter()
        try:
            run.manifest = emit_artifacts(run, out)
        except OSError as exc:
            summary.failed_stage = "emit"
            summary.error = f"{type(exc).__name__}: {exc}"
            raise StageError("emit", exc) from exc
        summary.stage_seconds["emit"] = time.perf_counter() - tic
    return run


def run_pipeline(config: RunConfig, *, simulate: bool = True, out_dir: str | Path | None = None) -> RunSummary:
    return execute(config, simulate=simulate, out_dir=out_dir).summary


# -- file writers ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _slice_for_time(grid, t_scaled: float) -> int:
    s = (t_scaled - grid.t0) / grid.dt
    return int(np.clip(np.ceil(s - 0.5), 0, grid.nt))


def _write_text(path: Path, text: str, manifest: list) -> None:
    path.write_text(text, encoding="utf-8", newline="")
    manifest.append({"path": path.name, "bytes": path.stat().st_size})


def marginals_csv(run: PipelineRun) -> str:
    sol, cfg = run.solution, run.config
    grid, R, T = sol.grid, cfg.r_scale, cfg.t_scale
    lines = ["axis,t_hours,coordinate_km,density"]
    for hours in cfg.snapshot_hours:
        k = _slice_for_time(grid, hours * 3600.0 / T)
        t_hours = grid.times[k] * T / 3600.0
        for axis in ("x", "y", "z"):
            coords, dens = marginal_1d(sol.rho_series[k], grid, axis)
            # scaled marginal per unit r' -> physical marginal per km
            for c, d in zip(coords * R, dens / R):
                lines.append(f"{axis},{_fmt(t_hours)},{_fmt(c)},{_fmt(d)}")
    return "\n".join(lines) + "\n"


def paths_csv(paths: SamplePathSet | None) -> str:
    lines = ["path_id,t_s,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms"]
    if paths is not None:
        for p in range(paths.n_paths):
            for k, t in enumerate(paths.times):
                s, v = paths.states[p, k], paths.controls[p, k]
                lines.append(
                    f"{p},{_fmt(t)},{_fmt(s[0])},{_fmt(s[1])},{_fmt(s[2])},{_fmt(v[0])},{_fmt(v[1])},{_fmt(v[2])}"
                )
    return "\n".join(lines) + "\n"


ENSEMBLE_COLUMNS = "t_s,n,mean_x_km,mean_y_km,mean_z_km,cov_xx,cov_xy,cov_xz,cov_yy,cov_yz,cov_zz"


def ensemble_csv(paths: SamplePathSet | None, snapshot_hours) -> str:
    lines = [ENSEMBLE_COLUMNS]
    if paths is not None and paths.n_paths >= 2:
        for hours in snapshot_hours:
            k = int(np.argmin(np.abs(paths.times - hours * 3600.0)))
            st = ensemble_statistics(paths.states[:, k])
            c = st.covariance
            vals = [paths.times[k], *st.mean, c[0, 0], c[0, 1], c[0, 2], c[1, 1], c[1, 2], c[2, 2]]
            lines.append(f"{_fmt(vals[0])},{st.n}," + ",".join(_fmt(v) for v in vals[1:]))
    return "\n".join(lines) + "\n"


def write_field_series(path: Path, series: np.ndarray) -> None:
    """Raw dump: magic, version, 4 dims (uint64 LE), then float64 LE values in C order."""
    series = np.ascontiguousarray(series, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<I", FIELD_VERSION))
        fh.write(struct.pack("<4Q", *series.shape))
        fh.write(series.tobytes(order="C"))


def read_field_series(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != FIELD_MAGIC:
            raise ValueError(f"{path} is not a field-series dump")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FIELD_VERSION:
            raise ValueError(f"unsupported field-series version {version}")
        shape = struct.unpack("<4Q", fh.read(32))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape)


def emit_artifacts(run: PipelineRun, out_dir: str | Path) -> list:
    """Write CSVs, config, optional field dumps and the summary; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list = []
    _write_text(out / "config.json", dump_config(run.config), manifest)
    if run.solution is not None:
        _write_text(out / "marginals.csv", marginals_csv(run), manifest)
    _write_text(out / "paths.csv", paths_csv(run.paths), manifest)
    _write_text(out / "ensemble.csv", ensemble_csv(run.paths, run.config.snapshot_hours), manifest)
    if run.config.write_fields and run.solution is not None:
        for name, series in (
            ("phi_hat", run.solution.phi_hat_series),
            ("phi", run.solution.phi_series),
            ("rho", run.solution.rho_series),
        ):
            path = out / f"{name}.bin"
            write_field_series(path, series)
            manifest.append({"path": path.name, "bytes": path.stat().st_size})
    _write_text(out / "summary.json", run.summary.to_json(), manifest)
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2) + "\n", manifest)
    return manifest


def _write_partial(run: PipelineRun, out: Path) -> None:
    try:
        emit_artifacts(run, out)
    except Exception:  # the original failure is what gets reported
        logger.exception("could not flush partial outputs to %s", out)
