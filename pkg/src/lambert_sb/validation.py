"""Quick self-checks behind ``lambert-sb validate``.

Each check builds a tiny problem with a known answer and compares.  The
whole suite runs in a few seconds; the full-size checks live in the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bridge import EndpointDensities, run_recursion
from .grid import SpaceTimeGrid, cell_weight
from .potential import PotentialModel, oblateness_factor, potential_physical
from .rdsolve import ReactionDiffusionProblem, heat_kernel_1d, solve_forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _gauss(grid: SpaceTimeGrid, var: float) -> np.ndarray:
    x, y, z = np.meshgrid(*grid.axes, indexing="ij")
    return np.exp(-(x**2 + y**2 + z**2) / (2 * var)) / (2 * np.pi * var) ** 1.5


def _rel_l1(u, v) -> float:
    return float(np.abs(u - v).sum() / np.abs(v).sum())


def check_heat() -> CheckResult:
    a, var0 = 0.5, 0.09
    grid = SpaceTimeGrid.cube(-5.0, 5.0, 24, t=(0.0, 0.91), nt=4)
    u = solve_forward(_gauss(grid, var0), ReactionDiffusionProblem(a, 0.0, grid))[-1]
    err = _rel_l1(u, _gauss(grid, var0 + 2 * a * 0.91))
    return CheckResult("heat kernel vs analytic Gaussian", err < 0.03, err, 0.03)


def check_constant_reaction() -> CheckResult:
    beta, var0 = 1.0, 1.0
    grid = SpaceTimeGrid.cube(-7.0, 7.0, 28, t=(0.0, 1.0), nt=16)
    u = solve_forward(_gauss(grid, var0), ReactionDiffusionProblem(1.0, beta, grid))[-1]
    err = _rel_l1(u, np.exp(beta) * _gauss(grid, var0 + 2.0))
    return CheckResult("constant reaction vs exp(beta t) heat", err < 0.05, err, 0.05)


def check_potential_sign(n: int = 20000, seed: int = 0) -> CheckResult:
    model = PotentialModel()
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = d * np.exp(rng.uniform(np.log(model.r_earth), np.log(1e6), n))[:, None]
    v = potential_physical(r, model)
    worst = float(max(v.max(), -oblateness_factor(r, model).min()))
    return CheckResult("potential negative outside the Earth", worst < 0, worst, 0.0)


def _ipfp_oracle(grid: SpaceTimeGrid, a: float, rho0, rho1, iters: int = 5000):
    pts = grid.points().reshape(-1, 3)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    tau = grid.t1 - grid.t0
    k = np.exp(-d2 / (4 * a * tau)) / (4 * np.pi * a * tau) ** 1.5 * cell_weight(grid)
    p0, p1 = rho0.ravel(), rho1.ravel()
    f = np.ones_like(p0)
    for _ in range(iters):
        g = p1 / (k @ f)
        f_new = p0 / (k.T @ g)
        if np.max(np.abs(f_new / f - 1)) < 1e-14:
            f = f_new
            break
        f = f_new
    return f.reshape(grid.shape), (p1 / (k @ f)).reshape(grid.shape)


def _projective_gap(u, v) -> float:
    r = np.log(u / v)
    return float(np.max(np.abs(r - r.mean())))


def check_sinkhorn() -> CheckResult:
    grid = SpaceTimeGrid.cube(-1.0, 1.0, 4, t=(0.0, 0.3), nt=8)
    x, y, z = np.meshgrid(*grid.axes, indexing="ij")
    rho0 = np.exp(-((x + 0.4) ** 2 + y**2 + z**2))
    rho1 = np.exp(-((x - 0.3) ** 2 + (y - 0.2) ** 2 + z**2) / 0.5)
    ends = EndpointDensities.normalized(rho0, rho1, grid)
    sol = run_recursion(ends, ReactionDiffusionProblem(1.0, 0.0, grid), max_iters=500, tol=1e-13)
    f, g = _ipfp_oracle(grid, 1.0, ends.rho0, ends.rho1)
    gap = max(_projective_gap(sol.phi_hat_0, f), _projective_gap(sol.phi_1, g))
    return CheckResult("bridge factors vs dense IPFP", gap < 1e-6, gap, 1e-6)


CHECKS: dict[str, Callable[[], CheckResult]] = {
    "heat": check_heat,
    "reaction": check_constant_reaction,
    "potential": check_potential_sign,
    "sinkhorn": check_sinkhorn,
}


def run_validation(names=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        try:
            res = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failed check
            logger.error("check %s raised %s", name, exc)
            res = CheckResult(name, False, float("nan"), float("nan"))
        results.append(res)
    return results
