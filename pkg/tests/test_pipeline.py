import csv
import dataclasses
import json

import numpy as np
import pytest

from lambert_sb.pipeline import StageError, execute, read_field_series, run_pipeline


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_quick_run_writes_everything(quick_config):
    cfg = dataclasses.replace(quick_config, write_fields=True)
    run = execute(cfg)
    out = cfg.output_dir
    names = {m["path"] for m in run.manifest}
    assert {"config.json", "marginals.csv", "paths.csv", "ensemble.csv", "summary.json", "manifest.json"} <= names
    assert {"phi_hat.bin", "phi.bin", "rho.bin"} <= names
    import os

    for m in run.manifest:
        assert os.path.getsize(os.path.join(out, m["path"])) == m["bytes"]

    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["status"] in ("ok", "not_converged")
    assert summary["seed"] == cfg.seed and len(summary["hilbert_trace"]) == summary["iterations_used"]
    assert set(summary["stage_seconds"]) >= {"discretize", "bridge", "recover", "simulate"}

    rows = read_csv(os.path.join(out, "paths.csv"))
    assert len(rows) == cfg.n_paths * 501
    assert list(rows[0]) == ["path_id", "t_s", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms"]
    ens = read_csv(os.path.join(out, "ensemble.csv"))
    assert [float(r["t_s"]) for r in ens] == [0.0, 900.0, 1800.0, 2700.0, 3600.0]

    rho = read_field_series(os.path.join(out, "rho.bin"))
    np.testing.assert_array_equal(rho, run.solution.rho_series)


def test_marginals_integrate_to_one_at_start(quick_config):
    import os

    execute(quick_config)
    rows = read_csv(os.path.join(quick_config.output_dir, "marginals.csv"))
    assert {r["axis"] for r in rows} == {"x", "y", "z"}
    for axis in "xyz":
        sel = [r for r in rows if r["axis"] == axis and float(r["t_hours"]) == 0.0]
        c = np.array([float(r["coordinate_km"]) for r in sel])
        d = np.array([float(r["density"]) for r in sel])
        assert np.sum(d[:-1] * np.diff(c)) == pytest.approx(1.0, abs=0.02)


def test_budget_exhaustion_still_writes(quick_config):
    import os

    run = execute(dataclasses.replace(quick_config, max_iters=1))
    assert run.summary.converged is False and run.summary.status == "not_converged"
    assert os.path.exists(os.path.join(quick_config.output_dir, "marginals.csv"))


def test_symmetric_bridge_without_potential(quick_config):
    cfg = dataclasses.replace(
        quick_config, potential_off=True, mu1=quick_config.mu0, sigma1=None, tol=1e-8, max_iters=200
    )
    summary = run_pipeline(cfg, simulate=False)
    assert summary.converged and summary.terminal_residual < 1e-4


def test_zero_paths_header_only(quick_config):
    import os

    execute(dataclasses.replace(quick_config, n_paths=0))
    text = open(os.path.join(quick_config.output_dir, "paths.csv")).read()
    assert text == "path_id,t_s,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms\n"
    assert open(os.path.join(quick_config.output_dir, "ensemble.csv")).read().count("\n") == 1


def test_failure_is_stage_labelled_and_summarised(quick_config, tmp_path):
    import os

    # endpoints pushed far outside the box leave no mass on the grid
    cfg = dataclasses.replace(quick_config, mu0=(1e7, 1e7, 1e7), sigma0=((1.0, 0, 0), (0, 1.0, 0), (0, 0, 1.0)))
    with pytest.raises(StageError) as info:
        execute(cfg)
    assert info.value.stage == "discretize"
    summary = json.load(open(os.path.join(cfg.output_dir, "summary.json")))
    assert summary["status"] == "failed" and summary["failed_stage"] == "discretize"
