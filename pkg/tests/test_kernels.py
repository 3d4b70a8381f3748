import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from torusflow import GraphState, StepperConfig, kernels, run_flow
from torusflow._numba import HAVE_NUMBA
from conftest import smooth_field

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def numpy_backend():
    prev = kernels.use_backend("numpy")
    yield
    kernels.use_backend(prev)


def _padded(grid, seed=0, amp=3.0):
    rng = np.random.default_rng(seed)
    return GraphState.from_field(grid, amp * rng.normal(size=grid.shape)).padded


def test_fill_2d_agrees(oval_grid):
    p = _padded(oval_grid)
    a, b = p.copy(), p.copy()
    g = oval_grid
    kernels.fill_2d_numba(a, g.ds, g.dphi, g.nb_ratio)
    kernels.fill_2d_numpy(b, g.ds, g.dphi, g.nb_ratio)
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(b))


def test_fill_1d_agrees(grid1d):
    p = _padded(grid1d)
    a, b = p.copy(), p.copy()
    kernels.fill_1d_numba(a)
    kernels.fill_1d_numpy(b)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("amp", [0.1, 3.0, 30.0])
def test_rhs_2d_agrees(oval_grid, amp):
    g = oval_grid
    p = _padded(g, amp=amp)
    outs = []
    for fn in (kernels.rhs_2d_numba, kernels.rhs_2d_numba_parallel, kernels.rhs_2d_numpy):
        out, vt2 = np.empty(g.shape), np.empty(g.shape)
        fn(p, g.coef, g.ds, g.dphi, out, vt2)
        outs.append((out, vt2))
    ref, ref_vt2 = outs[-1]
    for out, vt2 in outs[:-1]:
        assert np.max(np.abs(out - ref)) <= 1e-13 * np.max(np.abs(ref))
        assert np.max(np.abs(vt2 - ref_vt2)) <= 1e-13 * np.max(ref_vt2)


def test_rhs_1d_agrees(grid1d):
    p = _padded(grid1d)
    res = []
    for fn in (kernels.rhs_1d_numba, kernels.rhs_1d_numpy):
        out, vt2 = np.empty(grid1d.shape), np.empty(grid1d.shape)
        fn(p, grid1d.r, grid1d.h, out, vt2)
        res.append(out)
    assert np.max(np.abs(res[0] - res[1])) <= 1e-13 * np.max(np.abs(res[1]))


def test_rkl2_stage_agrees():
    rng = np.random.default_rng(1)
    arrs = [rng.normal(size=(7, 9)) for _ in range(5)]
    outs = []
    for fn in (kernels.rkl2_stage_numba, kernels.rkl2_stage_numpy):
        out, d = np.empty((7, 9)), np.empty((7, 9))
        fn(out, d, *arrs, 1.3, -0.4, 0.01, -0.002)
        outs.append((out, d))
    assert np.max(np.abs(outs[0][0] - outs[1][0])) <= 1e-13
    assert np.max(np.abs(outs[0][1] - outs[1][1])) <= 1e-13


@pytest.mark.parametrize("scheme", ["euler", "rkl2"])
def test_runs_agree_across_backends(grid2d, scheme, numpy_backend):
    cfg = StepperConfig(scheme=scheme, t_final=0.01, osc_tol=0.0)
    u0 = smooth_field(grid2d, 2.0)
    a = run_flow(u0, grid2d, cfg).state.u
    kernels.use_backend("numba")
    b = run_flow(u0, grid2d, cfg).state.u
    assert np.max(np.abs(a - b)) <= 1e-12


def test_use_backend_validation():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def _env_run(env_extra):
    env = dict(os.environ, **env_extra)
    code = "from torusflow import kernels; print(kernels.active().name)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)


def test_env_flag_selects_numpy():
    out = _env_run({"TORUSFLOW_BACKEND": "numpy"})
    assert out.returncode == 0 and out.stdout.strip() == "numpy"


@pytest.mark.parametrize("env", [{"TORUSFLOW_BACKEND": "cuda"}, {"TORUSFLOW_THREADS": "0"},
                                 {"TORUSFLOW_THREADS": "two"}])
def test_bad_env_rejected(env):
    out = _env_run(env)
    assert out.returncode != 0 and "TORUSFLOW_" in out.stderr


def test_benchmark_script_runs():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--sizes", "8", "--n1d", "17", "--repeat", "1"],
                         capture_output=True, text=True, check=True).stdout
    assert "euler_step" in out and "2D 8x8" in out
