import subprocess
import sys

import numpy as np
import pytest

from gridbase import _fastpath_py
from gridbase import hvac_model as hm
from gridbase import kernels


def _random_batch(hot_hour, size, seed):
    rng = np.random.default_rng(seed)
    n = hot_hour.zones.count
    X = np.column_stack([
        rng.uniform(12.0, 37.0, size),
        rng.uniform(0.2, 1.5, size),
        *[rng.uniform(0.1, 0.6, size) for _ in range(n)],
        rng.uniform(0.0, 5000.0, size),
        rng.uniform(0.0, 30000.0, size),
    ])
    # sprinkle exact chiller-off rows to exercise the hard switch
    X[::7, -1] = 0.0
    W = np.tile(hot_hour.to_vector(), (size, 1))
    W[:, 0] += rng.uniform(-3.0, 3.0, size)
    return X, W


def test_python_backend_matches_scalar_objective(hot_hour):
    X, W = _random_batch(hot_hour, 64, seed=0)
    par = hot_hour.params
    out = _fastpath_py.objective_batch(X, W, 5, par.c_p)
    for k in range(X.shape[0]):
        ref = hm.objective_flat(X[k], W[k], 5, par.c_p)
        assert out[k] == ref


def test_python_backend_matches_scalar_constraints(hot_hour):
    X, W = _random_batch(hot_hour, 64, seed=1)
    par = hot_hour.params
    out = _fastpath_py.constraints_batch(X, W, 5, par.c_p, par.flow_floor)
    for k in range(X.shape[0]):
        ref = hm.constraints_flat(X[k], W[k], 5, par.c_p, par.flow_floor)
        assert np.array_equal(out[k], ref)


def test_selected_backend_matches_python_bit_exact(hot_hour):
    X, W = _random_batch(hot_hour, 512, seed=2)
    par = hot_hour.params
    assert np.array_equal(
        kernels.objective_batch(X, W, 5, par.c_p),
        _fastpath_py.objective_batch(X, W, 5, par.c_p))
    assert np.array_equal(
        kernels.constraints_batch(X, W, 5, par.c_p, par.flow_floor),
        _fastpath_py.constraints_batch(X, W, 5, par.c_p, par.flow_floor))


def test_compiled_backend_available_and_equivalent(hot_hour):
    compiled = pytest.importorskip("gridbase._fastpath")
    X, W = _random_batch(hot_hour, 512, seed=3)
    par = hot_hour.params
    assert compiled.BACKEND == "cython"
    assert np.array_equal(
        compiled.objective_batch(X, W, 5, par.c_p),
        _fastpath_py.objective_batch(X, W, 5, par.c_p))
    assert np.array_equal(
        compiled.constraints_batch(X, W, 5, par.c_p, par.flow_floor),
        _fastpath_py.constraints_batch(X, W, 5, par.c_p, par.flow_floor))


def test_env_var_forces_python_backend():
    code = ("import gridbase.kernels as k; print(k.BACKEND)")
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "GRIDBASE_PURE_PYTHON": "1"},
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_reports_name():
    assert kernels.BACKEND in ("python", "cython")
