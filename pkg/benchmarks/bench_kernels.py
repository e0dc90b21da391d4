"""Throughput comparison of the compiled and pure-Python batch kernels.

Run as: python3 benchmarks/bench_kernels.py [n_samples]
"""

import sys
import time

import numpy as np

from gridbase import _fastpath_py
from gridbase import hvac_model as hm

try:
    from gridbase import _fastpath
except ImportError:
    _fastpath = None


def _fixture(n_samples: int, seed: int = 0):
    n = 5
    rng = np.random.default_rng(seed)
    q = np.array([-5200.0, -4100.0, -6300.0, -3800.0, -4700.0])
    tsp = np.array([23.0, 23.5, 22.5, 24.0, 23.0])
    v = np.array([0.10, 0.08, 0.12, 0.07, 0.09])
    w = hm.make_exogenous(34.0, q, tsp, v)
    wv = w.to_vector()
    xv = np.concatenate([[20.0, 0.6], np.full(n, 0.4), [500.0, 20000.0]])
    X = xv[None, :] * rng.uniform(0.9, 1.1, (n_samples, xv.size))
    W = np.tile(wv, (n_samples, 1))
    W[:, 0] += rng.uniform(-1.0, 1.0, n_samples)
    return X, W, n, w.params


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    n_samples = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    X, W, n, params = _fixture(n_samples)
    c_p, floor = params.c_p, params.flow_floor

    backends = [("python", _fastpath_py)]
    if _fastpath is not None:
        backends.append(("cython", _fastpath))

    results = {}
    for name, mod in backends:
        t_obj = _time(mod.objective_batch, X, W, n, c_p)
        t_con = _time(mod.constraints_batch, X, W, n, c_p, floor)
        results[name] = (t_obj, t_con)
        print(f"{name:>7}: objective_batch {n_samples / t_obj / 1e6:7.2f} "
              f"Msamples/s ({t_obj * 1e3:7.2f} ms), "
              f"constraints_batch {n_samples / t_con / 1e6:7.2f} "
              f"Msamples/s ({t_con * 1e3:7.2f} ms)")

    if _fastpath is not None:
        ref_j = _fastpath_py.objective_batch(X, W, n, c_p)
        fast_j = _fastpath.objective_batch(X, W, n, c_p)
        assert np.array_equal(ref_j, fast_j), "backend outputs differ"
        po, pc = results["python"]
        co, cc = results["cython"]
        print(f"speedup: objective {po / co:5.2f}x, "
              f"constraints {pc / cc:5.2f}x (outputs bit-identical)")
    else:
        print("compiled extension unavailable; measured python backend only")
    return 0


if __name__ == "__main__":
    sys.exit(main())
