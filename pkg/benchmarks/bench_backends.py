"""Time the compiled kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_backends.py [--repeat 5] [--json out.json]

Each row reports the best wall time over ``--repeat`` runs per backend, the
speed-up, and the largest absolute difference between the backends' outputs.
"""
from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from amkit import _backend
from amkit.core import make_rng
from amkit.dynamics import sweep_order


def workloads():
    r = make_rng(0)
    xi = 2.0 * r.integers(0, 2, size=(400, 60)).astype(np.float64) - 1.0
    sigma = xi[:, 0].copy()
    sigma[:40] *= -1.0
    order = sweep_order(400, 1)
    xi_exp = 2.0 * r.integers(0, 2, size=(24, 2000)).astype(np.float64) - 1.0
    xi_cap = 2.0 * r.integers(0, 2, size=(200, 40)).astype(np.float64) - 1.0
    C = r.uniform(-2.0, 2.0, size=(3, 2))
    g = np.linspace(-2.0, 2.0, 200)
    grid = np.column_stack([np.tile(g, 200), np.repeat(g, 200)])
    return {
        "async_sweep power2 D=400 K=60": lambda b: _backend.async_sweep(xi, sigma, order, _backend.POWER, 2, b),
        "async_sweep exp D=24 K=2000": lambda b: _backend.async_sweep(
            xi_exp, xi_exp[:, 0], sweep_order(24, 2), _backend.EXP, 0, b),
        "unstable_spins power2 D=200 K=40": lambda b: _backend.unstable_spins(xi_cap, _backend.POWER, 2, b),
        "unstable_spins exp D=24 K=2000": lambda b: _backend.unstable_spins(xi_exp, _backend.EXP, 0, b),
        "gauss_descent 200x200 grid, 10 steps": lambda b: _backend.gauss_descent(
            grid, C, 100.0, 0.01, 0.5, 10, 1e-8, np.ones(2), b),
    }


def _max_diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)), initial=0.0))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", default=None, help="also write the rows to this file")
    args = parser.parse_args()
    backends = _backend.available()
    if "cython" not in backends:
        print("compiled backend unavailable (not built or AMKIT_PURE_PYTHON=1); timing numpy only")
    rows = []
    print(f"{'kernel':40s} " + " ".join(f"{b:>12s}" for b in backends) + f" {'speed-up':>9s} {'max diff':>9s}")
    for name, fn in workloads().items():
        times, results = {}, {}
        for b in backends:
            results[b] = fn(b)
            times[b] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
        speedup = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        diff = max(_max_diff(results[backends[0]], results[b]) for b in backends)
        rows.append({"kernel": name, "seconds": times, "speedup": speedup, "max_abs_diff": diff})
        print(f"{name:40s} " + " ".join(f"{times[b]:12.6f}" for b in backends) + f" {speedup:9.1f} {diff:9.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
