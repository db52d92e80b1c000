"""Time the compiled kernels against the numpy fallback, plus one short simulation per backend.

    python benchmarks/bench_kernels.py [--repeat 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hqspray._kernels import _pykernels

try:
    from hqspray._kernels import _ckernels
except ImportError:
    _ckernels = None


def kernel_cases(n_nodes: int, n_rows: int):
    g = np.random.default_rng(0)
    x, y = g.uniform(0, 4500, n_nodes), g.uniform(0, 3400, n_nodes)
    tx, ty = g.uniform(0, 4500, n_nodes), g.uniform(0, 3400, n_nodes)
    speed = g.uniform(0.5, 13.9, n_nodes)
    wait = np.zeros(n_nodes)
    moving = np.ones(n_nodes, dtype=bool)
    values = np.sort(g.uniform(0, 100, n_rows))
    labels = g.integers(0, 2, n_rows).astype(np.int64)

    def adv(mod):
        # copies so every call does the same work
        return lambda: mod.advance(x.copy(), y.copy(), tx, ty, speed, wait, moving, 0.0, 1.0, np.zeros(n_nodes))

    return {
        f"advance ({n_nodes} nodes)": adv,
        f"range_pairs ({n_nodes} nodes)": lambda mod: (lambda: mod.range_pairs(x, y, 10.0)),
        f"split_scan ({n_rows} rows)": lambda mod: (lambda: mod.split_scan(values, labels)),
    }


def time_call(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat


def time_simulation(pure: bool) -> float:
    code = ("import time; from hqspray.config import accident_scenario, scale_config; from hqspray.engine import run_reports;"
            "t=time.perf_counter(); run_reports(scale_config(accident_scenario(60, 70, seed=1), 0.33)); "
            "print(time.perf_counter()-t)")
    env = dict(os.environ, HQSPRAY_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--nodes", type=int, default=113)
    ap.add_argument("--rows", type=int, default=500)
    ap.add_argument("--no-sim", action="store_true", help="skip the end-to-end simulation timing")
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)
    print(f"{'kernel':<28}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, make in kernel_cases(args.nodes, args.rows).items():
        py = time_call(make(_pykernels), args.repeat) * 1e6
        if _ckernels is None:
            print(f"{name:<28}{py:>12.2f}{'-':>12}{'-':>10}")
            continue
        cy = time_call(make(_ckernels), args.repeat) * 1e6
        print(f"{name:<28}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")
    if not args.no_sim:
        py = time_simulation(pure=True)
        cy = time_simulation(pure=False)
        print(f"{'simulation (desk scale)':<28}{py:>11.2f}s{cy:>11.2f}s{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
