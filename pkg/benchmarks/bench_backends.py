"""Time the numba and numpy kernels on the same inputs.

Run with ``python benchmarks/bench_backends.py [--repeat N] [--trials N]``.
The first numba call compiles (or loads the on-disk cache), so every
kernel is warmed up once before timing.  Results of the two backends are
compared as well, since a fast kernel that disagrees is worthless.
"""

import argparse
import time

import numpy as np

from udnbeam import _accel
from udnbeam.model import default_params
from udnbeam.montecarlo import SimConfig, simulate
from udnbeam.special import powerlaw_kernel, upper_incomplete_gamma


def _best_of(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(n_trials):
    rng = np.random.default_rng(7)
    kappa = 10.0 ** rng.uniform(-6, 6, 20_000)
    lo = rng.uniform(0.0, 2.0, kappa.size)
    s = rng.uniform(-3.0, 3.0, 20_000)
    x = 10.0 ** rng.uniform(-3, 2, s.size)
    params = default_params()
    config = SimConfig(trials=n_trials, seed=11)
    return {
        "powerlaw_kernel (20k, p=1.6)": lambda: powerlaw_kernel(1.6, kappa, lo, np.inf),
        "upper_incomplete_gamma (20k)": lambda: upper_incomplete_gamma(s, x),
        f"simulate ({n_trials} trials)": lambda: simulate(params, config).sinr,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trials", type=int, default=2000)
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    previous = _accel.backend()
    print(f"{'kernel':34s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup  max rel diff")
    try:
        for name, fn in _cases(args.trials).items():
            times, outs = [], []
            for b in backends:
                _accel.use_backend(b)
                t, out = _best_of(fn, args.repeat)
                times.append(t)
                outs.append(np.asarray(out, dtype=float))
            row = f"{name:34s} " + " ".join(f"{t * 1e3:8.1f}ms" for t in times)
            if len(outs) == 2:
                a, b = outs
                finite = np.isfinite(a) & np.isfinite(b)
                diff = np.max(np.abs(a[finite] - b[finite]) / np.maximum(np.abs(a[finite]), 1e-300))
                row += f"   {times[0] / times[1]:6.1f}x  {diff:.2e}"
            print(row)
    finally:
        _accel.use_backend(previous)


if __name__ == "__main__":
    main()
