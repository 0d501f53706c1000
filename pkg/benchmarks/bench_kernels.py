"""Compare the compiled and pure-Python kernels on the Crank-Nicolson march.

Usage::

    python benchmarks/bench_kernels.py [--steps N] [--repeat R]

For each grid size one band is marched ``N`` steps with both backends;
the best of ``R`` wall-clock timings is reported along with the
relative difference of the final states.
"""
import argparse
import time

import numpy as np

from poiseuille_lab.discretization import Grid, ModeField
from poiseuille_lab.kernels import available_backends
from poiseuille_lab.linear import ModeOperator, StepperConfig, evolve


def _time(op, g, cfg, backend, repeat):
    best, traj = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        traj = evolve(op, g, cfg, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, traj.omega[-1]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--sizes", type=int, nargs="+", default=[127, 511, 2047])
    args = parser.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'Ny':>6} " + " ".join(f"{b + ' [s]':>12}" for b in backends)
          + f" {'speedup':>8} {'rel diff':>9}")
    for ny in args.sizes:
        grid = Grid(Ly=10.0, Ny=ny)
        op = ModeOperator(grid, 1, 1e-3)
        g = ModeField(1, np.exp(-grid.y ** 2), grid)
        dt = 1e-2
        cfg = StepperConfig(dt=dt, t_end=args.steps * dt, sample_every=args.steps,
                            keep_fields=True, diagnostics=False)
        results = {b: _time(op, g, cfg, b, args.repeat) for b in backends}
        times = [results[b][0] for b in backends]
        if len(backends) == 2:
            a, b = (results[name][1] for name in backends)
            speedup = f"{times[1] / times[0]:8.1f}"
            diff = f"{np.linalg.norm(a - b) / np.linalg.norm(b):9.1e}"
        else:
            speedup, diff = f"{'n/a':>8}", f"{'n/a':>9}"
        print(f"{ny:>6} " + " ".join(f"{t:12.4f}" for t in times) + f" {speedup} {diff}")


if __name__ == "__main__":
    main()
