"""Compare the compiled and pure-Python kernel backends.

Runs every kernel of both backends on the same Example A inputs, checks that
the outputs agree, and prints best-of-N wall times and the speed-up.

    python3 benchmarks/bench_kernels.py [--step 1e-3] [--repeat 5]
"""

import argparse
import timeit
from types import SimpleNamespace

import numpy as np

from mdrc import _pykernels
from mdrc.feedforward import riccati_midpoints
from mdrc.linalg import pinv
from mdrc.experiments.scenario import load_scenario
from mdrc.model import Signal, assemble_Q, uniform_grid

try:
    from mdrc import _kernels
except ImportError:  # extension not built
    _kernels = None


def kernel_cases(step, T):
    sc = load_scenario("example_a")
    plant, cost = sc.plant, sc.cost.with_horizon(T)
    A, B, E, R = plant.A, plant.B, plant.E, cost.R
    Q = assemble_Q(plant, cost)
    Ui = pinv(B.T @ R @ B)
    G = B @ Ui @ B.T
    grid, N = uniform_grid(T, step)
    dt = float(grid[1] - grid[0])
    P = _pykernels.grde_backward(A, Q, G, cost.P_T, dt, N)

    Pmid = riccati_midpoints(SimpleNamespace(P=P, plant=plant, Q=Q, step=dt), G)
    RE = R @ E
    r = cost.r
    dseg = Signal.step(0.5, [0.0], [3.0]).on_intervals(grid)
    ff_args = (A, G, P, Pmid, E - G @ RE, Q @ r, dseg, B, Ui, B.T @ RE, E, E.T @ RE,
               0.5 * r @ Q @ r, -cost.P_T @ r, 0.5 * r @ cost.P_T @ r, dt)
    K = np.einsum("ij,jk,tkl->til", Ui, B.T, P[:-1])  # u = -U^+B'P x
    kff = np.zeros((N, plant.m))
    sim_args = (A, B, E, np.ascontiguousarray(K), kff, dseg, sc.x0, dt)
    return {
        "grde_backward": (A, Q, G, cost.P_T, dt, N),
        "grde_stationary": (A, Q, G, np.zeros_like(A), dt, 1e-10, 10 ** 6),
        "feedforward_backward": ff_args,
        "simulate_affine": sim_args,
    }


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=1e-3, help="grid step (default 1e-3)")
    ap.add_argument("--horizon", type=float, default=2.0, help="horizon T in seconds")
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is kept)")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the Python backend is available")
    cases = kernel_cases(args.step, args.horizon)
    print(f"step {args.step:g}, horizon {args.horizon:g}s, best of {args.repeat}")
    print(f"{'kernel':<22} {'python [ms]':>12} {'cython [ms]':>12} {'speed-up':>9} "
          f"{'max |diff|':>11}")
    for name, call_args in cases.items():
        py_fn = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py_fn(*call_args), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:<22} {1e3 * t_py:>12.3f} {'-':>12} {'-':>9} {'-':>11}")
            continue
        cy_fn = getattr(_kernels, name)
        t_cy = min(timeit.repeat(lambda: cy_fn(*call_args), number=1, repeat=args.repeat))
        diff = max_diff(py_fn(*call_args), cy_fn(*call_args))
        print(f"{name:<22} {1e3 * t_py:>12.3f} {1e3 * t_cy:>12.3f} {t_py / t_cy:>8.1f}x "
              f"{diff:>11.2e}")


if __name__ == "__main__":
    main()
