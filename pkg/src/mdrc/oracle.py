"""Discrete-time dynamic-programming oracle for the finite-horizon tracking problem.

The plant is discretized exactly under zero-order hold and the cost
integrand is sampled at the left endpoint of each step. The resulting
quadratic problem is solved by backward recursion on
``V_k(x) = 1/2 x'S_k x + x's_k + c_k``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, SingularStageHessian
from .model import assemble_Q, uniform_grid

HESSIAN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteTrackingProblem:
    A_d: np.ndarray
    B_d: np.ndarray
    E_d: np.ndarray
    B: np.ndarray
    E: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P_T: np.ndarray
    r: np.ndarray
    d: np.ndarray  # (N, q), held over each step
    x0: np.ndarray
    step: float

    @property
    def N(self):
        return self.d.shape[0]

    @property
    def T(self):
        return self.N * self.step

    @classmethod
    def from_continuous(cls, plant, cost, d, x0, step):
        """ZOH discretization of ``(A, B, E)`` through one augmented matrix exponential."""
        grid, N = uniform_grid(cost.T, step)
        dt = float(grid[1] - grid[0])
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (plant.n,):
            raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({plant.n},)")
        A_d, B_d, E_d = zoh(plant.A, plant.B, plant.E, dt)
        return cls(A_d, B_d, E_d, plant.B, plant.E, assemble_Q(plant, cost), cost.R, cost.P_T,
                   cost.r.copy(), d.on_intervals(grid), x0, dt)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    u: np.ndarray  # (N, m)
    x: np.ndarray  # (N+1, n)
    J_d: float
    K: np.ndarray  # (N, m, n), u_k = -K_k x_k - k_k
    k: np.ndarray  # (N, m)


def zoh(A, B, E, dt):
    n, m = B.shape
    q = E.shape[1]
    aug = np.zeros((n + m + q, n + m + q))
    aug[:n, :n] = A
    aug[:n, n:n + m] = B
    aug[:n, n + m:] = E
    Phi = expm(aug * dt)
    return Phi[:n, :n], Phi[:n, n:n + m], Phi[:n, n + m:]


def solve_discrete_dp(p):
    """Exact minimizer of the discretized cost.

    Raises :class:`SingularStageHessian` when the stage Hessian in ``u``,
    ``dt B'RB + B_d'S_{k+1}B_d``, is not positive definite.
    """
    dt, N = p.step, p.N
    n, m = p.B_d.shape
    Ups = p.B.T @ p.R @ p.B
    BRE = p.B.T @ p.R @ p.E
    ERE = p.E.T @ p.R @ p.E
    Qr = p.Q @ p.r
    rQr = float(p.r @ Qr)
    S = p.P_T.copy()
    s = -p.P_T @ p.r
    c = 0.5 * float(p.r @ p.P_T @ p.r)
    K = np.empty((N, m, n))
    k = np.empty((N, m))
    for i in range(N - 1, -1, -1):
        dk = p.d[i]
        w = p.E_d @ dk
        Sw_s = S @ w + s
        Huu = dt * Ups + p.B_d.T @ S @ p.B_d
        Huu = 0.5 * (Huu + Huu.T)
        ev = np.linalg.eigvalsh(Huu)
        if ev[0] <= HESSIAN_TOL * max(1.0, ev[-1]):
            raise SingularStageHessian(
                f"stage Hessian not positive definite at step {i} (min eigenvalue {ev[0]:.3e})")
        Hux = p.B_d.T @ S @ p.A_d
        gu = dt * (BRE @ dk) + p.B_d.T @ Sw_s
        Ki = np.linalg.solve(Huu, Hux)
        ki = np.linalg.solve(Huu, gu)
        K[i], k[i] = Ki, ki
        c += (0.5 * dt * (rQr + float(dk @ ERE @ dk)) + 0.5 * float(w @ S @ w) + float(w @ s)
              - 0.5 * float(gu @ ki))
        s = -dt * Qr + p.A_d.T @ Sw_s - Hux.T @ ki
        S_new = dt * p.Q + p.A_d.T @ S @ p.A_d - Hux.T @ Ki
        S = 0.5 * (S_new + S_new.T)
    x = np.empty((N + 1, n))
    u = np.empty((N, m))
    x[0] = p.x0
    for i in range(N):
        u[i] = -K[i] @ x[i] - k[i]
        x[i + 1] = p.A_d @ x[i] + p.B_d @ u[i] + p.E_d @ p.d[i]
    J = 0.5 * float(p.x0 @ S @ p.x0) + float(p.x0 @ s) + c
    return DiscreteSolution(u, x, J, K, k)


def discrete_cost(p, u):
    """Discretized cost of an arbitrary input sequence ``u`` of shape ``(N, m)``."""
    u = np.asarray(u, dtype=float).reshape(p.N, -1)
    x = p.x0.copy()
    J = 0.0
    for i in range(p.N):
        e = x - p.r
        v = p.B @ u[i] + p.E @ p.d[i]
        J += p.step * 0.5 * (float(e @ p.Q @ e) + float(v @ p.R @ v))
        x = p.A_d @ x + p.B_d @ u[i] + p.E_d @ p.d[i]
    e = x - p.r
    return J + 0.5 * float(e @ p.P_T @ e)


def write_discrete_csv(p, sol, path):
    """CSV with header ``k, t, u1..um, x1..xn`` (state at the start of each step)."""
    n, m = sol.x.shape[1], sol.u.shape[1]
    header = ["k", "t"] + [f"u{i + 1}" for i in range(m)] + [f"x{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(p.N):
            w.writerow([i, repr(i * p.step)] + [repr(float(v)) for v in (*sol.u[i], *sol.x[i])])
