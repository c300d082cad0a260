"""Closed-loop simulation, cost evaluation and optimality-condition residuals.

The input is sampled: ``u_k = law(t_k, x_k, d(t_k))`` is held over
``[t_k, t_{k+1})`` while the plant is advanced with one RK4 step.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, GridMismatch, NonFiniteState
from .model import assemble_Q, uniform_grid


@dataclass(frozen=True, eq=False)
class SimulationLog:
    grid: np.ndarray
    x: np.ndarray  # (N+1, n)
    u: np.ndarray  # (N+1, m); u[k] is held on [t_k, t_{k+1}), u[N] is the law at T
    d: np.ndarray  # (N+1, q), value read by the law at each node
    d_held: np.ndarray  # (N, q), value acting on the plant over each step
    y: np.ndarray  # (N+1, l)
    running_cost: np.ndarray  # (N+1,)
    law_kind: str = ""

    @property
    def step(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def T(self):
        return float(self.grid[-1])


@dataclass(frozen=True)
class CostReport:
    J_sim: float
    J_formula: float | None
    gap: float | None
    time_average: float


@dataclass(frozen=True, eq=False)
class FbdeResidualReport:
    lam: np.ndarray
    stationarity_residual: float
    adjoint_ode_residual: float
    terminal_residual: float
    adjoint_profile: np.ndarray  # per interior node


def _rk4_held(A, x, c, dt):
    k1 = A @ x + c
    k2 = A @ (x + 0.5 * dt * k1) + c
    k3 = A @ (x + 0.5 * dt * k2) + c
    k4 = A @ (x + dt * k3) + c
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _stage_integrals(x, u, d_held, plant, Q, R, r, dt):
    """Per-step integral of the cost integrand (trapezoid in x, exact for held Bu + Ed)."""
    e = x - r
    track = 0.5 * np.einsum("ti,ij,tj->t", e, Q, e)
    v = u[:-1] @ plant.B.T + d_held @ plant.E.T
    effort = 0.5 * np.einsum("ti,ij,tj->t", v, R, v)
    return 0.5 * dt * (track[:-1] + track[1:]) + dt * effort


def simulate(plant, law, d, x0, T, step, cost=None):
    """Simulate ``x' = A x + B u + E d`` under ``law`` on ``[0, T]``.

    ``running_cost`` is the cumulative cost integral when ``cost`` is given
    (zeros otherwise). Raises :class:`NonFiniteState` with the partial log
    attached as ``exc.log`` if the state overflows.
    """
    grid, N = uniform_grid(T, step)
    dt = grid[1] - grid[0]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (plant.n,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({plant.n},)")
    if d.dim != plant.q:
        raise DimensionMismatch(f"disturbance has dimension {d.dim}, expected {plant.q}")
    d_nodes = np.ascontiguousarray(d(grid), dtype=float)
    d_held = d.on_intervals(grid)
    law.reset()
    sched = law.affine_schedule(grid, d_nodes) if law.stateless else None
    failed_at = None
    if sched is not None:
        K, k = sched
        x, u_steps, done = kernels.simulate_affine(plant.A, plant.B, plant.E, K[:-1], k[:-1],
                                                   d_held, x0, dt)
        u = np.vstack([u_steps, (-K[-1] @ x[-1] - k[-1])[None, :]])
        if done < N:
            failed_at = done
    else:
        x = np.full((N + 1, plant.n), np.nan)
        u = np.full((N + 1, plant.m), np.nan)
        x[0] = x0
        xk = x0.copy()
        A, B, E = plant.A, plant.B, plant.E
        for i in range(N):
            uk = np.asarray(law(grid[i], xk, d_nodes[i]), dtype=float).reshape(plant.m)
            u[i] = uk
            with np.errstate(over="ignore", invalid="ignore"):
                xk = _rk4_held(A, xk, B @ uk + E @ d_held[i], dt)
            x[i + 1] = xk
            if not np.all(np.isfinite(xk)):
                failed_at = i
                break
        else:
            u[N] = np.asarray(law(grid[N], xk, d_nodes[N]), dtype=float).reshape(plant.m)
    x[0] = x0
    y = x @ plant.c_o.T
    if cost is not None:
        Q = assemble_Q(plant, cost)
        stage = _stage_integrals(x, u, d_held, plant, Q, cost.R, cost.r, dt)
    else:
        stage = np.zeros(N)
    running = np.concatenate([[0.0], np.cumsum(stage)])
    kind = getattr(getattr(law, "kind", ""), "value", str(getattr(law, "kind", "")))
    log = SimulationLog(grid, x, u, d_nodes, d_held, y, running, kind)
    if failed_at is not None:
        exc = NonFiniteState(f"state diverged at t = {grid[failed_at + 1]:g}", step=failed_at)
        exc.log = log
        raise exc
    return log


def evaluate_cost(log, plant, cost, rt=None, ft=None):
    """Quadrature cost of a log and, with Riccati/feedforward data, the value formula.

    ``J_formula = 1/2 x0'P_0 x0 + x0'f_0 + H_0``; ``gap`` is
    ``|J_sim - J_formula| / max(1, |J_formula|)``.
    """
    Q = assemble_Q(plant, cost)
    stage = _stage_integrals(log.x, log.u, log.d_held, plant, Q, cost.R, cost.r, log.step)
    e_T = log.x[-1] - cost.r
    integral = float(np.sum(stage))
    J_sim = integral + 0.5 * float(e_T @ cost.P_T @ e_T)
    J_formula = gap = None
    if rt is not None and ft is not None:
        x0 = log.x[0]
        J_formula = float(0.5 * x0 @ rt.P[0] @ x0 + x0 @ ft.f[0] + ft.H[0])
        gap = abs(J_sim - J_formula) / max(1.0, abs(J_formula))
    return CostReport(J_sim, J_formula, gap, integral / log.T)


def fbde_residuals(log, rt, ft, cost=None):
    """Residuals of the forward-backward optimality system along a logged trajectory.

    The adjoint is reconstructed as ``lam_t = P_t x_t + f_t``; its derivative
    uses central differences on interior nodes.
    """
    cost = rt.cost if cost is None else cost
    if len(log.grid) != len(rt.grid) or not np.allclose(log.grid, rt.grid, rtol=0, atol=1e-12):
        raise GridMismatch("simulation log and Riccati trajectory use different grids")
    plant = rt.plant
    B, E, R, A, Q = plant.B, plant.E, cost.R, plant.A, rt.Q
    lam = np.einsum("tij,tj->ti", rt.P, log.x) + ft.f
    stat = log.u @ rt.Upsilon.T + log.d @ (B.T @ R @ E).T + lam @ B
    stationarity = float(np.max(np.linalg.norm(stat, axis=1)))
    dt = log.step
    lam_dot = (lam[2:] - lam[:-2]) / (2.0 * dt)
    inner = slice(1, -1)
    adj = lam_dot - (cost.r - log.x[inner]) @ Q.T + lam[inner] @ A
    profile = np.linalg.norm(adj, axis=1)
    terminal = float(np.linalg.norm(lam[-1] - cost.P_T @ (log.x[-1] - cost.r)))
    adjoint = float(np.max(profile)) if len(profile) else 0.0
    return FbdeResidualReport(lam, stationarity, adjoint, terminal, profile)


def write_log_csv(log, path):
    n, m, q, l = log.x.shape[1], log.u.shape[1], log.d.shape[1], log.y.shape[1]
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
              + [f"d{i + 1}" for i in range(q)] + [f"y{i + 1}" for i in range(l)]
              + ["running_cost"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(log.grid):
            row = [t, *log.x[k], *log.u[k], *log.d[k], *log.y[k], log.running_cost[k]]
            w.writerow([repr(float(v)) for v in row])
