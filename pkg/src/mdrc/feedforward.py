"""Feedforward terms ``f``, ``h`` and the cost offset ``H``.

Backward in time, on the Riccati grid:

    df/dt = M'U^+ h - A'f - P E d + Q r,     f_T = -P_T r
    h     = B'f + B'R E d
    dH/dt = 1/2 h'U^+ h - d'E'f - 1/2 r'Qr - 1/2 d'E'R E d,    H_T = 1/2 r'P_T r

so that the value function is ``1/2 x'P x + x'f + H``.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import DimensionMismatch, GridMismatch, SingularAbar
from .model import interp_nodes
from .riccati import DEFAULT_STEP, constant_trajectory


@dataclass(frozen=True, eq=False)
class FeedforwardTrajectory:
    grid: np.ndarray
    f: np.ndarray  # (N+1, n)
    h: np.ndarray  # (N+1, m)
    H: np.ndarray  # (N+1,)
    d: np.ndarray  # disturbance at the nodes, (N+1, q)
    r: np.ndarray

    def f_at(self, t):
        return interp_nodes(self.grid, self.f, t)


@dataclass(frozen=True, eq=False)
class ConvolutionForms:
    """Constant-gain quantities of the explicit feedforward representation.

    ``Abar = A' - M'U^+B'`` (the transpose of the closed loop),
    ``F = (M'U^+B'R - P) E`` and ``Rcal = Abar^{-1} Q``, the infinite-window
    limit of the reference kernel.
    """

    Abar: np.ndarray
    F: np.ndarray
    Rcal: np.ndarray


def solve_feedforward(rt, d, r=None):
    """Integrate ``f`` and ``H`` backward on ``rt.grid`` for disturbance ``d``."""
    plant, cost = rt.plant, rt.cost
    r = cost.r if r is None else np.asarray(r, dtype=float).reshape(-1)
    if r.shape != (plant.n,):
        raise DimensionMismatch(f"reference has shape {r.shape}, expected ({plant.n},)")
    if d.dim != plant.q:
        raise DimensionMismatch(f"disturbance has dimension {d.dim}, expected {plant.q}")
    grid = rt.grid
    if rt.P.shape[0] != len(grid) or len(grid) < 2 or not np.allclose(
            np.diff(grid), grid[1] - grid[0], rtol=1e-9, atol=0):
        raise GridMismatch("Riccati trajectory does not live on a uniform grid")
    A, B, E, R = plant.A, plant.B, plant.E, cost.R
    Ui, Q = rt.UpsilonPinv, rt.Q
    G = B @ Ui @ B.T
    RE = R @ E
    EW = E - B @ Ui @ B.T @ RE
    BRE = B.T @ RE
    ERE = E.T @ RE
    fT = -cost.P_T @ r
    HT = 0.5 * r @ cost.P_T @ r
    f, H = kernels.feedforward_backward(
        A, G, rt.P, riccati_midpoints(rt, G), EW, Q @ r, d.on_intervals(grid), B, Ui, BRE, E, ERE,
        0.5 * r @ Q @ r, fT, HT, rt.step)
    f[-1] = fT
    H[-1] = HT
    d_nodes = np.asarray(d(grid), dtype=float)
    h = f @ B + d_nodes @ BRE.T
    for arr in (f, h, H, d_nodes):
        arr.setflags(write=False)
    return FeedforwardTrajectory(grid, f, h, H, d_nodes, r.copy())


def riccati_midpoints(rt, G):
    """Cubic Hermite midpoints of ``P`` on each interval.

    Uses the Riccati right-hand side at the nodes as the slope, so the stage
    values seen by the feedforward RK4 keep fourth-order accuracy.
    """
    P, A, Q = rt.P, rt.plant.A, rt.Q
    PA = P @ A
    D = Q + PA + np.swapaxes(PA, 1, 2) - P @ G @ P  # dP/ds, s = time to go
    return 0.5 * (P[:-1] + P[1:]) + (rt.step / 8.0) * (D[1:] - D[:-1])


def appendix_forms(g):
    B, E, R = g.plant.B, g.plant.E, g.cost.R
    Abar = g.plant.A.T - g.M.T @ g.UpsilonPinv @ B.T
    F = (g.M.T @ g.UpsilonPinv @ B.T @ R - g.P) @ E
    try:
        Rcal = np.linalg.solve(Abar, g.Q)
    except np.linalg.LinAlgError as exc:
        raise SingularAbar("Abar is singular") from exc
    return ConvolutionForms(Abar, F, Rcal)


def _require_hurwitz(Abar):
    eig = np.linalg.eigvals(Abar)
    if np.max(eig.real) >= 0:
        raise SingularAbar(
            f"closed loop is not asymptotically stable (eigenvalue {eig[np.argmax(eig.real)]:.6g})")


def steady_state_feedforward(g, d_const, r=None):
    """Stationary ``(f_ss, h_ss)`` of the feedforward equation for constant ``d`` and ``r``.

    Solves ``(A' - M'U^+B') f = M'U^+B'R E d - P E d + Q r``.
    """
    plant, R = g.plant, g.cost.R
    B, E = plant.B, plant.E
    d_const = np.atleast_1d(np.asarray(d_const, dtype=float))
    r = g.cost.r if r is None else np.asarray(r, dtype=float).reshape(-1)
    Abar = plant.A.T - g.M.T @ g.UpsilonPinv @ B.T
    _require_hurwitz(Abar)
    rhs = g.M.T @ g.UpsilonPinv @ B.T @ R @ E @ d_const - g.P @ E @ d_const + g.Q @ r
    f_ss = np.linalg.solve(Abar, rhs)
    h_ss = B.T @ f_ss + B.T @ R @ E @ d_const
    return f_ss, h_ss


def stationarity_residual(g, f_ss, d_const, r=None):
    plant, R = g.plant, g.cost.R
    B, E = plant.B, plant.E
    r = g.cost.r if r is None else np.asarray(r, dtype=float).reshape(-1)
    h = B.T @ f_ss + B.T @ R @ E @ d_const
    fdot = g.M.T @ g.UpsilonPinv @ h - plant.A.T @ f_ss - g.P @ E @ d_const + g.Q @ r
    return float(np.linalg.norm(fdot))


def convolution_feedforward(g, d, r, horizon, step=DEFAULT_STEP):
    """``f`` on the grid from the explicit variation-of-constants formula.

    With the Riccati solution frozen at the GARE value ``P`` the feedforward
    equation is ``df/dt = -Abar f + F d + Q r``, hence

        f(t) = e^{Abar (T-t)} f_T - int_t^T e^{Abar (tau-t)} (F d_tau + Q r) dtau

    evaluated with the trapezoid rule on each interval (``d`` held per
    interval, so steps on grid nodes are integrated without smearing).
    """
    rt = constant_trajectory(g, horizon, step)
    forms = appendix_forms(g)
    _require_hurwitz(forms.Abar)
    grid, N = rt.grid, rt.N
    dt = rt.step
    r = np.asarray(r, dtype=float).reshape(-1)
    fT = -rt.cost.P_T @ r
    Phi1 = expm(forms.Abar * dt)
    Phi = np.empty((N + 1,) + Phi1.shape)
    Phi[0] = np.eye(Phi1.shape[0])
    for k in range(1, N + 1):
        Phi[k] = Phi[k - 1] @ Phi1
    src = d.on_intervals(grid) @ forms.F.T + g.Q @ r  # (N, n), held per interval
    # interval k = [t_k, t_{k+1}] seen from node i <= k: 0.5 dt (Phi[k-i] + Phi[k+1-i]) src_k
    pair = 0.5 * dt * (Phi[:-1] + Phi[1:])  # pair[j] for j = k - i
    f = np.empty((N + 1, g.P.shape[0]))
    for i in range(N + 1):
        acc = Phi[N - i] @ fT
        if i < N:
            acc = acc - np.einsum("jab,jb->a", pair[: N - i], src[i:])
        f[i] = acc
    return grid, f, rt


def convolution_cross_check(g, d, r, horizon, step=DEFAULT_STEP):
    """Max over the grid of ``||f_conv(t) - f_ode(t)||``."""
    grid, f_conv, rt = convolution_feedforward(g, d, r, horizon, step)
    ft = solve_feedforward(rt, d, r)
    return float(np.max(np.linalg.norm(f_conv - ft.f, axis=1)))


def write_feedforward_csv(ft, path):
    n, m = ft.f.shape[1], ft.h.shape[1]
    header = ["t"] + [f"f{i + 1}" for i in range(n)] + [f"h{i + 1}" for i in range(m)] + ["H"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(ft.grid):
            row = [t, *ft.f[k], *ft.h[k], ft.H[k]]
            w.writerow([repr(float(v)) for v in row])
