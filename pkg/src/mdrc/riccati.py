"""Generalized Riccati differential and algebraic equations.

The finite-horizon solution integrates, backward from ``P_T``,

    dP/dt = M' U^+ M - P A - A'P - Q,   M = B'P,   U = B'RB,

with classical fixed-step RK4. The infinite-horizon solution is the
stationary limit of the same flow started from ``P = 0``.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import NoConvergence, RegularConditionViolated
from .linalg import pinv, psd_sqrt, symmetrize
from .model import assemble_Q, interp_nodes, uniform_grid, validate_system

DEFAULT_STEP = 1e-3
REGULAR_TOL = 1e-9
STATIONARY_TOL = 1e-10
HORIZON_CAP = 1e4


@dataclass(frozen=True, eq=False)
class RiccatiTrajectory:
    plant: object
    cost: object
    Q: np.ndarray
    grid: np.ndarray
    P: np.ndarray  # (N+1, n, n)
    M: np.ndarray  # (N+1, m, n)
    Upsilon: np.ndarray
    UpsilonPinv: np.ndarray

    @property
    def step(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def N(self):
        return len(self.grid) - 1

    @property
    def P0(self):
        return self.P[0]

    def interp(self, t):
        """Linearly interpolated ``(P(t), M(t))``; constant outside the grid."""
        return interp_nodes(self.grid, self.P, t), interp_nodes(self.grid, self.M, t)


@dataclass(frozen=True, eq=False)
class GareSolution:
    plant: object
    cost: object
    Q: np.ndarray
    P: np.ndarray
    M: np.ndarray
    Upsilon: np.ndarray
    UpsilonPinv: np.ndarray
    A_cl: np.ndarray
    residual: float
    steps: int
    rate: float

    @property
    def K(self):
        """State-feedback gain ``U^+ M`` of the law ``u = -K x - U^+ h``."""
        return self.UpsilonPinv @ self.M


class RegularityCheck(NamedTuple):
    passed: bool
    defect: float


class DetectabilityReport(NamedTuple):
    passed: bool
    offending: list


def _weights(plant, cost):
    Q = assemble_Q(plant, cost)
    Upsilon = symmetrize(plant.B.T @ cost.R @ plant.B)
    Upinv = symmetrize(pinv(Upsilon))
    G = symmetrize(plant.B @ Upinv @ plant.B.T)
    return Q, Upsilon, Upinv, G


def check_regular_condition(Upsilon, M, tol=REGULAR_TOL):
    """``U U^+ M = M`` within ``tol`` (spectral norm); ``M`` may be a stack."""
    Upsilon = np.atleast_2d(np.asarray(Upsilon, dtype=float))
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(Upsilon.shape[0], -1)
    proj = Upsilon @ pinv(Upsilon)
    diff = proj @ M - M
    if diff.ndim == 3:
        defect = float(np.max(np.linalg.norm(diff, ord=2, axis=(1, 2)))) if len(diff) else 0.0
    else:
        defect = float(np.linalg.norm(diff, 2))
    return RegularityCheck(defect <= tol, defect)


def solve_grde(plant, cost, step=DEFAULT_STEP):
    """Backward RK4 solution of the generalized Riccati differential equation.

    Raises
    ------
    StepInvalid
        ``step`` does not divide ``cost.T``.
    RegularConditionViolated
        ``U U^+ M_t != M_t`` at some node.
    """
    validate_system(plant, cost)
    grid, N = uniform_grid(cost.T, step)
    dt = grid[1] - grid[0]
    Q, Upsilon, Upinv, G = _weights(plant, cost)
    P = kernels.grde_backward(plant.A, Q, G, cost.P_T, dt, N)
    P[N] = cost.P_T
    M = np.einsum("ji,tjk->tik", plant.B, P)
    _require_regular(Upsilon, Upinv, M)
    for arr in (P, M):
        arr.setflags(write=False)
    return RiccatiTrajectory(plant, cost, Q, grid, P, M, Upsilon, Upinv)


def _require_regular(Upsilon, Upinv, M):
    diff = np.einsum("ij,tjk->tik", Upsilon @ Upinv, M) - M
    defects = np.linalg.norm(diff, ord=2, axis=(1, 2))
    worst = int(np.argmax(defects))
    if defects[worst] > REGULAR_TOL:
        raise RegularConditionViolated(
            f"regular condition fails at node {worst}: defect {defects[worst]:.3e}",
            defect=float(defects[worst]), index=worst)


def constant_trajectory(g, T, step=DEFAULT_STEP):
    """Riccati trajectory frozen at a GARE solution (terminal weight ``P_T = P``)."""
    grid, N = uniform_grid(T, step)
    P = np.broadcast_to(g.P, (N + 1,) + g.P.shape).copy()
    M = np.broadcast_to(g.M, (N + 1,) + g.M.shape).copy()
    cost = g.cost.with_horizon(T, P_T=g.P)
    return RiccatiTrajectory(g.plant, cost, g.Q, grid, P, M, g.Upsilon, g.UpsilonPinv)


def gare_residual(A, Q, Upinv, B, P):
    M = B.T @ P
    return float(np.linalg.norm(P @ A + A.T @ P + Q - M.T @ Upinv @ M, 2))


def solve_gare(plant, cost, step=DEFAULT_STEP, tol=STATIONARY_TOL, horizon_cap=HORIZON_CAP,
               require_stabilizing=True):
    """Stationary limit of the Riccati flow started from ``P = 0``.

    Iterates until ``||P(t) - P(t + step)||_F / step <= tol``. With
    ``require_stabilizing`` a stationary point whose closed loop
    ``A - B U^+ M`` has an eigenvalue with non-negative real part is reported
    as :class:`NoConvergence`: the limit exists but is not the stabilizing
    solution, so the regulator premise fails.
    """
    validate_system(plant, cost)
    Q, Upsilon, Upinv, G = _weights(plant, cost)
    max_steps = int(np.ceil(horizon_cap / step))
    P, steps, rate = kernels.grde_stationary(plant.A, Q, G, np.zeros_like(plant.A), step, tol,
                                             max_steps)
    if not np.isfinite(rate) or rate > tol:
        raise NoConvergence(
            f"Riccati flow not stationary after {steps * step:g} time units (rate {rate:.3e})")
    P = symmetrize(P)
    M = plant.B.T @ P
    chk = check_regular_condition(Upsilon, M)
    if not chk.passed:
        raise RegularConditionViolated(f"GARE solution violates regular condition "
                                       f"(defect {chk.defect:.3e})", defect=chk.defect)
    A_cl = plant.A - plant.B @ Upinv @ M
    if require_stabilizing:
        eig = np.linalg.eigvals(A_cl)
        if np.max(eig.real) >= 0:
            raise NoConvergence(
                "Riccati flow reached a non-stabilizing stationary point "
                f"(closed-loop eigenvalue {eig[np.argmax(eig.real)]:.6g})")
    res = gare_residual(plant.A, Q, Upinv, plant.B, P)
    return GareSolution(plant, cost, Q, P, M, Upsilon, Upinv, A_cl, res, steps, float(rate))


def check_detectability(plant, Q, rtol=1e-12):
    """Hautus test on ``(A, Q^{1/2})``.

    Every eigenvalue ``lam`` of ``A`` with ``Re lam >= 0`` must give
    ``rank([A - lam I; Q^{1/2}]) = n``; the rank threshold is
    ``sigma_max * n * rtol``.
    """
    A = plant.A
    n = A.shape[0]
    Qh = psd_sqrt(Q)
    offending = []
    for lam in np.linalg.eigvals(A):
        if lam.real < -1e-12 * max(1.0, abs(lam)):
            continue
        H = np.vstack([A - lam * np.eye(n), Qh.astype(complex)])
        s = np.linalg.svd(H, compute_uv=False)
        r = int(np.sum(s > s[0] * n * rtol)) if s[0] > 0 else 0
        if r < n:
            offending.append(complex(lam) if abs(lam.imag) > 0 else float(lam.real))
    return DetectabilityReport(not offending, offending)


def closed_loop_spectrum(g):
    eig = np.linalg.eigvals(g.A_cl)
    order = np.lexsort((-eig.imag, -eig.real))
    return [complex(e) for e in eig[order]]


def grde_fd_residual(rt):
    """Max of ``||P'(t_i) - rhs(P(t_i))|| / max(1, ||Q||)`` over interior nodes.

    ``P'`` uses five-point (fourth-order) central differences, so the check
    is limited by the trajectory's own accuracy rather than by the stencil.
    Scaling by ``||Q||`` makes the figure comparable across weightings.
    """
    P, dt = rt.P, rt.step
    A, B, Q, Ui = rt.plant.A, rt.plant.B, rt.Q, rt.UpsilonPinv
    if rt.N < 4:
        return 0.0
    dP = (P[:-4] - 8 * P[1:-3] + 8 * P[3:-1] - P[4:]) / (12 * dt)
    Pi = P[2:-2]
    Mi = np.einsum("ji,tjk->tik", B, Pi)
    rhs = np.einsum("tji,jk,tkl->til", Mi, Ui, Mi) - Pi @ A - np.swapaxes(Pi @ A, 1, 2) - Q
    scale = max(1.0, float(np.linalg.norm(Q, 2)))
    return float(np.max(np.linalg.norm(dP - rhs, ord=2, axis=(1, 2)))) / scale


def write_riccati_csv(rt, path):
    """CSV with header ``t, P_11, P_12, ...`` (row-major ``vec(P_t)``)."""
    n = rt.P.shape[1]
    header = ["t"] + [f"P_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, P in zip(rt.grid, rt.P):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in P.ravel()])
