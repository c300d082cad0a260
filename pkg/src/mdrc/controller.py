"""Control laws behind one interface: ``u = law(t, x, d)``.

Affine, memoryless laws (``u = -K(t) x - k(t, d)``) also expose
:meth:`ControlLaw.affine_gains`, which lets the simulator run them through
the compiled kernel instead of calling back into Python every step.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NotScalarOutput, RegularConditionViolated, UpsilonSingular
from .linalg import symmetrize
from .model import Signal, interp_nodes, uniform_grid
from .feedforward import solve_feedforward
from .riccati import DEFAULT_STEP, _weights, check_regular_condition, solve_grde

UPSILON_PD_TOL = 1e-10


class LawKind(str, Enum):
    FINITE_HORIZON = "finite_horizon"
    PSEUDO_INVERSE = "pseudo_inverse"
    INFINITE_HORIZON = "infinite_horizon"
    RECEDING_HORIZON = "receding_horizon"
    PID = "pid"
    GESOBC = "gesobc"
    PERTURBED = "perturbed"


@dataclass(frozen=True)
class PidGains:
    K_p: float
    K_i: float
    K_d: float

    def __post_init__(self):
        if not all(np.isfinite([self.K_p, self.K_i, self.K_d])):
            raise ValueError("PID gains must be finite")


@dataclass(frozen=True, eq=False)
class GesobcGains:
    K_x: np.ndarray
    K_d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K_x", np.atleast_2d(np.asarray(self.K_x, dtype=float)))
        object.__setattr__(self, "K_d", np.atleast_2d(np.asarray(self.K_d, dtype=float)))


class ControlLaw:
    """Base class. Subclasses implement ``__call__`` and optionally ``affine_gains``."""

    kind: LawKind
    stateless = True

    def __call__(self, t, x, d):
        raise NotImplementedError

    def reset(self):
        """Clear internal state before a new simulation."""

    def affine_gains(self, t, d):
        """``(K, k)`` with ``u = -K x - k`` at time ``t``, or ``None`` if not affine."""
        return None

    def affine_schedule(self, grid, d_nodes):
        """Stacked ``(K, k)`` on a grid, or ``None`` when the law is not affine."""
        first = self.affine_gains(grid[0], d_nodes[0])
        if first is None:
            return None
        K = np.empty((len(grid),) + first[0].shape)
        k = np.empty((len(grid),) + first[1].shape)
        for i, (t, d) in enumerate(zip(grid, d_nodes)):
            K[i], k[i] = self.affine_gains(t, d)
        return K, k


def _min_eig(U):
    return float(np.linalg.eigvalsh(symmetrize(U)).min())


class _TrajectoryLaw(ControlLaw):
    """``u = -G (M_t x + h_t)`` with ``h_t = B'f_t + B'R E d_t`` from the measured ``d``."""

    def __init__(self, rt, ft, gain, kind):
        if ft.f.shape[0] != len(rt.grid):
            raise DimensionMismatch("Riccati and feedforward trajectories use different grids")
        self.rt, self.ft = rt, ft
        self.kind = kind
        self._gain = gain
        self._BRE = rt.plant.B.T @ rt.cost.R @ rt.plant.E
        self._K = np.einsum("ij,tjk->tik", gain, rt.M)
        self._Bt = rt.plant.B.T

    def affine_gains(self, t, d):
        K = interp_nodes(self.rt.grid, self._K, t)
        f = interp_nodes(self.rt.grid, self.ft.f, t)
        h = self._Bt @ f + self._BRE @ np.asarray(d, dtype=float)
        return K, self._gain @ h

    def affine_schedule(self, grid, d_nodes):
        if len(grid) == len(self.rt.grid) and np.allclose(grid, self.rt.grid, rtol=0, atol=1e-12):
            h = self.ft.f @ self._Bt.T + np.asarray(d_nodes) @ self._BRE.T
            return self._K.copy(), h @ self._gain.T
        return super().affine_schedule(grid, d_nodes)

    def __call__(self, t, x, d):
        K, k = self.affine_gains(t, d)
        return -K @ np.asarray(x, dtype=float) - k


def make_finite_horizon_law(rt, ft):
    """``u = -U^{-1} M_t x - U^{-1} h_t``; requires ``U = B'RB`` positive definite."""
    if _min_eig(rt.Upsilon) < UPSILON_PD_TOL:
        raise UpsilonSingular(
            f"B'RB is not positive definite (min eigenvalue {_min_eig(rt.Upsilon):.3e})")
    return _TrajectoryLaw(rt, ft, np.linalg.inv(rt.Upsilon), LawKind.FINITE_HORIZON)


def make_pseudo_inverse_law(rt, ft):
    """``u = -U^+ M_t x - U^+ h_t``; requires ``U U^+ M_t = M_t`` at every node."""
    chk = check_regular_condition(rt.Upsilon, rt.M)
    if not chk.passed:
        raise RegularConditionViolated(f"regular condition defect {chk.defect:.3e}",
                                       defect=chk.defect)
    return _TrajectoryLaw(rt, ft, rt.UpsilonPinv, LawKind.PSEUDO_INVERSE)


class InfiniteHorizonLaw(ControlLaw):
    kind = LawKind.INFINITE_HORIZON

    def __init__(self, g, f_ss, h_ss):
        self.g = g
        self.K = g.UpsilonPinv @ g.M
        self.k = g.UpsilonPinv @ np.atleast_1d(np.asarray(h_ss, dtype=float))
        self.f_ss = np.asarray(f_ss, dtype=float)

    def affine_gains(self, t, d):
        return self.K, self.k

    def __call__(self, t, x, d):
        return -self.K @ np.asarray(x, dtype=float) - self.k

    def equilibrium(self, d_const):
        """Closed-loop rest point ``0 = A_cl x - B k + E d``."""
        p = self.g.plant
        rhs = p.B @ self.k - p.E @ np.atleast_1d(np.asarray(d_const, dtype=float))
        return np.linalg.solve(self.g.A_cl, rhs)


def make_infinite_horizon_law(g, f_ss, h_ss):
    return InfiniteHorizonLaw(g, f_ss, h_ss)


class RecedingHorizonLaw(ControlLaw):
    """Re-plans on ``[t, t + tau]`` with ``d`` frozen at the measured ``d_t``.

    The plant is time invariant, so the window's Riccati solution is the same
    at every control instant and is solved once. The window feedforward is
    affine in ``d``; it is solved per distinct measured value and cached.
    """

    kind = LawKind.RECEDING_HORIZON

    def __init__(self, plant, cost, tau, inner_step=DEFAULT_STEP):
        if not tau > 0:
            raise ValueError(f"window length must be positive, got {tau}")
        uniform_grid(tau, inner_step)
        _, Upsilon, _, _ = _weights(plant, cost)
        if _min_eig(Upsilon) < UPSILON_PD_TOL:
            raise UpsilonSingular("B'RB is not positive definite")
        self.plant, self.tau, self.inner_step = plant, float(tau), float(inner_step)
        self.window_cost = cost.with_horizon(tau)
        self._window = solve_grde(plant, self.window_cost, inner_step)
        self._Uinv = np.linalg.inv(self._window.Upsilon)
        self.K = self._Uinv @ self._window.M[0]
        self._cache = {}

    @property
    def window(self):
        return self._window

    def window_feedforward(self, d):
        d = np.atleast_1d(np.asarray(d, dtype=float))
        key = d.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = solve_feedforward(self._window, Signal.constant(d))
            self._cache[key] = hit
        return hit

    def affine_gains(self, t, d):
        ft = self.window_feedforward(d)
        return self.K, self._Uinv @ ft.h[0]

    def __call__(self, t, x, d):
        K, k = self.affine_gains(t, d)
        return -K @ np.asarray(x, dtype=float) - k


def make_receding_horizon_law(plant, cost, tau, inner_step=DEFAULT_STEP):
    return RecedingHorizonLaw(plant, cost, tau, inner_step)


class PidLaw(ControlLaw):
    """Discrete PID on the regulated-output error ``e = y* - c_o x``.

    Trapezoidal integral and backward-difference derivative at the sample
    time; on the first sample the integral is ``dt/2 * e_0`` and the
    derivative term is zero.
    """

    kind = LawKind.PID
    stateless = False

    def __init__(self, gains, target, c_o, sample_time, m=1):
        c_o = np.atleast_2d(np.asarray(c_o, dtype=float))
        if c_o.shape[0] != 1:
            raise NotScalarOutput(f"PID needs a scalar regulated output, got l={c_o.shape[0]}")
        if m != 1:
            raise DimensionMismatch(f"PID drives a single input, plant has m={m}")
        self.gains = gains
        self.target = float(np.atleast_1d(target)[0])
        self.c_o = c_o[0]
        self.dt = float(sample_time)
        self.reset()

    def reset(self):
        self._integral = 0.0
        self._prev = None

    def __call__(self, t, x, d):
        e = self.target - float(self.c_o @ np.asarray(x, dtype=float))
        if self._prev is None:
            self._integral = 0.5 * self.dt * e
            deriv = 0.0
        else:
            self._integral += 0.5 * self.dt * (e + self._prev)
            deriv = (e - self._prev) / self.dt
        self._prev = e
        g = self.gains
        return np.array([g.K_p * e + g.K_i * self._integral + g.K_d * deriv])


def make_pid_law(gains, target, plant, sample_time):
    return PidLaw(gains, target, plant.c_o, sample_time, m=plant.m)


class GesobcLaw(ControlLaw):
    """``u = K_x x + K_d d`` with the disturbance read directly (no observer)."""

    kind = LawKind.GESOBC

    def __init__(self, gains, plant=None):
        if plant is not None:
            if gains.K_x.shape != (plant.m, plant.n) or gains.K_d.shape != (plant.m, plant.q):
                raise DimensionMismatch(
                    f"GESOBC gains {gains.K_x.shape}/{gains.K_d.shape} do not fit "
                    f"m={plant.m}, n={plant.n}, q={plant.q}")
        self.gains = gains

    def affine_gains(self, t, d):
        return -self.gains.K_x, -self.gains.K_d @ np.atleast_1d(np.asarray(d, dtype=float))

    def __call__(self, t, x, d):
        return self.gains.K_x @ np.asarray(x, dtype=float) + self.gains.K_d @ np.atleast_1d(d)


def make_gesobc_law(gains, plant=None):
    return GesobcLaw(gains, plant)


class PerturbedLaw(ControlLaw):
    """``u = base(t, x, d) + delta(t)``: an open-loop additive perturbation."""

    kind = LawKind.PERTURBED

    def __init__(self, base, delta):
        self.base, self.delta = base, delta
        self.stateless = base.stateless

    def reset(self):
        self.base.reset()

    def affine_gains(self, t, d):
        kk = self.base.affine_gains(t, d)
        if kk is None:
            return None
        return kk[0], kk[1] - np.atleast_1d(self.delta(t))

    def affine_schedule(self, grid, d_nodes):
        sched = self.base.affine_schedule(grid, d_nodes)
        if sched is None:
            return None
        K, k = sched
        du = np.array([np.atleast_1d(self.delta(t)) for t in grid]).reshape(k.shape)
        return K, k - du

    def __call__(self, t, x, d):
        return self.base(t, x, d) + np.atleast_1d(self.delta(t))


__all__ = [
    "ControlLaw", "LawKind", "PidGains", "GesobcGains", "PerturbedLaw",
    "make_finite_horizon_law", "make_pseudo_inverse_law", "make_infinite_horizon_law",
    "make_receding_horizon_law", "make_pid_law", "make_gesobc_law",
]
