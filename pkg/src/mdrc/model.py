"""Plants, signals and cost weights for the disturbance-rejection tracking problem.

The plant is ``x' = A x + B u + E d`` and the cost is

    J = 1/2 int_0^T (x-r)'Q(x-r) + (Bu+Ed)'R(Bu+Ed) dt + 1/2 (x_T-r)'P_T(x_T-r)

with ``Q = c_o' Qbar c_o``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NonpositiveHorizon, NotPSD, StepInvalid
from .linalg import is_psd, pinv, rank, symmetrize

#: Breakpoints closer than this (relative) to an evaluation time count as reached.
TIME_SNAP = 1e-9


def _mat(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got ndim={a.ndim}")
    a.setflags(write=False)
    return a


def _vec(v, name):
    v = np.array(v, dtype=float).reshape(-1)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Coefficient matrices of ``x' = A x + B u + E d`` and the regulated-output map ``c_o``.

    One-dimensional inputs for ``B`` and ``E`` are read as column vectors; for
    ``c_o`` as a single row.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    c_o: np.ndarray

    def __post_init__(self):
        A = _mat(self.A, "A")
        B = _mat(self.B, "B")
        E = _mat(self.E, "E")
        c_o = np.array(self.c_o, dtype=float)
        c_o = _mat(c_o.reshape(1, -1) if c_o.ndim <= 1 else c_o, "c_o")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "c_o", c_o)
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise DimensionMismatch(f"A must be square and non-empty, got {A.shape}")
        for name, M, axis in (("B", B, 0), ("E", E, 0), ("c_o", c_o, 1)):
            if M.shape[axis] != n or min(M.shape) < 1:
                raise DimensionMismatch(f"{name} has shape {M.shape}, incompatible with n={n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.E.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.c_o.shape[0]


class Signal:
    """Piecewise-constant (zero-order-hold) signal on ``[0, inf)``.

    ``values[i]`` holds on ``[times[i], times[i+1])``; the last value holds
    forever and is the signal's limit (``tail``). Before ``times[0]`` the
    first value applies.
    """

    def __init__(self, times, values):
        times = np.array(times, dtype=float).reshape(-1)
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(len(times), -1) if len(times) else values.reshape(0, -1)
        if len(times) == 0 or values.shape[0] != len(times):
            raise DimensionMismatch("Signal needs one value per sample time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Signal sample times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        self.times = times
        self.values = values

    @classmethod
    def constant(cls, value):
        return cls([0.0], [np.atleast_1d(np.asarray(value, dtype=float))])

    @classmethod
    def zeros(cls, q):
        return cls.constant(np.zeros(q))

    @classmethod
    def step(cls, t_step, before, after):
        before = np.atleast_1d(np.asarray(before, dtype=float))
        after = np.atleast_1d(np.asarray(after, dtype=float))
        if t_step <= 0:
            return cls.constant(after)
        return cls([0.0, t_step], [before, after])

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def tail(self):
        return self.values[-1]

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        snapped = t + TIME_SNAP * np.maximum(1.0, np.abs(t))
        idx = np.clip(np.searchsorted(self.times, snapped, side="right") - 1, 0, None)
        return self.values[idx]

    def on_intervals(self, grid):
        """Value held on each ``[grid[i], grid[i+1])``, shape ``(len(grid)-1, q)``."""
        grid = np.asarray(grid, dtype=float)
        return np.ascontiguousarray(self(0.5 * (grid[:-1] + grid[1:])))

    def shifted(self, offset):
        """Signal ``s -> self(s + offset)``."""
        times = self.times - offset
        keep = times > 0
        first = self(offset)
        return Signal(np.r_[0.0, times[keep]], np.vstack([first[None, :], self.values[keep]]))

    def __repr__(self):
        return f"Signal(times={self.times.tolist()}, values={self.values.tolist()})"


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Weights of the tracking cost.

    ``R`` and ``P_T`` are n x n (they weight ``Bu + Ed`` and the terminal
    state); ``Qbar`` is l x l and weights the regulated output.
    """

    Qbar: np.ndarray
    R: np.ndarray
    P_T: np.ndarray
    T: float
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Qbar", _mat(self.Qbar, "Qbar"))
        object.__setattr__(self, "R", _mat(self.R, "R"))
        object.__setattr__(self, "P_T", _mat(self.P_T, "P_T"))
        object.__setattr__(self, "r", _vec(self.r, "r"))
        object.__setattr__(self, "T", float(self.T))

    def with_horizon(self, T, P_T=None):
        return CostSpec(self.Qbar, self.R, self.P_T if P_T is None else P_T, T, self.r)


class DisturbanceKind(str, Enum):
    MATCHED = "matched"
    MISMATCHED = "mismatched"


@dataclass(frozen=True)
class DisturbanceClassification:
    kind: DisturbanceKind
    gamma: np.ndarray | None
    rank_B: int
    rank_BE: int
    residual: float = field(default=0.0)


MATCH_TOL = 1e-9


def validate_system(plant, cost):
    """Check shapes and weights; returns ``(plant, cost)`` unchanged."""
    n, l = plant.n, plant.l
    expected = {"Qbar": (l, l), "R": (n, n), "P_T": (n, n)}
    for name, shape in expected.items():
        got = getattr(cost, name).shape
        if got != shape:
            raise DimensionMismatch(f"{name} has shape {got}, expected {shape}")
    if cost.r.shape != (n,):
        raise DimensionMismatch(f"reference r has shape {cost.r.shape}, expected ({n},)")
    for name in expected:
        if not is_psd(getattr(cost, name)):
            raise NotPSD(f"{name} is not symmetric positive semi-definite")
    if not cost.T > 0:
        raise NonpositiveHorizon(f"horizon T must be positive, got {cost.T}")
    return plant, cost


def classify_disturbance(plant):
    """Matched iff some ``Gamma`` satisfies ``B Gamma = E`` (least-squares residual <= 1e-9)."""
    B, E = plant.B, plant.E
    gamma = pinv(B) @ E
    resid = float(np.linalg.norm(B @ gamma - E, 2))
    rank_B = rank(B)
    rank_BE = rank(np.hstack([B, E]))
    # the rank test is the primary criterion; the residual guards badly scaled inputs
    matched = rank_BE == rank_B and resid <= MATCH_TOL * max(1.0, np.linalg.norm(E, 2))
    if matched:
        return DisturbanceClassification(DisturbanceKind.MATCHED, gamma, rank_B, rank_BE, resid)
    return DisturbanceClassification(DisturbanceKind.MISMATCHED, None, rank_B, rank_BE, resid)


def assemble_Q(plant, cost):
    return symmetrize(plant.c_o.T @ cost.Qbar @ plant.c_o)


def lift_reference(plant, target):
    """State reference ``r = c_o^+ y*`` for a regulated-output target ``y*``."""
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if target.shape != (plant.l,):
        raise DimensionMismatch(f"target has shape {target.shape}, expected ({plant.l},)")
    return pinv(plant.c_o) @ target


def uniform_grid(T, step):
    """Grid ``0, step, ..., T``; raises if ``step`` does not divide ``T``."""
    if not (step > 0 and np.isfinite(step)):
        raise StepInvalid(f"step must be positive, got {step}")
    ratio = T / step
    N = int(round(ratio))
    if N < 1 or abs(ratio - N) > 1e-9 * max(1.0, ratio):
        raise StepInvalid(f"step {step} does not divide horizon {T}")
    return np.linspace(0.0, T, N + 1), N


def interp_nodes(grid, values, t):
    """Linear interpolation of node values on a uniform grid, constant outside it."""
    N = len(grid) - 1
    if t <= grid[0]:
        return values[0]
    if t >= grid[-1]:
        return values[-1]
    dt = grid[1] - grid[0]
    pos = (t - grid[0]) / dt
    i = min(int(pos), N - 1)
    w = pos - i
    if w <= 1e-12:
        return values[i]
    if w >= 1.0 - 1e-12:
        return values[i + 1]
    return (1.0 - w) * values[i] + w * values[i + 1]
