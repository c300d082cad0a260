"""Reusable numerical checks shared by ``verify`` and the test-suite."""

from dataclasses import dataclass

import numpy as np

from ..controller import PerturbedLaw, make_finite_horizon_law
from ..feedforward import solve_feedforward
from ..oracle import DiscreteTrackingProblem, solve_discrete_dp
from ..riccati import solve_grde
from ..simulator import evaluate_cost, simulate


def scalar_riccati(a, b, q, r_w, p_T, s):
    """Closed-form scalar Riccati solution at time-to-go ``s``.

    Solves ``dP/ds = q + 2aP - P^2 / r_w`` (``B'RB = b^2 r_w``, so the
    quadratic coefficient is ``b^2 / (b^2 r_w)``) from ``P(0) = p_T``.
    """
    beta = np.sqrt(a * a + q / r_w)
    p1, p2 = r_w * (a + beta), r_w * (a - beta)
    decay = np.exp(-2.0 * beta * np.asarray(s, dtype=float))
    return (p1 * (p_T - p2) - p2 * (p_T - p1) * decay) / ((p_T - p2) - (p_T - p1) * decay)


def smooth_perturbation(rng, m, terms=2):
    """Random sum of sinusoids ``R -> R^m`` with per-term amplitude in ``[0.5, 2]``."""
    amp = rng.uniform(0.5, 2.0, (terms, m)) * rng.choice([-1.0, 1.0], (terms, m))
    omega = rng.uniform(0.5, 5.0, (terms, m))
    phase = rng.uniform(0.0, 2 * np.pi, (terms, m))

    def delta(t):
        return np.sum(amp * np.sin(omega * t + phase), axis=0)

    return delta


@dataclass(frozen=True)
class SquaresTrial:
    increase: float  # J(u* + du) - J(u*)
    quadratic: float  # 1/2 int du'U du
    rel_error: float


def completion_of_squares(plant, cost, d, x0, step, rng, samples):
    """Cost increase under random smooth perturbations of the optimal law."""
    rt = solve_grde(plant, cost, step)
    ft = solve_feedforward(rt, d)
    law = make_finite_horizon_law(rt, ft)
    J0 = evaluate_cost(simulate(plant, law, d, x0, cost.T, step, cost), plant, cost).J_sim
    trials = []
    for _ in range(samples):
        delta = smooth_perturbation(rng, plant.m)
        log = simulate(plant, PerturbedLaw(law, delta), d, x0, cost.T, step, cost)
        J1 = evaluate_cost(log, plant, cost).J_sim
        du = np.array([delta(t) for t in log.grid[:-1]])
        quad = 0.5 * log.step * float(np.einsum("ti,ij,tj->", du, rt.Upsilon, du))
        inc = J1 - J0
        trials.append(SquaresTrial(inc, quad, abs(inc - quad) / quad))
    return trials


@dataclass(frozen=True)
class OracleComparison:
    steps: tuple
    J_formula: tuple
    J_d: tuple
    gaps: tuple  # |J_d - J_formula| / |J_formula|

    @property
    def ratio(self):
        return self.gaps[0] / self.gaps[1] if self.gaps[1] > 0 else np.inf


def oracle_comparison(plant, cost, d, x0, step):
    """Discrete DP cost against the continuous value formula at ``step`` and ``step / 2``."""
    steps, Jf, Jd, gaps = [], [], [], []
    for dt in (step, step / 2):
        rt = solve_grde(plant, cost, dt)
        ft = solve_feedforward(rt, d)
        x0v = np.asarray(x0, dtype=float)
        J_formula = float(0.5 * x0v @ rt.P[0] @ x0v + x0v @ ft.f[0] + ft.H[0])
        sol = solve_discrete_dp(DiscreteTrackingProblem.from_continuous(plant, cost, d, x0, dt))
        steps.append(dt)
        Jf.append(J_formula)
        Jd.append(sol.J_d)
        gaps.append(abs(sol.J_d - J_formula) / max(abs(J_formula), 1e-300))
    return OracleComparison(tuple(steps), tuple(Jf), tuple(Jd), tuple(gaps))
