import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from mdrc.controller import (ControlLaw, GesobcGains, PidGains, make_finite_horizon_law,
                             make_gesobc_law, make_pid_law)
from mdrc.errors import DimensionMismatch, GridMismatch, NonFiniteState
from mdrc.feedforward import solve_feedforward
from mdrc.model import CostSpec, PlantModel, Signal
from mdrc.riccati import solve_grde
from mdrc.simulator import evaluate_cost, fbde_residuals, simulate, write_log_csv

from conftest import EXAMPLE_A, scalar_problem


def zero_law(plant):
    return make_gesobc_law(GesobcGains(np.zeros((plant.m, plant.n)), np.zeros((plant.m, plant.q))))


class Opaque(ControlLaw):
    """Wraps a law but hides its affine structure, forcing the generic loop."""

    def __init__(self, base):
        self.base = base
        self.kind = base.kind

    def __call__(self, t, x, d):
        return self.base(t, x, d)


def test_uncontrolled_first_mode_is_exponential():
    plant = PlantModel(**EXAMPLE_A)
    log = simulate(plant, zero_law(plant), Signal.zeros(1), [1.0, 1.0, 0.0], 2.0, 1e-3)
    assert np.max(np.abs(log.x[:, 0] - np.exp(-4 * log.grid))) <= 1e-9


def test_held_input_is_exact_under_zoh():
    # with u and d constant per step, RK4 on a linear system tracks the matrix exponential
    plant = PlantModel([[-1.0, 2.0], [0.0, -3.0]], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0])
    law = make_gesobc_law(GesobcGains([[0.0, 0.0]], [[1.0]]))
    d = Signal.constant([0.5])
    log = simulate(plant, law, d, [1.0, 0.0], 1.0, 1e-3)
    aug = np.zeros((4, 4))
    aug[:2, :2] = plant.A
    aug[:2, 2:3] = plant.B
    aug[:2, 3:4] = plant.E
    z = expm(aug * 1.0) @ np.array([1.0, 0.0, 0.5, 0.5])
    assert np.allclose(log.x[-1], z[:2], atol=1e-11)


def test_log_invariants(scalar):
    plant, cost = scalar
    rt = solve_grde(plant, cost, 1e-3)
    law = make_finite_horizon_law(rt, solve_feedforward(rt, Signal.zeros(1)))
    x0 = np.array([0.1234567890123])
    log = simulate(plant, law, Signal.zeros(1), x0, cost.T, 1e-3, cost)
    n = len(log.grid)
    assert all(len(a) == n for a in (log.x, log.u, log.d, log.y, log.running_cost))
    assert log.x[0, 0] == x0[0]
    assert np.all(np.diff(log.running_cost) >= 0)
    assert np.allclose(log.y, log.x @ plant.c_o.T)


def test_deterministic(plant_a, step_a):
    plant, cost = plant_a
    law = make_pid_law(PidGains(80, 400, 10), [0.0], plant, 1e-3)
    a = simulate(plant, law, step_a, [1, 1, 0], 1.0, 1e-3, cost)
    b = simulate(plant, law, step_a, [1, 1, 0], 1.0, 1e-3, cost)
    assert a.x.tobytes() == b.x.tobytes() and a.u.tobytes() == b.u.tobytes()


def test_affine_fast_path_matches_generic_loop(plant_a, step_a):
    plant, cost = plant_a
    rt = solve_grde(plant, cost, 1e-3)
    law = make_finite_horizon_law(rt, solve_feedforward(rt, step_a))
    fast = simulate(plant, law, step_a, [1, 1, 0], cost.T, 1e-3, cost)
    slow = simulate(plant, Opaque(law), step_a, [1, 1, 0], cost.T, 1e-3, cost)
    assert np.allclose(fast.x, slow.x, rtol=1e-12, atol=1e-12)
    assert np.allclose(fast.u, slow.u, rtol=1e-12, atol=1e-10)


def _refinement_ratio(plant, law_factory, d, x0, T):
    finals = [simulate(plant, law_factory(), d, x0, T, dt).x[-1] for dt in (4e-4, 2e-4, 1e-4)]
    return np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])


def test_step_refinement_order(plant_b):
    plant, _ = plant_b
    d = Signal.step(0.6, [0.0], [5.0])
    # sampled state feedback: O(dt^2) local hold error accumulates to first order
    fb = _refinement_ratio(plant, lambda: make_gesobc_law(GesobcGains([[-0.8, -0.5]], [[2.0]])),
                           d, [60.0, 0.0], 0.2)
    assert 1.8 < fb < 2.5
    # input independent of the state: the hold is exact and RK4 keeps its order
    ol = _refinement_ratio(plant, lambda: make_gesobc_law(GesobcGains([[0.0, 0.0]], [[2.0]])),
                           d, [60.0, 0.0], 0.05)
    assert ol > 3.5


def test_sampled_pid_is_refinement_stable():
    plant = PlantModel([[-1.0]], [[1.0]], [[0.0]], [[1.0]])
    law = make_pid_law(PidGains(2.0, 1.0, 0.0), [1.0], plant, 1e-3)
    a = simulate(plant, law, Signal.zeros(1), [0.0], 2.0, 1e-3).x[-1]
    law = make_pid_law(PidGains(2.0, 1.0, 0.0), [1.0], plant, 5e-4)
    b = simulate(plant, law, Signal.zeros(1), [0.0], 2.0, 5e-4).x[-1]
    assert abs(a - b) < 1e-3


def test_zero_cost_when_on_reference():
    plant = PlantModel([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    cost = CostSpec([[5.0]], [[1.0]], [[0.0]], 1.0, [2.0])
    law = make_gesobc_law(GesobcGains([[0.0]], [[-1.0]]))  # u = -d cancels the input
    log = simulate(plant, law, Signal.constant([0.7]), [2.0], 1.0, 1e-2, cost)
    rep = evaluate_cost(log, plant, cost)
    assert rep.J_sim == 0.0 and log.running_cost[-1] == 0.0


def test_cost_quadrature_against_closed_form():
    # x' = -x, x0 = 1: J = 1/2 q int e^{-2t} dt + 1/2 p_T e^{-2T}
    plant = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    cost = CostSpec([[2.0]], [[1.0]], [[3.0]], 1.0, [0.0])
    log = simulate(plant, zero_law(plant), Signal.zeros(1), [1.0], 1.0, 1e-3, cost)
    exact = 0.5 * 2.0 * (1 - np.exp(-2.0)) / 2 + 0.5 * 3.0 * np.exp(-2.0)
    assert abs(evaluate_cost(log, plant, cost).J_sim - exact) < 1e-6


def test_cost_gap_converges(scalar):
    plant, cost = scalar
    gaps = []
    for dt in (4e-3, 2e-3, 1e-3):
        rt = solve_grde(plant, cost, dt)
        ft = solve_feedforward(rt, Signal.constant([0.5]))
        log = simulate(plant, make_finite_horizon_law(rt, ft), Signal.constant([0.5]), [0.3],
                       cost.T, dt, cost)
        gaps.append(evaluate_cost(log, plant, cost, rt, ft).gap)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-2


def test_optimal_beats_baselines(plant_a, step_a):
    plant, cost = plant_a
    rt = solve_grde(plant, cost, 1e-3)
    opt = make_finite_horizon_law(rt, solve_feedforward(rt, step_a))
    J = evaluate_cost(simulate(plant, opt, step_a, [1, 1, 0], 2.0, 1e-3, cost), plant, cost).J_sim
    pid = make_pid_law(PidGains(80, 400, 10), [0.0], plant, 1e-3)
    Jp = evaluate_cost(simulate(plant, pid, step_a, [1, 1, 0], 2.0, 1e-3, cost), plant, cost).J_sim
    assert J < Jp


def test_fbde_zero_plant():
    z = [[0.0]]
    plant = PlantModel(z, z, z, [[1.0]])
    cost = CostSpec(z, [[1.0]], z, 1.0, [0.0])
    rt = solve_grde(plant, cost, 1e-2)
    ft = solve_feedforward(rt, Signal.zeros(1))
    log = simulate(plant, zero_law(plant), Signal.zeros(1), [0.0], 1.0, 1e-2, cost)
    rep = fbde_residuals(log, rt, ft, cost)
    assert (rep.stationarity_residual, rep.adjoint_ode_residual, rep.terminal_residual) == (0, 0, 0)


def test_fbde_detects_non_optimal(plant_a, step_a):
    plant, cost = plant_a
    rt = solve_grde(plant, cost, 1e-3)
    ft = solve_feedforward(rt, step_a)
    opt = simulate(plant, make_finite_horizon_law(rt, ft), step_a, [1, 1, 0], 2.0, 1e-3, cost)
    rep = fbde_residuals(opt, rt, ft, cost)
    assert rep.stationarity_residual <= 1e-9 and rep.terminal_residual <= 1e-9
    pid = make_pid_law(PidGains(80, 400, 10), [0.0], plant, 1e-3)
    bad = fbde_residuals(simulate(plant, pid, step_a, [1, 1, 0], 2.0, 1e-3, cost), rt, ft, cost)
    assert bad.stationarity_residual > 0.1


def test_fbde_adjoint_residual_is_first_order_under_sampling(scalar):
    plant, cost = scalar
    res = []
    for dt in (2e-3, 1e-3):
        rt = solve_grde(plant, cost, dt)
        ft = solve_feedforward(rt, Signal.zeros(1))
        log = simulate(plant, make_finite_horizon_law(rt, ft), Signal.zeros(1), [0.0], cost.T,
                       dt, cost)
        res.append(fbde_residuals(log, rt, ft, cost).adjoint_ode_residual)
    assert 1.8 < res[0] / res[1] < 2.2


def test_fbde_grid_mismatch(scalar):
    plant, cost = scalar
    rt = solve_grde(plant, cost, 1e-2)
    ft = solve_feedforward(rt, Signal.zeros(1))
    log = simulate(plant, zero_law(plant), Signal.zeros(1), [0.0], cost.T, 2e-2, cost)
    with pytest.raises(GridMismatch):
        fbde_residuals(log, rt, ft, cost)


def test_divergence_raises_with_partial_log():
    plant = PlantModel([[50.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(NonFiniteState) as info:
        simulate(plant, zero_law(plant), Signal.zeros(1), [1.0], 100.0, 1e-2)
    log = info.value.log
    assert log.x[0, 0] == 1.0 and not np.isfinite(log.x[-1]).all()
    # the generic loop reports divergence too
    with pytest.raises(NonFiniteState):
        simulate(plant, Opaque(zero_law(plant)), Signal.zeros(1), [1.0], 100.0, 1e-2)


def test_input_validation(plant_a):
    plant, _ = plant_a
    with pytest.raises(DimensionMismatch):
        simulate(plant, zero_law(plant), Signal.zeros(1), [1.0, 0.0], 1.0, 1e-2)
    with pytest.raises(DimensionMismatch):
        simulate(plant, zero_law(plant), Signal.zeros(2), [1, 1, 0], 1.0, 1e-2)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(0.1, 5))
def test_running_cost_monotone(x0, dval, kp):
    plant, cost = scalar_problem(T=1.0)
    law = make_pid_law(PidGains(kp, 0.5, 0.0), [1.0], plant, 1e-2)
    log = simulate(plant, law, Signal.constant([dval]), [x0], 1.0, 1e-2, cost)
    assert np.all(np.diff(log.running_cost) >= 0)


def test_csv_export(tmp_path, plant_b):
    plant, cost = plant_b
    log = simulate(plant, zero_law(plant), Signal.zeros(1), [1.0, 0.0], 0.01, 1e-3, cost)
    path = tmp_path / "log.csv"
    write_log_csv(log, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x1", "x2", "u1", "d1", "y1", "running_cost"]
    assert len(rows) == 12
    assert float(rows[-1][-1]) == log.running_cost[-1]
