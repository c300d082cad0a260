import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdrc.errors import DimensionMismatch, NonpositiveHorizon, NotPSD, StepInvalid
from mdrc.model import (CostSpec, DisturbanceKind, PlantModel, Signal, assemble_Q,
                        classify_disturbance, interp_nodes, lift_reference, uniform_grid,
                        validate_system)

from conftest import EXAMPLE_A, EXAMPLE_B


def test_vectors_are_coerced():
    p = PlantModel(**EXAMPLE_A)
    assert (p.n, p.m, p.q, p.l) == (3, 1, 1, 1)
    assert p.B.shape == (3, 1) and p.c_o.shape == (1, 3)


def test_plant_is_read_only():
    p = PlantModel(**EXAMPLE_A)
    with pytest.raises(ValueError):
        p.A[0, 0] = 1.0


def test_inconsistent_shapes():
    with pytest.raises(DimensionMismatch):
        PlantModel(np.eye(3), [1.0, 0.0], [0.0, 0.0, 1.0], [0, 0, 1])
    with pytest.raises(DimensionMismatch):
        PlantModel(np.ones((2, 3)), [1.0, 0.0], [0.0, 1.0], [1, 0])


def test_validate_accepts_examples(plant_a, plant_b):
    validate_system(*plant_a)
    validate_system(*plant_b)


def test_validate_rejects_bad_weights():
    p = PlantModel(**EXAMPLE_B)
    with pytest.raises(DimensionMismatch):
        validate_system(p, CostSpec([[1.0]], np.eye(3), np.zeros((2, 2)), 1.0, [0, 0]))
    with pytest.raises(NotPSD):
        validate_system(p, CostSpec([[-1.0]], np.eye(2), np.zeros((2, 2)), 1.0, [0, 0]))
    with pytest.raises(NonpositiveHorizon):
        validate_system(p, CostSpec([[1.0]], np.eye(2), np.zeros((2, 2)), 0.0, [0, 0]))


def test_classify_examples():
    a = classify_disturbance(PlantModel(**EXAMPLE_A))
    assert a.kind is DisturbanceKind.MISMATCHED and (a.rank_B, a.rank_BE) == (1, 2)
    b = classify_disturbance(PlantModel(**EXAMPLE_B))
    assert b.kind is DisturbanceKind.MISMATCHED


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda v: max(map(abs, v)) > .1),
       st.floats(-4, 4))
def test_classify_matched(b, gamma):
    p = PlantModel(np.eye(3), b, np.array(b) * gamma, [1, 0, 0])
    c = classify_disturbance(p)
    assert c.kind is DisturbanceKind.MATCHED
    assert np.allclose(p.B @ c.gamma, p.E, atol=1e-9)


def test_assemble_Q():
    pa, ca = PlantModel(**EXAMPLE_A), CostSpec([[1e4]], np.eye(3), np.zeros((3, 3)), 1, [0] * 3)
    assert np.array_equal(assemble_Q(pa, ca), np.diag([0.0, 0.0, 1e4]))
    pb, cb = PlantModel(**EXAMPLE_B), CostSpec([[1e4]], np.eye(2), np.zeros((2, 2)), 1, [0, 0])
    assert np.array_equal(assemble_Q(pb, cb), np.diag([1e4, 0.0]))


def test_lift_reference():
    p = PlantModel(**EXAMPLE_B)
    r = lift_reference(p, [60.0])
    assert np.allclose(r, [60.0, 0.0])
    assert np.allclose(p.c_o @ r, [60.0])
    with pytest.raises(DimensionMismatch):
        lift_reference(p, [1.0, 2.0])


def test_signal_zero_order_hold():
    s = Signal.step(0.5, [0.0], [3.0])
    assert s(0.0)[0] == 0.0 and s(0.4999)[0] == 0.0
    assert s(0.5)[0] == 3.0 and s(100.0)[0] == 3.0
    assert np.array_equal(s.tail, [3.0])
    # a grid node computed with rounding error still sees the new value
    assert s(0.1 * 5)[0] == 3.0
    grid = np.linspace(0, 1, 11)
    held = s.on_intervals(grid)[:, 0]
    assert np.array_equal(held, [0.0] * 5 + [3.0] * 5)


def test_signal_shift_and_validation():
    s = Signal([0.0, 1.0, 2.0], [[1.0], [2.0], [3.0]])
    sh = s.shifted(1.5)
    assert sh(0.0)[0] == 2.0 and sh(0.5)[0] == 3.0
    with pytest.raises(ValueError):
        Signal([1.0, 0.5], [[0.0], [1.0]])
    with pytest.raises(DimensionMismatch):
        Signal([0.0, 1.0], [[0.0]])


def test_uniform_grid():
    grid, N = uniform_grid(1.2, 1e-4)
    assert N == 12000 and grid[-1] == 1.2
    with pytest.raises(StepInvalid):
        uniform_grid(1.0, 0.3)
    with pytest.raises(StepInvalid):
        uniform_grid(1.0, -1e-3)


def test_interp_nodes():
    grid = np.linspace(0, 1, 5)
    vals = grid ** 2
    assert interp_nodes(grid, vals, -1.0) == 0.0 and interp_nodes(grid, vals, 2.0) == 1.0
    assert interp_nodes(grid, vals, 0.5) == 0.25
    assert np.isclose(interp_nodes(grid, vals, 0.375), 0.5 * (0.0625 + 0.25))
