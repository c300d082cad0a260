import numpy as np
import pytest

from mdrc.model import CostSpec, PlantModel, Signal, lift_reference

EXAMPLE_A = dict(A=[[-4.0, 0.0, 0.0], [0.0, 3.0, 1.0], [0.0, -2.0, -1.0]],
                 B=[0.0, 1.0, 0.0], E=[0.0, 0.0, 1.0], c_o=[0.0, 0.0, 1.0])
EXAMPLE_B = dict(A=[[-0.42, 106.16], [41.67, 41.67]], B=[0.0, 83.33], E=[-212.31, 0.0],
                 c_o=[1.0, 0.0])


def scalar_problem(T=10.0, r=1.0, P_T=0.0):
    plant = PlantModel([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    return plant, CostSpec([[3.0]], [[1.0]], [[P_T]], T, [r])


def example_a(T=2.0):
    plant = PlantModel(**EXAMPLE_A)
    return plant, CostSpec([[1e4]], np.eye(3), np.zeros((3, 3)), T, np.zeros(3))


def example_b(T=1.2):
    plant = PlantModel(**EXAMPLE_B)
    return plant, CostSpec([[1e4]], np.eye(2), np.zeros((2, 2)), T, lift_reference(plant, [60.0]))


@pytest.fixture
def scalar():
    return scalar_problem()


@pytest.fixture
def plant_a():
    return example_a()


@pytest.fixture
def plant_b():
    return example_b()


@pytest.fixture
def step_a():
    return Signal.step(0.5, [0.0], [3.0])


@pytest.fixture
def step_b():
    return Signal.step(0.6, [0.0], [5.0])


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
