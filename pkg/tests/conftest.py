import numpy as np
import pytest

from chsparse.config import parse_config, shipped_config
from chsparse.control import Control
from chsparse.grid import build_grid
from chsparse.model import CostParams, ModelParams
from chsparse.objective import ReducedProblem
from chsparse.optimizer import solve
from chsparse.state import InitialData, TimeGrid


@pytest.fixture(scope="session")
def baseline_cfg():
    return parse_config(shipped_config("baseline"))


@pytest.fixture(scope="session")
def baseline_problem(baseline_cfg):
    c = baseline_cfg
    return ReducedProblem(c.params, c.cost, c.init, c.time_grid, c.solver)


@pytest.fixture(scope="session")
def baseline_solution(baseline_cfg):
    c = baseline_cfg
    return solve(c.params, c.cost, c.init, c.time_grid, c.optimizer, c.control, options=c.solver)


def small_problem(n=17, steps=16, t_final=0.5, b1=1.0, b2=1.0, b3=0.05, kappa=0.005, p_kind="logistic-smooth",
                  phi_amp=0.5, chi=0.1, target_amp=-0.3):
    """Cheap 1D problem with every nonlinear coupling active."""
    grid = build_grid(1, [1.0], [n])
    tg = TimeGrid(t_final, steps)
    (x,) = grid.coordinates()
    coeffs = {"p0": 0.5, "scale": 1.0} if p_kind == "logistic-smooth" else {"p0": 0.0}
    params = ModelParams(chi=chi, p_kind=p_kind, p_coeffs=coeffs)
    init = InitialData(grid, np.zeros(n), phi_amp * np.cos(np.pi * x), np.ones(n))
    target = target_amp * np.cos(np.pi * x)
    cost = CostParams(b1, b2, b3, kappa, np.broadcast_to(target, (steps + 1, n)).copy(), target,
                      (-1.0, 1.0, -1.0, 1.0), np.ones((steps, n)))
    return ReducedProblem(params, cost, init, tg)


def random_control(rng, prob, scale=1.0):
    shape = (prob.tg.steps, prob.grid.n_nodes)
    return Control(scale * rng.standard_normal(shape), scale * rng.standard_normal(shape))


@pytest.fixture
def small():
    return small_problem()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; it is printed now and repeated in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
