import numpy as np
import pytest

from kscontrol.hum import PenalizedProblem, eps_sweep
from kscontrol.linear_pde import CoefficientSet, assemble_step_operators
from kscontrol.mesh import Mesh1D
from kscontrol.weights import build_cutoff, build_rho, select_weight_set

# Standard steady-trajectory control problem shared by several test modules.
STD_NX, STD_NT, STD_T = 101, 200, 0.1
OMEGA, OMEGA1, OMEGA0 = (0.3, 0.7), (0.35, 0.65), (0.4, 0.6)
EPS_SWEEP = [10.0**-j for j in range(2, 9)]

_ACCEPTANCE = {}


def sine(mesh, amp=1.0, mode=1):
    f = amp * np.sin(mode * np.pi * mesh.x / mesh.length)
    f[0] = f[-1] = 0.0
    return f


@pytest.fixture(scope="session")
def std_mesh():
    return Mesh1D(STD_NX, STD_NT, 1.0, STD_T)


@pytest.fixture(scope="session")
def std_weights(std_mesh):
    return select_weight_set(std_mesh, build_rho(std_mesh, OMEGA0))


@pytest.fixture(scope="session")
def std_cutoff(std_mesh):
    return build_cutoff(std_mesh, OMEGA, OMEGA1)


@pytest.fixture(scope="session")
def std_y0(std_mesh):
    return sine(std_mesh, 1e-2)


@pytest.fixture(scope="session")
def std_ops(std_mesh, std_cutoff):
    return {
        act: assemble_step_operators(CoefficientSet.steady(std_mesh, 1.0, act), std_cutoff, std_mesh)
        for act in ("chemical", "density")
    }


@pytest.fixture(scope="session")
def std_problem(std_weights, std_ops, std_y0):
    def make(actuation="chemical", eps=1e-6):
        return PenalizedProblem(eps, std_weights, std_ops[actuation], std_y0, 0 * std_y0)
    return make


@pytest.fixture(scope="session")
def std_sweep(std_problem):
    cache = {}

    def get(actuation):
        if actuation not in cache:
            cache[actuation] = eps_sweep(std_problem(actuation), EPS_SWEEP)
        return cache[actuation]
    return get


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
