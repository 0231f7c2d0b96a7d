from dataclasses import replace

import numpy as np
import pytest

from conftest import EPS_SWEEP, OMEGA
from kscontrol.errors import ConvergenceError
from kscontrol.hum import conjugate_gradient, gramian_apply, solve_penalized


def test_zero_data_zero_control(std_problem):
    pb = std_problem("chemical")
    pb = replace(pb, y0=0 * pb.y0)
    sol = solve_penalized(pb)
    assert not np.any(sol.h) and sol.terminal_norm == 0.0
    assert not np.any(sol.q_star[0]) and not np.any(sol.q_star[1])


def test_gramian_zero_symmetric_positive(std_problem, std_mesh):
    rng = np.random.default_rng(0)
    n = 2 * std_mesh.n_interior
    for act in ("chemical", "density"):
        pb = std_problem(act)
        assert not np.any(gramian_apply(np.zeros(n), pb))
        for _ in range(3):
            q, r = rng.standard_normal(n), rng.standard_normal(n)
            Gq, Gr = gramian_apply(q, pb), gramian_apply(r, pb)
            assert abs(Gq @ r - q @ Gr) <= 1e-10 * (abs(Gq @ r) + abs(q @ Gr))
            assert q @ Gq >= pb.eps * (q @ q)


@pytest.mark.parametrize("act", ["chemical", "density"])
def test_control_support_and_optimality(std_problem, std_mesh, act):
    sol = solve_penalized(std_problem(act, 1e-6))
    outside = (std_mesh.x <= OMEGA[0]) | (std_mesh.x >= OMEGA[1])
    assert not np.any(sol.h[:, outside])
    assert not np.any(sol.h[0]) and not np.any(sol.h[-1])
    assert sol.cg_residual <= 1e-10
    assert sol.optimality_defect <= 10 * 1e-10 * sol.free_terminal_norm + 1e-13
    # terminal norm bounded by sqrt(eps * cost ratio) times the data
    bound = np.sqrt(sol.eps * sol.cost_ratio) * sol.initial_norm
    assert sol.terminal_norm <= bound * (1 + 1e-12)


def test_linearity_in_data(std_problem):
    pb = std_problem("chemical", 1e-6)
    a = solve_penalized(pb)
    b = solve_penalized(replace(pb, y0=2 * pb.y0))
    assert np.max(np.abs(b.h - 2 * a.h)) <= 1e-8 * np.max(np.abs(2 * a.h))
    assert b.terminal_norm == pytest.approx(2 * a.terminal_norm, rel=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("act", ["chemical", "density"])
def test_sweep_scaling(std_sweep, act):
    sols, slope = std_sweep(act)
    norms = [s.terminal_norm for s in sols]
    assert [s.eps for s in sols] == EPS_SWEEP
    assert abs(slope - 0.5) <= 0.1
    # nonincreasing as eps decreases, up to CG slack
    for big, small in zip(norms, norms[1:]):
        assert small <= big * (1 + 1e-8)
    ratios = [s.cost_ratio for s in sols]
    assert max(ratios) / min(ratios) <= 10


def test_iteration_cap_raises(std_problem):
    with pytest.raises(ConvergenceError) as info:
        solve_penalized(std_problem("chemical", 1e-8), max_iter=2)
    assert len(info.value.history) >= 2


def test_cg_solves_spd_system():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((30, 30))
    A = A @ A.T + 30 * np.eye(30)
    b = rng.standard_normal(30)
    x, iters, hist = conjugate_gradient(lambda v: A @ v, b, np.dot, tol=1e-12)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b) * 1.01
    assert hist[-1] <= 1e-12 and iters <= 60


def test_cg_rejects_indefinite():
    with pytest.raises(ConvergenceError):
        conjugate_gradient(lambda v: -v, np.ones(4), np.dot)
