import numpy as np
import pytest

from kscontrol.audit import (carleman_ratio, neumann_adjoint, neumann_counterexample,
                             observability_ratio)
from kscontrol.linear_pde import CoefficientSet


@pytest.fixture(scope="module")
def coeffs(std_mesh):
    return CoefficientSet.steady(std_mesh)


def test_zero_data_skipped(std_mesh, std_weights, coeffs):
    z = std_mesh.zeros()
    rep = observability_ratio(1, std_weights, coeffs, std_mesh, terminal_data=[(z, z)])
    assert rep.sample_count == 0 and rep.skipped == 1
    assert any("skipped" in n for n in rep.notes)


def test_single_mode_couples_into_psi(std_mesh, std_weights, coeffs):
    phi = np.sin(np.pi * std_mesh.x)
    phi[[0, -1]] = 0.0
    rep = observability_ratio(1, std_weights, coeffs, std_mesh, terminal_data=[(phi, 0 * phi)])
    assert rep.rhs[0] > 0 and np.isfinite(rep.ratio[0])


def test_observability_finite_and_scale_invariant(std_mesh, std_weights, coeffs):
    a = observability_ratio(50, std_weights, coeffs, std_mesh, seed=1)
    b = observability_ratio(50, std_weights, coeffs, std_mesh, seed=1, scale=10.0)
    assert a.sample_count == 50 and a.all_finite
    assert np.max(np.abs(b.ratio / a.ratio - 1)) <= 1e-10
    assert a.params["actuation"] == "chemical" and "coefficients" in a.params


def test_seeded_runs_bit_identical(std_mesh, std_weights, coeffs):
    a = observability_ratio(10, std_weights, coeffs, std_mesh, seed=3)
    b = observability_ratio(10, std_weights, coeffs, std_mesh, seed=3)
    assert np.array_equal(a.ratio, b.ratio)


def test_carleman_finite_and_scale_invariant(std_mesh, std_weights, coeffs):
    a = carleman_ratio(20, std_weights, coeffs, std_mesh, seed=2)
    b = carleman_ratio(20, std_weights, coeffs, std_mesh, seed=2, scale=10.0)
    assert a.sample_count == 20 and a.all_finite
    assert np.max(np.abs(b.ratio / a.ratio - 1)) <= 1e-10


def test_neumann_constants_preserved(std_mesh, coeffs):
    adj = neumann_adjoint(coeffs, std_mesh, np.ones(std_mesh.nx), std_mesh.zeros())
    assert np.max(np.abs(adj.phi - 1)) <= 1e-12 and np.max(np.abs(adj.psi)) <= 1e-12


def test_neumann_counterexample(std_mesh, std_weights, coeffs):
    rep = neumann_counterexample(std_mesh, std_weights, coeffs)
    ex = rep.extra
    assert ex["lhs"] == pytest.approx(std_mesh.length, abs=1e-12)
    assert ex["rhs"] == 0.0 and ex["ratio"] == "inf"
    assert ex["verdict"] == "observability fails"
    assert ex["dirichlet_rhs"] > 0
    assert rep.counterexamples == 1


def test_neumann_zero_data_skipped(std_mesh, std_weights, coeffs):
    from kscontrol.audit import _collect, observability_sides
    adj = neumann_adjoint(coeffs, std_mesh, std_mesh.zeros(), std_mesh.zeros())
    L, R = observability_sides(adj, std_weights, (0.3, 0.7), "chemical")
    assert L == R == 0.0
    assert _collect("neumann", [(L, R)], {}).skipped == 1
