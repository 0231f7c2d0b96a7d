import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kscontrol.errors import DimensionError
from kscontrol.mesh import Mesh1D, gradient, inner, laplacian, norm, space_norms


def _lap_sin_error(nx):
    m = Mesh1D(nx, 8)
    f = np.sin(np.pi * m.x)
    return np.max(np.abs(laplacian(f, m)[1:-1] + np.pi**2 * f[1:-1]))


def _grad_cubic_error(nx):
    m = Mesh1D(nx, 8)
    return np.max(np.abs(gradient(m.x**3, m) - 3 * m.x**2))


def test_mesh_geometry():
    m = Mesh1D(11, 20, 2.0, 0.5)
    assert m.dx == pytest.approx(0.2) and m.dt == pytest.approx(0.025)
    assert m.x[-1] == 2.0 and m.t[-1] == 0.5 and m.n_interior == 9
    assert m.spacetime_shape == (21, 11)


def test_laplacian_quadratic_and_zero():
    m = Mesh1D(41, 8)
    out = laplacian(m.x * (1 - m.x), m, dirichlet=(0.0, 0.0))
    assert np.max(np.abs(out[1:-1] + 2)) < 1e-12
    assert out[0] == out[-1] == 0.0
    assert not np.any(laplacian(m.zeros(), m))


def test_laplacian_affine_vanishes():
    m = Mesh1D(41, 8)
    assert np.max(np.abs(laplacian(2 * m.x - 1, m))) < 1e-11


def test_laplacian_sine_second_order():
    e1, e2 = _lap_sin_error(101), _lap_sin_error(201)
    assert e1 < 1e-3
    assert e1 / e2 == pytest.approx(4, rel=0.05)


def test_gradient_affine_constant_cubic():
    m = Mesh1D(101, 8)
    assert np.max(np.abs(gradient(3 * m.x + 1, m) - 3)) < 1e-12
    assert not np.any(gradient(np.full(m.nx, 7.0), m))
    assert _grad_cubic_error(101) / _grad_cubic_error(201) == pytest.approx(4, rel=0.05)


def test_gradient_rowwise():
    m = Mesh1D(21, 8)
    field = np.outer(np.arange(1, m.nt + 2), m.x)
    g = gradient(field, m)
    assert np.allclose(g, np.arange(1, m.nt + 2)[:, None], atol=1e-12)


def test_norms_examples():
    m = Mesh1D(201, 8)
    assert norm(np.ones(m.nx), m) == pytest.approx(1.0, abs=1e-14)
    for kind in ("L2_space", "H1_space"):
        assert norm(m.zeros(), m, kind) == 0.0
    assert norm(m.zeros_spacetime(), m, "L2_spacetime") == 0.0
    assert abs(norm(np.sin(np.pi * m.x), m) - np.sqrt(0.5)) < 1e-4
    h1 = norm(np.sin(np.pi * m.x), m, "H1_space")
    assert h1 == pytest.approx(np.sqrt(0.5 + np.pi**2 / 2), rel=1e-3)


def test_space_norms_shape():
    m = Mesh1D(21, 8)
    f = np.tile(np.sin(np.pi * m.x), (m.nt + 1, 1))
    assert np.allclose(space_norms(f, m), norm(f[0], m))


def test_dimension_errors():
    m = Mesh1D(21, 8)
    with pytest.raises(DimensionError):
        laplacian(np.zeros(20), m)
    with pytest.raises(DimensionError):
        gradient(np.zeros((2, 3, 21)), m)
    with pytest.raises(DimensionError):
        norm(np.zeros(21), m, "L2_spacetime")
    with pytest.raises(ValueError):
        norm(np.zeros(21), m, "H2")


def _interior_field(m, coeffs):
    k = np.arange(1, len(coeffs) + 1)
    f = np.asarray(coeffs) @ np.sin(np.pi * np.outer(k, m.x))
    f[[0, -1]] = 0.0
    return f


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_summation_by_parts(cf, cg):
    m = Mesh1D(51, 8)
    f, g = _interior_field(m, cf), _interior_field(m, cg)
    lhs = inner(laplacian(f, m), g, m)
    rhs = inner(f, laplacian(g, m), m)
    assert abs(lhs - rhs) <= 1e-12 * norm(f, m) * norm(g, m)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-3))
def test_norm_homogeneity(alpha):
    m = Mesh1D(31, 8)
    f = np.cos(3 * m.x) + m.x**2
    for kind in ("L2_space", "H1_space"):
        assert norm(alpha * f, m, kind) == pytest.approx(abs(alpha) * norm(f, m, kind), rel=1e-14)
