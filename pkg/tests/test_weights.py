import numpy as np
import pytest

from kscontrol.errors import ConstructionError, DimensionError, ParameterError
from kscontrol.mesh import Mesh1D
from kscontrol.weights import (build_cutoff, build_rho, build_weight_set, export_weights_csv,
                               mid_horizon_scale, select_weight_set, weight_at)


@pytest.fixture(scope="module")
def mesh():
    return Mesh1D(51, 40, 1.0, 0.1)


@pytest.fixture(scope="module")
def ws(mesh):
    return select_weight_set(mesh, build_rho(mesh, (0.4, 0.6)))


def test_rho_symmetric_case(mesh):
    rho = build_rho(mesh, (0.4, 0.6))
    assert (rho.p, rho.q) == (1, 1)
    assert rho.critical_point == 0.5
    assert np.allclose(rho(mesh.x), 4 * mesh.x * (1 - mesh.x), atol=1e-15)
    assert rho(0.0) == rho(1.0) == 0.0
    assert rho.min_slope > 0


def test_rho_skewed_case(mesh):
    rho = build_rho(mesh, (0.6, 0.8))
    assert (rho.p, rho.q) == (2, 1)
    assert rho.critical_point == pytest.approx(2 / 3)
    assert np.max(rho(mesh.x)) == pytest.approx(1.0, abs=1e-3)
    assert rho(rho.critical_point) == pytest.approx(1.0, abs=1e-15)


def test_rho_unreachable(mesh):
    with pytest.raises(ConstructionError, match="0.25.*0.75"):
        build_rho(mesh, (0.01, 0.02), max_exponent=3)


def test_cutoff_shape(mesh):
    cut = build_cutoff(mesh, (0.3, 0.7), (0.35, 0.65)).values
    x = mesh.x
    assert np.all((cut >= 0) & (cut <= 1))
    assert np.all(cut[(x >= 0.35) & (x <= 0.65)] == 1.0)
    assert np.all(cut[(x <= 0.3) | (x >= 0.7)] == 0.0)
    with pytest.raises(ConstructionError):
        build_cutoff(mesh, (0.3, 0.7), (0.3, 0.65))


def test_time_symmetry_exact(ws):
    assert np.array_equal(ws.log_W, ws.log_W[::-1])
    assert np.array_equal(ws.log_phi, ws.log_phi[::-1])
    assert np.array_equal(ws.xi_star, ws.xi_star[::-1])


def test_boundary_column_is_star(ws, mesh):
    n = np.arange(1, mesh.nt)
    t = mesh.t[n]
    R, lam, k, m = ws.rho_scale, ws.lam, ws.k, ws.m
    expected = np.exp(lam * k * R) / (t**m * (mesh.horizon - t) ** m)
    for col in (0, -1):
        assert np.allclose(np.exp(ws.log_xi[n, col]), expected, rtol=1e-12, atol=0)
        assert np.allclose(np.exp(ws.log_xi[n, col]), ws.xi_star[n], rtol=1e-12, atol=0)
        assert np.allclose(np.exp(ws.log_phi[n, col]), ws.phi_star[n], rtol=1e-12, atol=0)


def test_star_extremes(ws):
    inner = slice(1, -1)
    phi, xi = ws.table("phi")[inner], ws.table("xi")[inner]
    assert np.all(phi <= ws.phi_star[inner, None] * (1 + 1e-14))
    assert np.all(xi >= ws.xi_star[inner, None] * (1 - 1e-14))


def test_phi_positive_and_validation_margin(ws):
    assert np.all(np.isfinite(ws.log_phi[1:-1]))
    assert ws.margin > 0


def test_log_w_recompute(ws):
    inner = slice(1, -1)
    phi = np.exp(ws.log_phi[inner])
    expo = -4 * ws.s * phi + 2 * ws.s * ws.phi_star[inner, None] + 8 * ws.log_xi[inner]
    ok = ws.log_W[inner] > -700
    direct = np.exp(expo[ok])
    table = np.exp(ws.log_W[inner][ok])
    assert np.max(np.abs(direct / table - 1)) < 1e-10


def test_v_squared_is_w(ws):
    assert np.allclose(2 * ws.log_V[1:-1], ws.log_W[1:-1], rtol=1e-14, atol=0)


def test_theta_identity_and_endpoint_zeros(ws, mesh):
    for i, n in [(0, 3), (25, 20), (10, 7)]:
        th = weight_at(ws, "theta", i, n)
        assert th == pytest.approx(np.exp(-ws.s * weight_at(ws, "phi", i, n)), rel=1e-12)
    for i in range(mesh.nx):
        assert weight_at(ws, "obs_V", i, 0) == 0.0
        assert weight_at(ws, "control_W", i, mesh.nt) == 0.0
    with pytest.raises(DimensionError):
        weight_at(ws, "phi", mesh.nx, 0)


def test_weights_positive_interior_and_vanishing_at_start():
    mesh = Mesh1D(101, 200, 1.0, 1.0)
    rho = build_rho(mesh, (0.4, 0.6))
    R = mid_horizon_scale(mesh, rho, 2.0, 1.2, 4, 12.0)
    ws = build_weight_set(mesh, rho, 2.0, 1.2, 4, 12.0, R)
    assert np.all(np.isfinite(ws.log_W[1:-1]))
    assert np.max(ws.log_W[1] - ws.max_log_W) < np.log(1e-6)


def test_small_k_example_is_rejected():
    mesh = Mesh1D(101, 200, 1.0, 1.0)
    rho = build_rho(mesh, (0.4, 0.6))
    with pytest.raises(ParameterError, match="increase lambda"):
        build_weight_set(mesh, rho, 2.0, 1.2, 4, 5.0)


@pytest.mark.parametrize("kw", [dict(s=1.0), dict(lam=0.9), dict(m=3), dict(k=4.0), dict(m=4.5)])
def test_parameter_preconditions(mesh, kw):
    args = dict(s=2.0, lam=2.0, m=4, k=12.0)
    args.update(kw)
    with pytest.raises(ParameterError):
        build_weight_set(mesh, build_rho(mesh, (0.4, 0.6)), **args, rho_scale=1e-6)


def test_monotone_in_s(ws, mesh):
    peaks = [build_weight_set(mesh, ws.rho, s, ws.lam, ws.m, ws.k, ws.rho_scale).max_log_W
             for s in (ws.s, 1.5 * ws.s, 3 * ws.s)]
    assert peaks[0] >= peaks[1] >= peaks[2]


def test_sweep_respects_log_bound(ws):
    assert ws.max_log_W < 600
    assert ws.s > 1 and ws.lam > 1


def test_export_csv(ws, mesh, tmp_path):
    path = tmp_path / "w.csv"
    export_weights_csv(ws, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,t,phi,xi,W,V"
    assert len(lines) == 1 + mesh.nx * (mesh.nt + 1)
