"""Monte-Carlo probes of the weighted observability and Carleman inequalities.

Each probe draws random smooth terminal data for the adjoint system, marches
it backward, evaluates both sides of an inequality and records their ratio.
Ratios are empirical constants; nothing here certifies a theoretical one.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.integrate import trapezoid

from .linear_pde import AdjointPair, adjoint_solve, assemble_step_operators

N_MODES = 8
RHS_FLOOR = 1e-300
LHS_FLOOR = 1e-12


@dataclass
class AuditReport:
    kind: str
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    params: dict
    skipped: int = 0
    counterexamples: int = 0
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def sample_count(self):
        return int(self.lhs.size)

    @property
    def max_ratio(self):
        return float(np.max(self.ratio)) if self.ratio.size else float("nan")

    @property
    def median_ratio(self):
        return float(np.median(self.ratio)) if self.ratio.size else float("nan")

    @property
    def all_finite(self):
        return bool(self.ratio.size and np.all(np.isfinite(self.ratio)) and np.all(self.ratio > 0))

    def summary(self):
        return {
            "kind": self.kind,
            "sample_count": self.sample_count,
            "skipped": self.skipped,
            "counterexamples": self.counterexamples,
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "all_finite": self.all_finite,
            "params": self.params,
            "notes": list(self.notes),
            **self.extra,
        }

    def rows(self):
        return [(i, l, r, q) for i, (l, r, q) in enumerate(zip(self.lhs, self.rhs, self.ratio))]


def coefficient_hash(coeffs):
    h = hashlib.sha256()
    for name in ("a", "b", "B"):
        h.update(np.ascontiguousarray(getattr(coeffs, name), dtype=float).tobytes())
    h.update(coeffs.actuation.encode())
    return h.hexdigest()[:16]


def random_terminal_data(mesh, rng, modes=N_MODES):
    """Two fields, each a sum of the first ``modes`` sines with standard normal amplitudes."""
    k = np.arange(1, modes + 1)
    basis = np.sin(np.pi * np.outer(k, mesh.x) / mesh.length)
    basis[:, [0, -1]] = 0.0
    return rng.standard_normal(modes) @ basis, rng.standard_normal(modes) @ basis


def _omega_mask(mesh, omega):
    return (mesh.x > omega[0]) & (mesh.x < omega[1])


def _integrate(field_, mesh, mask=None):
    """Space-time trapezoid over interior time nodes (endpoint rows dropped)."""
    f = field_[1:-1]
    if mask is not None:
        f = f * mask[None, :]
    return float(mesh.dt * trapezoid(f, dx=mesh.dx, axis=1).sum())


def _params(weights, omega, coeffs):
    return {**weights.params, "omega": list(omega), "coefficients": coefficient_hash(coeffs),
            "actuation": coeffs.actuation}


def observability_sides(adj, weights, omega, actuation):
    """``|phi(0)|^2 + |psi(0)|^2`` and ``int_omega V^2 |psi|^2`` for one adjoint solution."""
    mesh = weights.mesh
    lhs = trapezoid(adj.phi[0] ** 2 + adj.psi[0] ** 2, dx=mesh.dx)
    obs = adj.actuated(actuation)
    # V^2 = W, kept in log-space until multiplied
    integrand = np.exp(np.minimum(weights.log_W, 709.0)) * obs**2
    return float(lhs), _integrate(integrand, mesh, _omega_mask(mesh, omega))


def _collect(kind, pairs, params, notes=None):
    lhs, rhs, ratio = [], [], []
    skipped = counter = 0
    notes = list(notes or [])
    for L, R in pairs:
        if L == 0 and R == 0:
            skipped += 1
            continue
        if R < RHS_FLOOR:
            if L > LHS_FLOOR:
                counter += 1
            else:
                skipped += 1
            continue
        lhs.append(L)
        rhs.append(R)
        ratio.append(L / R)
    if skipped:
        notes.append(f"{skipped} sample(s) with vanishing data skipped")
    if counter:
        notes.append(f"{counter} sample(s) with RHS = 0 and LHS > 0: counterexample evidence")
    return AuditReport(kind, np.array(lhs), np.array(rhs), np.array(ratio), params,
                       skipped, counter, notes)


def _ops(coeffs, mesh):
    return assemble_step_operators(coeffs, np.zeros(mesh.nx), mesh)


def observability_ratio(samples, weights, coeffs, mesh, seed=0, omega=(0.3, 0.7),
                        terminal_data=None, scale=1.0):
    """Empirical constant of the weighted observability inequality.

    ``terminal_data`` may supply a list of ``(phi_T, psi_T)`` pairs instead of
    random draws; ``scale`` multiplies every terminal datum.
    """
    ops = _ops(coeffs, mesh)
    rng = np.random.default_rng(seed)
    data = terminal_data or [random_terminal_data(mesh, rng) for _ in range(samples)]
    pairs = []
    for phi_T, psi_T in data:
        adj = adjoint_solve(ops, scale * np.asarray(phi_T), scale * np.asarray(psi_T))
        pairs.append(observability_sides(adj, weights, omega, coeffs.actuation))
    notes = ["s, lambda come from a validation sweep, not from the unknown theoretical thresholds"]
    return _collect("observability", pairs, _params(weights, omega, coeffs), notes)


def carleman_sides(adj, weights, omega):
    """Both sides of the weighted Carleman inequality for one adjoint solution.

    The estimate concerns the adjoint system itself and observes ``psi``
    whichever equation carries the control.
    """
    mesh = weights.mesh
    s, lam, m, T = weights.s, weights.lam, weights.m, mesh.horizon
    phi_w = np.exp(weights.log_phi)
    log_theta2 = -2.0 * s * phi_w
    log_xi = weights.log_xi

    def weighted(j):
        w = np.zeros(mesh.spacetime_shape)
        w[1:-1] = np.exp(np.minimum(log_theta2[1:-1] + j * log_xi[1:-1], 709.0))
        return w

    lap = np.zeros_like(adj.phi)
    lap[:, 1:-1] = (adj.phi[:, :-2] - 2.0 * adj.phi[:, 1:-1] + adj.phi[:, 2:]) / mesh.dx**2
    grad = np.gradient(adj.phi, mesh.dx, axis=1, edge_order=2)
    psi = adj.psi
    lhs = (s * lam**2 * _integrate(weighted(1) * lap**2, mesh)
           + s**3 * lam**4 * _integrate(weighted(3) * grad**2, mesh)
           + s**6 * lam**8 * _integrate(weighted(6) * psi**2, mesh))
    W = np.exp(np.minimum(weights.log_W, 709.0))
    rhs = (1.0 + T ** (2 * m)) * s**8 * lam**8 * _integrate(W * psi**2, mesh, _omega_mask(mesh, omega))
    return float(lhs), float(rhs)


def carleman_ratio(samples, weights, coeffs, mesh, seed=0, omega=(0.3, 0.7), scale=1.0):
    """Empirical constant of the Carleman inequality over random adjoint solutions."""
    ops = _ops(coeffs, mesh)
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(samples):
        phi_T, psi_T = random_terminal_data(mesh, rng)
        adj = adjoint_solve(ops, scale * phi_T, scale * psi_T)
        pairs.append(carleman_sides(adj, weights, omega))
    notes = ["ratio finiteness below the theoretical s, lambda thresholds is not guaranteed"]
    return _collect("carleman", pairs, _params(weights, omega, coeffs), notes)


def neumann_adjoint(coeffs, mesh, phi_T, psi_T):
    """Backward march of the adjoint system with zero-flux ends on both components.

    All nodes are unknowns; ghost values mirror the neighbours, so constants
    are annihilated by both difference operators. The march is written for the
    increment ``P - P_T``: when ``L P_T`` vanishes exactly the increment stays
    exactly zero, free of factorization rounding.
    """
    nx, dx = mesh.nx, mesh.dx
    d2 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(nx, nx)).tolil()
    d2[0, 1] = 2.0
    d2[-1, -2] = 2.0
    d2 = (d2 / dx**2).tocsr()
    d1 = sp.diags([-1.0, 1.0], [-1, 1], shape=(nx, nx)).tolil()
    d1[0, 1] = 0.0
    d1[-1, -2] = 0.0
    d1 = (d1 / (2.0 * dx)).tocsr()
    eye = sp.identity(2 * nx, format="csc")
    phi, psi = mesh.zeros_spacetime(), mesh.zeros_spacetime()
    phi[-1], psi[-1] = phi_T, psi_T
    PT = np.concatenate([phi_T, psi_T])
    D = np.zeros_like(PT)
    for n in range(mesh.nt - 1, -1, -1):
        a, b, B = (sp.diags(getattr(coeffs, k)[n]) for k in ("a", "b", "B"))
        op = sp.bmat([[d2 + a @ d1, -d1], [B @ d1, d2 - b @ d1]]).tocsc()
        rhs = D + mesh.dt * (op @ PT)
        D = spl.spsolve(eye - mesh.dt * op, rhs) if np.any(rhs) else np.zeros_like(rhs)
        phi[n], psi[n] = PT[:nx] + D[:nx], PT[nx:] + D[nx:]
    return AdjointPair(phi, psi)


def neumann_counterexample(mesh, weights, coeffs, omega=(0.3, 0.7)):
    """Constant adjoint data under zero-flux ends defeat observability.

    ``(phi, psi) = (1, 0)`` solves the adjoint system, so the left side equals
    the domain length while the observed side vanishes. The same data (with
    Dirichlet ends) are also run for comparison.
    """
    one, zero = np.ones(mesh.nx), np.zeros(mesh.nx)
    adj = neumann_adjoint(coeffs, mesh, one, zero)
    lhs, rhs = observability_sides(adj, weights, omega, coeffs.actuation)
    defect = float(max(np.max(np.abs(adj.phi - 1.0)), np.max(np.abs(adj.psi))))

    dir_phi = one.copy()
    dir_phi[[0, -1]] = 0.0
    dir_adj = adjoint_solve(_ops(coeffs, mesh), dir_phi, zero)
    d_lhs, d_rhs = observability_sides(dir_adj, weights, omega, coeffs.actuation)

    fails = lhs > LHS_FLOOR and rhs < RHS_FLOOR
    report = _collect("neumann", [(lhs, rhs)], _params(weights, omega, coeffs))
    report.extra = {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": "inf" if fails else (lhs / rhs if rhs > 0 else "nan"),
        "constancy_defect": defect,
        "verdict": "observability fails" if fails else "no counterexample",
        "dirichlet_lhs": d_lhs,
        "dirichlet_rhs": d_rhs,
    }
    return report
