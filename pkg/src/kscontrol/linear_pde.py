"""Linearized controlled system and its exact discrete adjoint.

Forward problem (1D, homogeneous Dirichlet data)::

    y_t - y_xx = -(a y)_x - (B z)_x            [+ cut * h  if actuation == "density"]
    z_t - z_xx =  (b z)_x + y_x                [+ cut * h  if actuation == "chemical"]

Backward Euler with every spatial term implicit and coefficients frozen at the
new time level. With ``U = (y, z)`` restricted to interior nodes the step is

    U^{n+1} = M_{n+1}^{-1} (U^n + dt * R h^n)

where ``R`` multiplies by the cutoff and injects into the actuated block. The
adjoint march is the transposed chain ``P^n = M_{n+1}^{-T} P^{n+1}``, so the
discrete Green identity

    <U^{nt}, P^{nt}> - <U^0, P^0> = sum_{n < nt} dt <R h^n, P^n>

holds to rounding. ``P = (phi, psi)`` then solves a consistent discretization of
phi_t + phi_xx + a phi_x = psi_x, -psi_t - psi_xx + b psi_x = B phi_x.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .errors import DivergenceError, HypothesisError, StabilityError
from .mesh import check_field, check_spacetime

ACTUATIONS = ("chemical", "density")
BLOWUP = 1e6
# Names accepted by the ``_disable`` test hook of assemble_step_operators.
COUPLINGS = ("a", "B", "b", "y_in_z")


@dataclass(frozen=True)
class CoefficientSet:
    """Space-time coefficient fields ``a``, ``b``, ``B`` and the actuated equation."""

    a: np.ndarray
    b: np.ndarray
    B: np.ndarray
    actuation: str = "chemical"

    def validate(self, mesh):
        if self.actuation not in ACTUATIONS:
            raise ValueError(f"actuation must be one of {ACTUATIONS}, got {self.actuation!r}")
        for name in ("a", "b", "B"):
            arr = check_spacetime(getattr(self, name), mesh, name)
            if not np.all(np.isfinite(arr)):
                raise HypothesisError(f"coefficient {name} has non-finite entries")
        if self.actuation == "chemical" and np.min(self.B) <= 0:
            raise HypothesisError(
                f"B must have a positive lower bound, min B = {np.min(self.B):.3e}"
            )

    @classmethod
    def steady(cls, mesh, p_bar=1.0, actuation="chemical"):
        """Coefficients of the linearization around the constant state (p_bar, 0)."""
        zero = mesh.zeros_spacetime()
        return cls(zero, zero.copy(), np.full(mesh.spacetime_shape, float(p_bar)), actuation)

    @classmethod
    def from_trajectory(cls, u_bar, v_bar, eta=None, actuation="chemical"):
        """``a = eta + v_bar``, ``b = eta + 2 v_bar``, ``B = u_bar``."""
        v_bar = np.asarray(v_bar, dtype=float)
        eta = np.zeros_like(v_bar) if eta is None else np.asarray(eta, dtype=float)
        return cls(eta + v_bar, eta + 2.0 * v_bar, np.array(u_bar, dtype=float), actuation)

    def max_norms(self):
        return {k: float(np.max(np.abs(getattr(self, k)))) for k in ("a", "b", "B")}


@dataclass
class StatePair:
    y: np.ndarray
    z: np.ndarray

    @property
    def terminal(self):
        return self.y[-1], self.z[-1]


@dataclass
class AdjointPair:
    phi: np.ndarray
    psi: np.ndarray

    @property
    def initial(self):
        return self.phi[0], self.psi[0]

    def actuated(self, actuation):
        """Component paired with the control: psi for chemical, phi for density."""
        return self.psi if actuation == "chemical" else self.phi


@dataclass
class StepOperators:
    """Factorized implicit matrices, one per time level, plus the control injection."""

    mesh: object
    coeffs: CoefficientSet
    cutoff: np.ndarray
    factors: list
    matrices: list
    injection: np.ndarray
    dominance_margin: float
    disabled: frozenset = field(default_factory=frozenset)

    @property
    def actuation(self):
        return self.coeffs.actuation

    @property
    def size(self):
        return 2 * self.mesh.n_interior

    def step(self, state, control_row, n):
        """Advance the stacked interior state from level ``n`` to ``n + 1``."""
        rhs = state + self.mesh.dt * self.injection * np.tile(control_row[1:-1], 2)
        return self.factors[n + 1].solve(rhs)

    def adjoint_step(self, costate, n):
        """Transpose of :meth:`step` (without control): level ``n + 1`` to ``n``."""
        return self.factors[n + 1].solve(costate, trans="T")

    def inject_transpose(self, costate):
        """Pointwise cutoff times the actuated costate component, as a full field."""
        n = self.mesh.n_interior
        out = np.zeros(self.mesh.nx)
        out[1:-1] = (self.injection * costate).reshape(2, n).sum(axis=0)
        return out


def level_matrix(mesh, a, b, B, disabled=frozenset()):
    """Implicit matrix ``I - dt * L`` for interior coefficient rows ``a, b, B``."""
    d1, d2 = mesh.d1_interior, mesh.d2_interior
    n = mesh.n_interior
    zero = sp.csr_matrix((n, n))
    a = 0.0 * a if "a" in disabled else a
    b = 0.0 * b if "b" in disabled else b
    byy = d2 - d1 @ sp.diags(a)
    byz = zero if "B" in disabled else -(d1 @ sp.diags(B))
    bzy = zero if "y_in_z" in disabled else d1
    bzz = d2 + d1 @ sp.diags(b)
    op = sp.bmat([[byy, byz], [bzy, bzz]], format="csc")
    return (sp.identity(2 * n, format="csc") - mesh.dt * op).tocsc()


def _dominance_margin(mat):
    m = abs(mat).tocsr()
    diag = m.diagonal()
    off = np.asarray(m.sum(axis=1)).ravel() - diag
    return float(np.min(diag - off))


def assemble_step_operators(coeffs, cutoff, mesh, _disable=()):
    """Build and factor the implicit matrix of every time level.

    Parameters
    ----------
    coeffs : CoefficientSet
    cutoff : CutoffProfile or array_like, shape (nx,)
        Smooth bump localizing the control.
    mesh : Mesh1D
    _disable : iterable of str
        Test hook: names from ``COUPLINGS`` whose terms are dropped, so that
        analytic heat solutions can serve as oracles.

    Raises
    ------
    StabilityError
        If an implicit matrix is singular.
    """
    coeffs.validate(mesh)
    disabled = frozenset(_disable)
    unknown = disabled - set(COUPLINGS)
    if unknown:
        raise ValueError(f"unknown coupling names {sorted(unknown)}")
    cut = check_field(getattr(cutoff, "values", cutoff), mesh, "cutoff")

    factors = [None] * (mesh.nt + 1)
    matrices = [None] * (mesh.nt + 1)
    margin = np.inf
    prev_key = None
    for n in range(1, mesh.nt + 1):
        a, b, B = coeffs.a[n, 1:-1], coeffs.b[n, 1:-1], coeffs.B[n, 1:-1]
        key = (a.tobytes(), b.tobytes(), B.tobytes())
        if key == prev_key:
            factors[n], matrices[n] = factors[n - 1], matrices[n - 1]
            continue
        mat = level_matrix(mesh, a, b, B, disabled)
        try:
            lu = spl.splu(mat)
        except RuntimeError as exc:
            raise StabilityError(
                f"implicit matrix at t={mesh.t[n]:.4g} is singular ({exc}); reduce dt"
            ) from exc
        if not np.all(np.isfinite(lu.U.diagonal())) or np.min(np.abs(lu.U.diagonal())) < 1e-12:
            raise StabilityError(f"implicit matrix at t={mesh.t[n]:.4g} is near singular; reduce dt")
        margin = min(margin, _dominance_margin(mat))
        factors[n], matrices[n] = lu, mat
        prev_key = key

    injection = injection_vector(mesh, cut, coeffs.actuation)
    return StepOperators(mesh, coeffs, cut, factors, matrices, injection, margin, disabled)


def injection_vector(mesh, cut, actuation):
    """Cutoff on the interior nodes of the actuated block, zeros elsewhere."""
    n = mesh.n_interior
    injection = np.zeros(2 * n)
    block = slice(n, 2 * n) if actuation == "chemical" else slice(0, n)
    injection[block] = np.asarray(cut)[1:-1]
    return injection


def stack(y, z):
    return np.concatenate([y[1:-1], z[1:-1]])


def unstack(vec, mesh):
    n = mesh.n_interior
    y, z = np.zeros(mesh.nx), np.zeros(mesh.nx)
    y[1:-1], z[1:-1] = vec[:n], vec[n:]
    return y, z


def _check_boundary(f, name):
    if f[0] != 0.0 or f[-1] != 0.0:
        raise ValueError(f"{name} must vanish at both boundary nodes")


def forward_terminal(ops, state0, h=None):
    """Stacked interior terminal state of the forward march (no history kept)."""
    mesh = ops.mesh
    state = np.array(state0, dtype=float)
    for n in range(mesh.nt):
        if h is None:
            state = ops.factors[n + 1].solve(state)
        else:
            state = ops.step(state, h[n], n)
    return state


def forward_solve(ops, y0, z0, h=None):
    """March the controlled linear system over the whole horizon.

    ``h`` is a space-time control field; its row ``n`` acts on the step
    from ``t_n`` to ``t_{n+1}`` (the last row is never used).
    """
    mesh = ops.mesh
    y0 = check_field(y0, mesh, "y0")
    z0 = check_field(z0, mesh, "z0")
    _check_boundary(y0, "y0")
    _check_boundary(z0, "z0")
    if h is not None:
        h = check_spacetime(h, mesh, "h")
    y, z = mesh.zeros_spacetime(), mesh.zeros_spacetime()
    y[0], z[0] = y0, z0
    state = stack(y0, z0)
    for n in range(mesh.nt):
        state = ops.step(state, h[n], n) if h is not None else ops.factors[n + 1].solve(state)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > BLOWUP:
            raise DivergenceError(f"forward solve diverged at t={mesh.t[n + 1]:.4g}", mesh.t[n + 1])
        y[n + 1], z[n + 1] = unstack(state, mesh)
    return StatePair(y, z)


def adjoint_march(ops, costate_T):
    """All stacked costates ``P^0 .. P^{nt}`` as an array of shape (nt + 1, 2 * n_interior)."""
    mesh = ops.mesh
    out = np.empty((mesh.nt + 1, ops.size))
    out[-1] = costate_T
    for n in range(mesh.nt - 1, -1, -1):
        out[n] = ops.adjoint_step(out[n + 1], n)
    return out


def adjoint_solve(ops, phi_T, psi_T):
    """Backward march of the transposed step chain from terminal data (phi_T, psi_T)."""
    mesh = ops.mesh
    phi_T = check_field(phi_T, mesh, "phi_T")
    psi_T = check_field(psi_T, mesh, "psi_T")
    _check_boundary(phi_T, "phi_T")
    _check_boundary(psi_T, "psi_T")
    costates = adjoint_march(ops, stack(phi_T, psi_T))
    if not np.all(np.isfinite(costates)) or np.max(np.abs(costates)) > BLOWUP:
        raise DivergenceError("adjoint solve diverged")
    n = mesh.n_interior
    phi, psi = mesh.zeros_spacetime(), mesh.zeros_spacetime()
    phi[:, 1:-1] = costates[:, :n]
    psi[:, 1:-1] = costates[:, n:]
    return AdjointPair(phi, psi)


def control_pairing(ops, h, adjoint):
    """Discrete <cut * h, actuated adjoint>_Q matching the time-stepping rule."""
    mesh = ops.mesh
    actuated = adjoint.actuated(ops.actuation)
    integrand = (ops.cutoff * h * actuated)[:-1].sum(axis=1)
    return float(mesh.dt * mesh.dx * integrand.sum())


def duality_gap(ops, y0, z0, h, phi_T, psi_T):
    """Relative defect of the discrete Green identity.

    |<y(T), phi_T> + <z(T), psi_T> - <y0, phi(0)> - <z0, psi(0)> - <cut h, psi>_Q|
    divided by the sum of the magnitudes of the five terms (0 when all vanish).
    """
    mesh = ops.mesh
    state = forward_solve(ops, y0, z0, h)
    adj = adjoint_solve(ops, phi_T, psi_T)
    dx = mesh.dx
    terms = np.array([
        dx * np.dot(state.y[-1], phi_T),
        dx * np.dot(state.z[-1], psi_T),
        -dx * np.dot(y0, adj.phi[0]),
        -dx * np.dot(z0, adj.psi[0]),
        -control_pairing(ops, h, adj),
    ])
    scale = np.sum(np.abs(terms))
    if scale == 0.0:
        return 0.0
    return float(abs(terms.sum()) / scale)


def stability_bound(ops):
    """Exponent ``C * M * T`` of the a-priori L2 growth bound read from coefficient norms.

    From the energy estimate of the continuous system, with
    ``M = 1 + |a|^2 + |a_x| + |b|^2 + |B|^2 + 3/2`` (sup norms).
    """
    mesh = ops.mesh
    c = ops.coeffs
    ax = np.gradient(c.a, mesh.dx, axis=1)
    m = 1.0 + np.max(c.a**2) + np.max(np.abs(ax)) + np.max(c.b**2) + np.max(c.B**2) + 1.5
    return float(2.0 * m * mesh.horizon)
