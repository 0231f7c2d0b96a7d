"""Free trajectory of the uncontrolled system around the boundary level ``p_bar``.

Works with the shifted unknowns ``w = u - p_bar`` and ``v``::

    w_t - w_xx = -(w v)_x - p_bar v_x
    v_t - v_xx = (v^2)_x + w_x

with ``w = v = 0`` at both ends. Diffusion is implicit and every first-order
term is taken from the previous time level, so each step is two tridiagonal
solves with the same factorization.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .errors import DivergenceError, StabilityError
from .linear_pde import BLOWUP
from .mesh import check_field, gradient, norm, trapezoid

# explicit first-order terms: dt * c^2 must stay below this (von Neumann bound
# for lagged central advection against implicit diffusion)
EXPLICIT_LIMIT = 2.0


class SmallDataWarning(UserWarning):
    """Initial data exceed the smallness level the theory asks for."""


@dataclass(frozen=True)
class TrajectoryParams:
    p_bar: float
    initial_w: np.ndarray
    initial_v: np.ndarray
    smallness: float = 1e-2

    def __post_init__(self):
        if not self.p_bar > 0:
            raise ValueError(f"p_bar must be positive, got {self.p_bar}")
        for name in ("initial_w", "initial_v"):
            f = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(f)):
                raise ValueError(f"{name} has non-finite entries")
            if f[0] != 0.0 or f[-1] != 0.0:
                raise ValueError(f"{name} must vanish at both boundary nodes")

    @property
    def nonnegative_data(self):
        return bool(np.all(self.initial_w >= 0) and np.all(self.initial_v >= 0))


@dataclass
class TrajectoryResult:
    mesh: object
    p_bar: float
    u_bar: np.ndarray
    v_bar: np.ndarray
    energy_series: np.ndarray
    min_u_minus_pbar: float
    min_v: float
    initial_h1: float
    small_data: bool

    def summary(self):
        diffs = np.diff(self.energy_series)
        return {
            "p_bar": self.p_bar,
            "min_u_minus_pbar": self.min_u_minus_pbar,
            "min_v": self.min_v,
            "initial_h1": self.initial_h1,
            "small_data": self.small_data,
            "energy_initial": float(self.energy_series[0]),
            "energy_final": float(self.energy_series[-1]),
            "max_energy_increase": float(max(diffs.max(), 0.0)) if diffs.size else 0.0,
            "steady_state_preserved": bool(
                np.all(self.u_bar == self.p_bar) and np.all(self.v_bar == 0.0)
            ),
        }


def energy(w, v, p_bar, mesh):
    """``E = 1/2 int (p w^2 + p^2 v^2 + w_x^2 + p v_x^2)``, row-wise for space-time input."""
    p = p_bar
    wx, vx = gradient(w, mesh), gradient(v, mesh)
    integrand = p * w**2 + p * p * v**2 + wx**2 + p * vx**2
    return 0.5 * trapezoid(integrand, dx=mesh.dx, axis=-1)


def solve_free_trajectory(params, mesh):
    """March the free system and return ``u_bar = w + p_bar``, ``v_bar`` and monitors.

    Raises
    ------
    StabilityError
        If the lagged first-order terms are too large for the step size.
    DivergenceError
        If the state exceeds the blow-up threshold.
    """
    w = check_field(params.initial_w, mesh, "initial_w").copy()
    v = check_field(params.initial_v, mesh, "initial_v").copy()
    p = float(params.p_bar)

    h1 = float(np.hypot(norm(w, mesh, "H1_space"), norm(v, mesh, "H1_space")))
    small = h1 <= params.smallness
    if not small:
        warnings.warn(
            f"initial H1 norm {h1:.3e} exceeds smallness level {params.smallness:.3e}",
            SmallDataWarning, stacklevel=2,
        )
    speed = max(p, 1.0) + 2.0 * np.max(np.abs(v)) + np.max(np.abs(w))
    if mesh.dt * speed**2 > EXPLICIT_LIMIT:
        raise StabilityError(
            f"dt * c^2 = {mesh.dt * speed**2:.3g} exceeds {EXPLICIT_LIMIT}; reduce dt"
        )

    n = mesh.n_interior
    lu = spl.splu((sp.identity(n, format="csc") - mesh.dt * mesh.d2_interior).tocsc())
    W, V = mesh.zeros_spacetime(), mesh.zeros_spacetime()
    W[0], V[0] = w, v
    dt = mesh.dt
    for k in range(mesh.nt):
        rw = w - dt * (gradient(w * v, mesh) + p * gradient(v, mesh))
        rv = v + dt * (gradient(v * v, mesh) + gradient(w, mesh))
        w, v = mesh.zeros(), mesh.zeros()
        w[1:-1] = lu.solve(rw[1:-1])
        v[1:-1] = lu.solve(rv[1:-1])
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))) or max(
            np.max(np.abs(w)), np.max(np.abs(v))
        ) > BLOWUP:
            raise DivergenceError(f"trajectory diverged at t={mesh.t[k + 1]:.4g}", mesh.t[k + 1])
        W[k + 1], V[k + 1] = w, v

    return TrajectoryResult(
        mesh=mesh,
        p_bar=p,
        u_bar=W + p,
        v_bar=V,
        energy_series=energy(W, V, p, mesh),
        min_u_minus_pbar=float(W.min()),
        min_v=float(V.min()),
        initial_h1=h1,
        small_data=small,
    )


def steady_trajectory(mesh, p_bar=1.0):
    """The constant solution ``(p_bar, 0)`` without marching."""
    zero = mesh.zeros_spacetime()
    return TrajectoryResult(mesh, float(p_bar), zero + p_bar, zero.copy(),
                            np.zeros(mesh.nt + 1), 0.0, 0.0, 0.0, True)


@dataclass
class NonnegativityReport:
    min_value: float
    violation: tuple | None

    @property
    def ok(self):
        return self.violation is None


def check_nonnegativity(field, tol=1e-10):
    """Minimum of a field and the first ``(t_index, x_index)`` with value below ``-tol``."""
    field = np.asarray(field, dtype=float)
    bad = np.argwhere(field < -tol)
    first = tuple(int(i) for i in bad[0]) if bad.size else None
    return NonnegativityReport(float(field.min()), first)
