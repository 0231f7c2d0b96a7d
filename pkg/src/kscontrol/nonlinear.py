"""Fixed-point loop for the nonlinear perturbation system and its closed-loop check.

The perturbation ``(y, z) = (u - u_bar, v - v_bar)`` obeys::

    y_t - y_xx = -(y (z + v_bar))_x - (u_bar z)_x          [+ cut h, density]
    z_t - z_xx = ((z + 2 v_bar) z)_x + y_x                 [+ cut h, chemical]

which is the linear system with ``a = z + v_bar``, ``b = z + 2 v_bar``,
``B = u_bar``. The loop freezes ``z`` as ``eta``, solves the penalized linear
problem, and feeds the new ``z`` back. Inside each step the frozen ``eta`` is
read one time level behind the implicit coefficients, which is exactly how the
closed-loop march lags ``z``; at a fixed point both schemes coincide.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spl

from .errors import ConvergenceError, DivergenceError, HypothesisError, StabilityError
from .hum import DEFAULT_KERNEL_PEAK, PenalizedProblem, solve_penalized
from .linear_pde import (BLOWUP, CoefficientSet, assemble_step_operators, injection_vector,
                         level_matrix, stack, unstack)
from .mesh import check_field, norm

NONNEG_TOL = 1e-8


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 1.0
    max_iters: int = 20
    rel_tol: float = 1e-6
    eps: float = 1e-8
    smallness_bound: float = 1e-2
    actuation: str = "chemical"
    kernel_peak: float = DEFAULT_KERNEL_PEAK
    cg_tol: float = 1e-10
    cg_max_iter: int = 500
    eta_cap: float = 1.0

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class ClosedLoopReport:
    terminal_norm: float
    min_u: float
    nonneg_ok: bool
    y: np.ndarray
    z: np.ndarray


@dataclass
class NonlinearControlResult:
    h: np.ndarray
    iterates: int
    history: list
    inner_terminal_norms: list
    closed_loop_terminal_norm: float
    min_u: float
    converged: bool
    eta: np.ndarray
    cap_hits: int = 0
    initial_norm: float = 0.0
    last_solution: object = field(default=None, repr=False)
    closed_loop: object = field(default=None, repr=False)

    def summary(self):
        return {
            "iterates": self.iterates,
            "converged": self.converged,
            "history": list(self.history),
            "inner_terminal_norms": list(self.inner_terminal_norms),
            "closed_loop_terminal_norm": self.closed_loop_terminal_norm,
            "relative_closed_loop_terminal_norm": (
                self.closed_loop_terminal_norm / self.initial_norm if self.initial_norm else 0.0
            ),
            "min_u": self.min_u,
            "cap_hits": self.cap_hits,
        }


def lagged(field_):
    """Shift a space-time field one level forward in time (row 0 is repeated)."""
    out = np.empty_like(field_)
    out[0] = field_[0]
    out[1:] = field_[:-1]
    return out


def coefficients_for(traj, eta, actuation):
    """``a = eta + v_bar``, ``b = eta + 2 v_bar``, ``B = u_bar`` with ``eta`` lagged one level."""
    return CoefficientSet.from_trajectory(traj.u_bar, traj.v_bar, lagged(eta), actuation)


def _pair_norm(y, z, mesh):
    return float(np.hypot(norm(y, mesh), norm(z, mesh)))


def fixed_point_control(y0, z0, traj, cfg, weights, cutoff):
    """Damped Picard iteration on the frozen ``z`` of the nonlinear system.

    Raises
    ------
    HypothesisError
        If the data exceed ``cfg.smallness_bound`` (L2 norm) or ``u_bar`` is
        not bounded away from 0.
    ConvergenceError
        If ``cfg.max_iters`` is reached; the partial result is attached as
        ``exc.result``.
    """
    mesh = traj.mesh
    y0 = check_field(y0, mesh, "y0")
    z0 = check_field(z0, mesh, "z0")
    size = _pair_norm(y0, z0, mesh)
    if size > cfg.smallness_bound:
        raise HypothesisError(
            f"initial perturbation norm {size:.3e} exceeds smallness bound {cfg.smallness_bound:.3e}"
        )
    if np.min(traj.u_bar) <= 0:
        raise HypothesisError(f"u_bar must stay positive, min = {np.min(traj.u_bar):.3e}")

    eta = mesh.zeros_spacetime()
    history, inner_norms = [], []
    cap_hits = 0
    sol = None
    converged = False
    for _ in range(cfg.max_iters):
        ops = assemble_step_operators(coefficients_for(traj, eta, cfg.actuation), cutoff, mesh)
        problem = PenalizedProblem(cfg.eps, weights, ops, y0, z0, cfg.kernel_peak)
        sol = solve_penalized(problem, cfg.cg_tol, cfg.cg_max_iter)
        inner_norms.append(sol.terminal_norm)
        new = (1.0 - cfg.damping) * eta + cfg.damping * sol.state.z
        if np.max(np.abs(new)) > cfg.eta_cap:
            cap_hits += 1
            new = np.clip(new, -cfg.eta_cap, cfg.eta_cap)
        scale = norm(new, mesh, "L2_spacetime")
        diff = norm(new - eta, mesh, "L2_spacetime")
        history.append(diff / scale if scale > 0 else 0.0)
        eta = new
        if history[-1] < cfg.rel_tol:
            converged = True
            break

    check = closed_loop_verify(sol.h, y0, z0, traj, cutoff, cfg.actuation)
    result = NonlinearControlResult(
        h=sol.h, iterates=len(history), history=history, inner_terminal_norms=inner_norms,
        closed_loop_terminal_norm=check.terminal_norm, min_u=check.min_u, converged=converged,
        eta=eta, cap_hits=cap_hits, initial_norm=size, last_solution=sol, closed_loop=check,
    )
    if not converged:
        exc = ConvergenceError(
            f"fixed point not reached in {cfg.max_iters} iterations (last change {history[-1]:.3e})",
            history,
        )
        exc.result = result
        raise exc
    return result


def closed_loop_verify(h, y0, z0, traj, cutoff, actuation="chemical"):
    """Run the nonlinear perturbation system with the frozen control ``h``.

    Linearly implicit: ``z`` inside the nonlinear coefficients is taken from
    the previous level, everything else is implicit.
    """
    mesh = traj.mesh
    y0 = check_field(y0, mesh, "y0")
    z0 = check_field(z0, mesh, "z0")
    cut = check_field(getattr(cutoff, "values", cutoff), mesh, "cutoff")
    inj = injection_vector(mesh, cut, actuation)
    Y, Z = mesh.zeros_spacetime(), mesh.zeros_spacetime()
    Y[0], Z[0] = y0, z0
    state = stack(y0, z0)
    inner = slice(1, -1)
    for n in range(mesh.nt):
        zn = Z[n, inner]
        vb = traj.v_bar[n + 1, inner]
        mat = level_matrix(mesh, zn + vb, zn + 2.0 * vb, traj.u_bar[n + 1, inner])
        try:
            lu = spl.splu(mat)
        except RuntimeError as exc:
            raise StabilityError(f"closed-loop step at t={mesh.t[n + 1]:.4g} is singular") from exc
        state = lu.solve(state + mesh.dt * inj * np.tile(h[n, inner], 2))
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > BLOWUP:
            raise DivergenceError(f"closed loop diverged at t={mesh.t[n + 1]:.4g}", mesh.t[n + 1])
        Y[n + 1], Z[n + 1] = unstack(state, mesh)
    min_u = float(np.min(Y + traj.u_bar))
    return ClosedLoopReport(
        terminal_norm=_pair_norm(Y[-1], Z[-1], mesh),
        min_u=min_u,
        nonneg_ok=min_u >= -NONNEG_TOL,
        y=Y,
        z=Z,
    )
