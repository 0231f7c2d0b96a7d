"""Penalized HUM: minimal weighted control with a terminal penalty, solved by CG.

For terminal adjoint data ``q`` the candidate control is
``h = cut * K * psi(q)`` (``psi`` the actuated adjoint component, ``K`` the
control kernel). The Gramian

    G q = (terminal state driven by h from zero data) + eps * q

is symmetric positive definite because the adjoint march is the exact
transpose of the forward march. Solving ``G q = -U_free(T)`` gives the
optimal control and ``U(T) = -eps * q``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError
from .linear_pde import adjoint_march, forward_solve, forward_terminal, stack, unstack
from .mesh import check_field, norm

DEFAULT_KERNEL_PEAK = 1e5


@dataclass(frozen=True)
class PenalizedProblem:
    """One instance of the penalized control problem.

    ``kernel_peak`` is the maximum of the control kernel ``K = W * kernel_peak / max W``.
    """

    eps: float
    weights: object
    ops: object
    y0: np.ndarray
    z0: np.ndarray
    kernel_peak: float = DEFAULT_KERNEL_PEAK

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        mesh = self.ops.mesh
        if self.weights.mesh != mesh:
            raise ValueError("weights and step operators live on different meshes")
        check_field(self.y0, mesh, "y0")
        check_field(self.z0, mesh, "z0")

    @property
    def mesh(self):
        return self.ops.mesh

    @property
    def cutoff(self):
        return self.ops.cutoff

    @property
    def kernel(self):
        # cached on the instance; frozen dataclass so go through __dict__
        k = self.__dict__.get("_kernel")
        if k is None:
            k = self.weights.control_kernel(self.kernel_peak)
            object.__setattr__(self, "_kernel", k)
        return k


@dataclass
class ControlSolution:
    h: np.ndarray
    q_star: tuple
    terminal_norm: float
    free_terminal_norm: float
    initial_norm: float
    cost_terms: dict
    cg_iterations: int
    cg_residual: float
    residual_history: list = field(default_factory=list)
    optimality_defect: float = 0.0
    eps: float = 0.0
    weight_params: dict = field(default_factory=dict)
    state: object = None

    @property
    def cost_ratio(self):
        if self.initial_norm == 0:
            return 0.0
        return (self.cost_terms["penalty"] + self.cost_terms["control_energy"]) / self.initial_norm**2

    def summary(self):
        return {
            "eps": self.eps,
            "cg_iterations": self.cg_iterations,
            "cg_residual": self.cg_residual,
            "terminal_norm": self.terminal_norm,
            "relative_terminal_norm": self.terminal_norm / self.initial_norm if self.initial_norm else 0.0,
            "free_terminal_norm": self.free_terminal_norm,
            "cost_terms": dict(self.cost_terms),
            "cost_ratio": self.cost_ratio,
            "optimality_defect": self.optimality_defect,
            "weight_params": dict(self.weight_params),
        }


def _dot(u, v, mesh):
    # stacked interior vectors; boundary values are zero so this is the trapezoid L2 pairing
    return mesh.dx * float(np.dot(u, v))


def control_from_costates(problem, costates):
    """``h[n] = K[n] * cut * (actuated costate at level n)`` as a full space-time field."""
    ops = problem.ops
    h = problem.mesh.zeros_spacetime()
    for n in range(problem.mesh.nt + 1):
        h[n] = problem.kernel[n] * ops.inject_transpose(costates[n])
    return h


def _apply(problem, q):
    costates = adjoint_march(problem.ops, q)
    h = control_from_costates(problem, costates)
    zero = np.zeros(problem.ops.size)
    return forward_terminal(problem.ops, zero, h) + problem.eps * q, h, costates


def gramian_apply(q, problem):
    """Apply the Gramian to stacked interior terminal adjoint data ``q``."""
    return _apply(problem, np.asarray(q, dtype=float))[0]


def control_energy(problem, h, costates):
    """Weighted energy ``int cut^2 K |psi|^2`` with the same left-endpoint time rule as the march."""
    mesh = problem.mesh
    pairing = 0.0
    for n in range(mesh.nt):
        pairing += np.dot(h[n], problem.ops.inject_transpose(costates[n]))
    return float(mesh.dt * mesh.dx * pairing)


def conjugate_gradient(apply, b, inner, tol=1e-10, max_iter=500):
    """CG for an SPD operator with residual replacement.

    When the recursively updated residual drops below ``tol * |b|`` the true
    residual ``b - A x`` is recomputed; if it is still too large the iteration
    restarts from the current ``x``. All operator applications count toward
    ``max_iter``.

    Returns ``(x, iterations, history)``; ``history`` holds relative residuals
    and its last entry is a true residual.
    """
    x = np.zeros_like(b)
    bnorm = np.sqrt(inner(b, b))
    if bnorm == 0:
        return x, 0, [0.0]
    r = b.copy()
    history = [1.0]
    it = 0
    while it < max_iter:
        p = r.copy()
        rr = inner(r, r)
        while it < max_iter:
            Ap = apply(p)
            it += 1
            pAp = inner(p, Ap)
            if pAp <= 0:
                raise ConvergenceError(f"operator not positive definite (p.Ap = {pAp:.3e})", history)
            alpha = rr / pAp
            x += alpha * p
            r -= alpha * Ap
            rr_new = inner(r, r)
            history.append(np.sqrt(rr_new) / bnorm)
            if history[-1] <= tol:
                break
            p = r + (rr_new / rr) * p
            rr = rr_new
        else:
            break
        r = b - apply(x)
        it += 1
        history.append(np.sqrt(inner(r, r)) / bnorm)
        if history[-1] <= tol:
            return x, it, history
    raise ConvergenceError(
        f"CG did not reach {tol:.1e} in {max_iter} iterations (last {history[-1]:.3e})", history
    )


def solve_penalized(problem, cg_tol=1e-10, max_iter=500):
    """Compute the penalized control for ``problem``.

    Raises
    ------
    ConvergenceError
        If CG misses ``cg_tol`` within ``max_iter`` iterations, or if the
        terminal optimality condition ``U(T) = -eps q`` is violated.
    """
    mesh, ops = problem.mesh, problem.ops
    U0 = stack(problem.y0, problem.z0)
    U_free = forward_terminal(ops, U0)
    inner = lambda u, v: _dot(u, v, mesh)
    q, iters, history = conjugate_gradient(
        lambda p: _apply(problem, p)[0], -U_free, inner, cg_tol, max_iter
    )
    costates = adjoint_march(ops, q)
    h = control_from_costates(problem, costates)
    state = forward_solve(ops, problem.y0, problem.z0, h)
    yT, zT = state.terminal
    UT = stack(yT, zT)

    terminal = float(np.hypot(norm(yT, mesh), norm(zT, mesh)))
    free = float(np.sqrt(inner(U_free, U_free)))
    defect = float(np.sqrt(inner(UT + problem.eps * q, UT + problem.eps * q)))
    # U(T) + eps q equals minus the CG residual; allow for rounding in the re-run
    if defect > 10.0 * cg_tol * free + 1e-13 * (free + terminal):
        raise ConvergenceError(
            f"terminal optimality violated: |U(T) + eps q| = {defect:.3e}", history
        )
    cost = {
        "control_energy": control_energy(problem, h, costates),
        "penalty": terminal**2 / problem.eps,
    }
    return ControlSolution(
        h=h,
        q_star=unstack(q, mesh),
        terminal_norm=terminal,
        free_terminal_norm=free,
        initial_norm=float(np.hypot(norm(problem.y0, mesh), norm(problem.z0, mesh))),
        cost_terms=cost,
        cg_iterations=iters,
        cg_residual=history[-1],
        residual_history=history,
        optimality_defect=defect,
        eps=problem.eps,
        weight_params={**problem.weights.params, "kernel_peak": problem.kernel_peak},
        state=state,
    )


def eps_sweep(problem, eps_values, cg_tol=1e-10, max_iter=500):
    """Solve for each eps; return the solutions and the log-log slope of terminal norm vs eps."""
    sols = [solve_penalized(replace(problem, eps=float(e)), cg_tol, max_iter) for e in eps_values]
    norms = np.array([s.terminal_norm for s in sols])
    slope = float("nan")
    if len(sols) >= 2 and np.all(norms > 0):
        slope = float(np.polyfit(np.log10(eps_values), np.log10(norms), 1)[0])
    return sols, slope
