"""Logarithmic change of variables between the chemical concentration and ``v``.

``v = (ln c)_x`` turns the singular-sensitivity model into the working system.
Going back, ``(ln c)_t = v_x - v^2 + u`` is integrated in time at every node.
In one space dimension every ``v`` is a gradient, so no curl-free condition
needs checking.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError
from .mesh import Mesh1D, check_field, check_spacetime, gradient
from .weights import LOG_MAX

DIRECTIONS = ("to_normalized", "to_physical")


@dataclass(frozen=True)
class PhysicalParams:
    D: float = 1.0
    chi: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (self.D > 0 and self.chi > 0 and self.mu > 0):
            raise ValueError(f"D, chi, mu must be positive, got {self.D}, {self.chi}, {self.mu}")

    @property
    def time_factor(self):
        return self.chi * self.mu / self.D

    @property
    def space_factor(self):
        return np.sqrt(self.chi * self.mu) / self.D

    @property
    def v_factor(self):
        return np.sqrt(self.chi / self.mu)


@dataclass
class ChemicalField:
    c: np.ndarray
    strictly_positive: bool
    overflow_count: int = 0


def chemical_to_gradient(c0, mesh):
    """``(ln c0)_x`` with the mesh gradient.

    Raises
    ------
    DomainError
        If some entry of ``c0`` is not positive.
    """
    c0 = check_field(c0, mesh, "c0")
    bad = np.flatnonzero(~(c0 > 0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"c0 must be positive; c0[{i}] = {c0[i]!r} at x = {mesh.x[i]:.6g}")
    return gradient(np.log(c0), mesh)


def reconstruct_chemical(u, v, c0, mesh):
    """``c(x, t_n) = c0(x) exp(int_0^{t_n} (v_x - v^2 + u) ds)`` with trapezoid in time.

    The exponent is clamped at the overflow limit; the clamp count is reported.
    """
    u = check_spacetime(u, mesh, "u")
    v = check_spacetime(v, mesh, "v")
    c0 = check_field(c0, mesh, "c0")
    if np.any(c0 < 0):
        raise DomainError("c0 must be nonnegative")
    rate = gradient(v, mesh) - v**2 + u
    expo = cumulative_trapezoid(rate, dx=mesh.dt, axis=0, initial=0.0)
    over = int(np.count_nonzero(expo > LOG_MAX))
    c = c0[None, :] * np.exp(np.minimum(expo, LOG_MAX))
    return ChemicalField(c, bool(np.all(c > 0)), over)


def physical_scaling(params, direction, mesh, fields=None):
    """Rescale the mesh extents and the ``v`` field between physical and working units.

    ``t = (chi mu / D) t_phys``, ``x = (sqrt(chi mu) / D) x_phys`` and
    ``v = sqrt(chi / mu) v_phys``; ``u`` is unchanged. ``fields`` is a dict
    whose ``"v"`` entry (if any) is scaled.

    Returns
    -------
    (Mesh1D, dict)
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    fields = dict(fields or {})
    if direction == "to_normalized":
        ft, fx, fv = params.time_factor, params.space_factor, params.v_factor
    else:
        ft, fx, fv = 1.0 / params.time_factor, 1.0 / params.space_factor, 1.0 / params.v_factor
    out = {k: np.asarray(f, dtype=float) * fv if k == "v" else np.asarray(f, dtype=float)
           for k, f in fields.items()}
    return Mesh1D(mesh.nx, mesh.nt, mesh.length * fx, mesh.horizon * ft), out
