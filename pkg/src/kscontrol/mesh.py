"""Uniform space-time grid on (0, L) x (0, T) and the discrete calculus on it.

A ``Field`` is a 1D array with one value per spatial node and a space-time
field is a 2D array of shape ``(nt + 1, nx)`` (row ``n`` is the snapshot at
``t_n``). Both are plain numpy arrays; the helpers below check shapes against
the mesh.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .errors import DimensionError

NORM_KINDS = ("L2_space", "H1_space", "L2_spacetime")


@dataclass(frozen=True)
class Mesh1D:
    """Uniform grid with ``nx`` nodes on [0, length] and ``nt`` steps on [0, horizon]."""

    nx: int
    nt: int
    length: float = 1.0
    horizon: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.nt) != self.nt:
            raise ValueError("nx and nt must be integers")
        if self.nx < 8 or self.nt < 8:
            raise ValueError(f"need nx >= 8 and nt >= 8, got nx={self.nx}, nt={self.nt}")
        if not (self.length > 0 and self.horizon > 0):
            raise ValueError("length and horizon must be positive")

    @property
    def dx(self):
        return self.length / (self.nx - 1)

    @property
    def dt(self):
        return self.horizon / self.nt

    @property
    def n_interior(self):
        return self.nx - 2

    @cached_property
    def x(self):
        # i * dx rather than linspace so x[-1] == length exactly and x is uniform
        x = np.arange(self.nx) * self.dx
        x[-1] = self.length
        return x

    @cached_property
    def t(self):
        t = np.arange(self.nt + 1) * self.dt
        t[-1] = self.horizon
        return t

    @property
    def field_shape(self):
        return (self.nx,)

    @property
    def spacetime_shape(self):
        return (self.nt + 1, self.nx)

    def zeros(self):
        return np.zeros(self.nx)

    def zeros_spacetime(self):
        return np.zeros(self.spacetime_shape)

    def refined(self, space=2, time=2):
        """Mesh with ``space`` times finer dx and ``time`` times more steps."""
        return Mesh1D(space * (self.nx - 1) + 1, time * self.nt, self.length, self.horizon)

    def scaled(self, length, horizon):
        return Mesh1D(self.nx, self.nt, length, horizon)

    # Interior-node operators (homogeneous Dirichlet data eliminated).

    @cached_property
    def d2_interior(self):
        n = self.n_interior
        return (sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)) / self.dx**2).tocsr()

    @cached_property
    def d1_interior(self):
        n = self.n_interior
        return (sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n)) / (2.0 * self.dx)).tocsr()

    @cached_property
    def trapezoid_weights(self):
        w = np.full(self.nx, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


def check_field(f, mesh, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape != mesh.field_shape:
        raise DimensionError(f"{name} has shape {f.shape}, mesh expects {mesh.field_shape}")
    return f


def check_spacetime(f, mesh, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape != mesh.spacetime_shape:
        raise DimensionError(f"{name} has shape {f.shape}, mesh expects {mesh.spacetime_shape}")
    return f


def laplacian(f, mesh, dirichlet=None):
    """Second-order central Laplacian.

    Parameters
    ----------
    f : array_like, shape (nx,)
    mesh : Mesh1D
    dirichlet : (float, float), optional
        Values written into the two boundary nodes before differencing. When
        omitted the boundary values already in ``f`` are used.

    Returns
    -------
    ndarray
        Interior entries hold the difference quotient; boundary entries are 0.
    """
    f = check_field(f, mesh).copy()
    if dirichlet is not None:
        f[0], f[-1] = dirichlet
    out = np.zeros_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / mesh.dx**2
    return out


def gradient(f, mesh):
    """Central difference inside, one-sided second-order stencils at the ends.

    Works on a field or, row by row, on a space-time field.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != mesh.nx or f.ndim not in (1, 2):
        raise DimensionError(f"gradient: last axis must have {mesh.nx} entries, got {f.shape}")
    dx = mesh.dx
    g = np.empty_like(f)
    g[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * dx)
    g[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * dx)
    g[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * dx)
    return g


def inner(f, g, mesh):
    """Trapezoid L2(0, L) inner product of two fields."""
    f = check_field(f, mesh)
    g = check_field(g, mesh)
    return float(np.dot(mesh.trapezoid_weights, f * g))


def norm(f, mesh, kind="L2_space"):
    """Discrete L2 / H1 norm in space, or L2 norm over the space-time cylinder."""
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")
    f = np.asarray(f, dtype=float)
    if kind == "L2_spacetime":
        f = check_spacetime(f, mesh)
        inner_x = trapezoid(f**2, dx=mesh.dx, axis=1)
        return float(np.sqrt(trapezoid(inner_x, dx=mesh.dt)))
    f = check_field(f, mesh)
    sq = trapezoid(f**2, dx=mesh.dx)
    if kind == "H1_space":
        sq += trapezoid(gradient(f, mesh) ** 2, dx=mesh.dx)
    return float(np.sqrt(sq))


def space_norms(field, mesh, kind="L2_space"):
    """Per-time-node spatial norm of a space-time field."""
    field = check_spacetime(field, mesh)
    return np.array([norm(row, mesh, kind) for row in field])
