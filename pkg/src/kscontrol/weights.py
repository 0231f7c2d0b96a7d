"""Carleman weight family on the grid, stored in log-space.

With ``tau(t) = t^m (T - t)^m``, ``c(x) = lam * (k R + rho(x))`` and
``A = k (m + 1) / m * lam * R`` (``R = max rho``)::

    phi  = (e^A - e^c) / tau          xi  = e^c / tau
    phi* = (e^A - e^{c*}) / tau       xi* = e^{c*} / tau,   c* = lam k R
    W    = exp(-4 s phi + 2 s phi*) xi^8
    V    = exp(-2 s phi + s phi*) xi^4      (so V^2 = W)

The raw values span hundreds of decades near t = 0 and t = T, so every table is
kept as a logarithm and exponentiated only where it is consumed.
"""

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import brentq

from .errors import ConstructionError, DimensionError, ParameterError

WEIGHT_NAMES = ("phi", "xi", "theta", "phi_star", "xi_star", "control_W", "obs_V")
LOG_MAX = 709.0  # exp overflows above this
LOG_TINY = -745.0  # exp underflows to 0 below this


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _check_interval(iv, name, lo, hi):
    a, b = map(float, iv)
    if not (lo <= a < b <= hi):
        raise ConstructionError(f"{name}=({a}, {b}) must satisfy {lo} <= a < b <= {hi}")
    return a, b


@dataclass(frozen=True)
class RhoProfile:
    """Normalized bump ``x^p (L - x)^q / max`` vanishing at both ends.

    ``min_slope`` is the smallest ``|rho'|`` over the interior grid nodes
    outside the closure of ``omega0``.
    """

    p: int
    q: int
    length: float
    omega0: tuple
    normalizer: float
    min_slope: float

    @property
    def critical_point(self):
        return self.p * self.length / (self.p + self.q)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x**self.p * (self.length - x) ** self.q / self.normalizer

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        L, p, q = self.length, self.p, self.q
        return x ** (p - 1) * (L - x) ** (q - 1) * (p * (L - x) - q * x) / self.normalizer


def build_rho(mesh, omega0, max_exponent=3):
    """Smallest exponents ``p, q <= max_exponent`` whose critical point lies in ``omega0``.

    Raises
    ------
    ConstructionError
        If no admissible pair exists; the message names the reachable range.
    """
    if max_exponent < 2:
        raise ConstructionError("max_exponent must be at least 2")
    L = mesh.length
    a0, b0 = _check_interval(omega0, "omega0", 0.0, L)
    if a0 <= 0.0 or b0 >= L:
        raise ConstructionError("omega0 must lie strictly inside (0, L)")
    pairs = sorted(product(range(1, max_exponent + 1), repeat=2), key=lambda pq: (sum(pq), pq[0]))
    for p, q in pairs:
        xc = p * L / (p + q)
        if a0 < xc < b0:
            break
    else:
        lo, hi = L / (1 + max_exponent), L * max_exponent / (1 + max_exponent)
        raise ConstructionError(
            f"no p, q <= {max_exponent} puts the critical point in omega0=({a0}, {b0}); "
            f"reachable critical points lie in [{lo:.4g}, {hi:.4g}]"
        )
    norm = xc**p * (L - xc) ** q
    prof = RhoProfile(p, q, L, (a0, b0), norm, 0.0)
    x = mesh.x[1:-1]
    outside = (x <= a0) | (x >= b0)
    slope = float(np.min(np.abs(prof.derivative(x[outside])))) if outside.any() else np.inf
    return RhoProfile(p, q, L, (a0, b0), norm, slope)


@dataclass(frozen=True)
class CutoffProfile:
    """C^2 bump: 1 on ``omega1``, 0 outside ``omega``, quintic smoothstep in between."""

    omega: tuple
    omega1: tuple
    values: np.ndarray


def build_cutoff(mesh, omega, omega1):
    a0, b0 = _check_interval(omega, "omega", 0.0, mesh.length)
    a1, b1 = _check_interval(omega1, "omega1", a0, b0)
    if not (a0 < a1 and b1 < b0):
        raise ConstructionError("omega1 must be compactly contained in omega")
    x = mesh.x
    vals = _smoothstep((x - a0) / (a1 - a0)) * _smoothstep((b0 - x) / (b0 - b1))
    return CutoffProfile((a0, b0), (a1, b1), vals)


def _tau(mesh, m):
    # built from integer step counts so tau(t_n) == tau(T - t_n) bit for bit
    n = np.arange(mesh.nt + 1)
    return ((n * mesh.dt) * ((mesh.nt - n) * mesh.dt)) ** m


def _profile_terms(rho_hat, s, lam, m, k, R):
    """Return ``c``, ``num = e^A - e^c``, ``num* = e^A - e^{c*}`` and ``G = 2 num - num*``.

    ``expm1`` keeps the differences accurate when ``lam * R`` is tiny.
    """
    c = lam * (k * R + R * rho_hat)
    c_star = lam * k * R
    A = k * (m + 1) / m * lam * R
    num = np.exp(c) * np.expm1(A - c)
    num_star = np.exp(c_star) * np.expm1(A - c_star)
    return c, num, num_star, 2.0 * num - num_star


@dataclass(frozen=True)
class WeightSet:
    """Weight parameters and their log-space tables over the mesh.

    ``rho_scale`` is the amplitude ``R`` of the profile that enters the weights
    (``R * rho``); the time endpoints hold ``+inf`` for ``phi``/``xi`` and
    ``-inf`` for ``log W``/``log V``.
    """

    mesh: object
    rho: RhoProfile
    s: float
    lam: float
    m: int
    k: float
    rho_scale: float
    log_phi: np.ndarray
    log_xi: np.ndarray
    phi_star: np.ndarray
    xi_star: np.ndarray
    log_W: np.ndarray
    log_V: np.ndarray
    margin: float
    underflow_count: int

    @property
    def params(self):
        return {"s": self.s, "lambda": self.lam, "m": self.m, "k": self.k,
                "rho_scale": self.rho_scale, "p": self.rho.p, "q": self.rho.q}

    @property
    def max_log_W(self):
        return float(np.max(self.log_W))

    def table(self, which):
        """Full space-time table of one weight, exponentiated with clamping."""
        if which == "phi":
            return np.exp(self.log_phi)
        if which == "xi":
            return np.exp(self.log_xi)
        if which == "theta":
            return np.exp(-self.s * np.exp(self.log_phi))
        if which == "phi_star":
            return np.broadcast_to(self.phi_star[:, None], self.mesh.spacetime_shape).copy()
        if which == "xi_star":
            return np.broadcast_to(self.xi_star[:, None], self.mesh.spacetime_shape).copy()
        if which == "control_W":
            return np.exp(np.minimum(self.log_W, LOG_MAX))
        if which == "obs_V":
            return np.exp(np.minimum(self.log_V, LOG_MAX))
        raise ValueError(f"unknown weight {which!r}; expected one of {WEIGHT_NAMES}")

    def control_kernel(self, peak=1.0):
        """``W`` rescaled so that its maximum over the grid equals ``peak``.

        Rescaling the kernel by a constant is the same as rescaling the
        penalization parameter, so this only fixes the units of ``eps``.
        """
        return peak * np.exp(self.log_W - self.max_log_W)


def build_weight_set(mesh, rho, s, lam, m=4, k=12.0, rho_scale=1.0):
    """Tabulate the weight family for ``rho_scale * rho`` on ``mesh``.

    Raises
    ------
    ParameterError
        If ``s, lam <= 1``, ``m <= 3``, ``k <= m`` or ``4 phi > 2 phi*`` fails
        somewhere (which happens when ``k / m`` is too small for the chosen
        ``lam * rho_scale``).
    """
    if not (s > 1 and lam > 1):
        raise ParameterError(f"need s > 1 and lambda > 1, got s={s}, lambda={lam}")
    if int(m) != m or m <= 3:
        raise ParameterError(f"m must be an integer > 3, got {m}")
    if not k > m:
        raise ParameterError(f"need k > m, got k={k}, m={m}")
    if not rho_scale > 0:
        raise ParameterError("rho_scale must be positive")
    m = int(m)
    rho_hat = rho(mesh.x)
    rho_hat[0] = rho_hat[-1] = 0.0
    c, num, num_star, G = _profile_terms(rho_hat, s, lam, m, k, rho_scale)
    margin = float(np.min(G))
    if margin <= 0:
        raise ParameterError(
            f"4 phi > 2 phi* fails (min of 2(e^A - e^c) - (e^A - e^c*) is {margin:.3e}); "
            "increase lambda or k / m"
        )
    tau = _tau(mesh, m)
    inner = slice(1, -1)
    shape = mesh.spacetime_shape
    log_tau = np.log(tau[inner])[:, None]

    log_phi = np.full(shape, np.inf)
    log_xi = np.full(shape, np.inf)
    log_W = np.full(shape, -np.inf)
    log_phi[inner] = np.log(num)[None, :] - log_tau
    log_xi[inner] = c[None, :] - log_tau
    log_W[inner] = -2.0 * s * G[None, :] / tau[inner][:, None] + 8.0 * log_xi[inner]
    log_V = 0.5 * log_W

    phi_star = np.full(mesh.nt + 1, np.inf)
    xi_star = np.full(mesh.nt + 1, np.inf)
    phi_star[inner] = num_star / tau[inner]
    xi_star[inner] = np.exp(c[0]) / tau[inner]
    underflow = int(np.count_nonzero(log_W[inner] < LOG_TINY))
    return WeightSet(mesh, rho, float(s), float(lam), m, float(k), float(rho_scale),
                     log_phi, log_xi, phi_star, xi_star, log_W, log_V, margin, underflow)


def mid_horizon_scale(mesh, rho, s, lam, m=4, k=12.0):
    """Profile amplitude ``R`` that puts the time peak of ``W`` at ``T / 2``.

    At fixed ``x`` the time profile of ``log W`` is stationary where
    ``tau = s G(x) / 4``. Choosing ``R`` so that this holds at ``tau(T/2)`` for
    the smallest ``G`` (at the maximum of ``rho``) gives the widest single-peak
    profile in time; smaller ``R`` splits it into two bumps near the endpoints.
    """
    tau_half = (0.5 * mesh.horizon) ** (2 * m)

    def gap(log_r):
        G = _profile_terms(np.array([1.0]), s, lam, m, k, np.exp(log_r))[3][0]
        if G <= 0:
            return -np.inf
        return np.log(s * G / 4.0) - np.log(tau_half)

    lo, hi = np.log(1e-200), 0.0
    if gap(lo) == -np.inf or gap(lo) > 0:
        raise ParameterError("cannot place the weight peak at mid-horizon; increase k / m")
    while gap(hi) < 0:
        hi += np.log(2.0)
        if hi > np.log(1e6):
            raise ParameterError("cannot place the weight peak at mid-horizon")
    return float(np.exp(brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)))


def parameter_grid(start=1.1, ratio=1.25, count=20):
    return start * ratio ** np.arange(count)


def select_weight_set(mesh, rho, m=4, k=12.0, grid=None, max_log=600.0):
    """Smallest ``(s, lam)`` on a geometric grid giving an admissible weight set.

    For each candidate the amplitude comes from :func:`mid_horizon_scale`; the
    candidate is accepted when ``4 phi > 2 phi*`` holds and the peak of
    ``log W`` stays below ``max_log``.
    """
    grid = parameter_grid() if grid is None else np.asarray(grid, dtype=float)
    for s in grid:
        for lam in grid:
            try:
                R = mid_horizon_scale(mesh, rho, s, lam, m, k)
                ws = build_weight_set(mesh, rho, s, lam, m, k, R)
            except ParameterError:
                continue
            if abs(ws.max_log_W) < max_log:
                return ws
    raise ParameterError(f"no (s, lambda) on the grid gives max log W below {max_log}")


def weight_at(ws, which, x_index, t_index):
    """Single table entry; ``control_W`` and ``obs_V`` are 0 at the time endpoints."""
    if which not in WEIGHT_NAMES:
        raise ValueError(f"unknown weight {which!r}; expected one of {WEIGHT_NAMES}")
    mesh = ws.mesh
    if not (0 <= x_index < mesh.nx and 0 <= t_index <= mesh.nt):
        raise DimensionError(f"index ({x_index}, {t_index}) outside the {mesh.nx} x {mesh.nt + 1} grid")
    if which == "phi":
        return float(np.exp(ws.log_phi[t_index, x_index]))
    if which == "xi":
        return float(np.exp(ws.log_xi[t_index, x_index]))
    if which == "theta":
        return float(np.exp(-ws.s * np.exp(ws.log_phi[t_index, x_index])))
    if which == "phi_star":
        return float(ws.phi_star[t_index])
    if which == "xi_star":
        return float(ws.xi_star[t_index])
    log = ws.log_W if which == "control_W" else ws.log_V
    return float(np.exp(min(log[t_index, x_index], LOG_MAX)))


def export_weights_csv(ws, path):
    """Write ``x, t, phi, xi, W, V`` rows in time-major order."""
    mesh = ws.mesh
    cols = [ws.table(name) for name in ("phi", "xi", "control_W", "obs_V")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "phi", "xi", "W", "V"])
        for n, t in enumerate(mesh.t):
            for i, x in enumerate(mesh.x):
                w.writerow([repr(float(x)), repr(float(t))] + [repr(float(c[n, i])) for c in cols])
