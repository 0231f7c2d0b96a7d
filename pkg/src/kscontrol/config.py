"""JSON run configuration: schema, defaults and validation with key paths."""

import json
import typing
from dataclasses import MISSING, dataclass, field, fields, is_dataclass

import numpy as np

from .linear_pde import ACTUATIONS
from .mesh import Mesh1D

FAMILIES = ("zero", "sine")


class ConfigError(ValueError):
    """Malformed configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass
class ProfileSpec:
    """``amplitude * sin(mode * pi * x / L)`` or the zero field."""

    family: str = "zero"
    amplitude: float = 0.0
    mode: int = 1

    def validate(self, path):
        if self.family not in FAMILIES:
            raise ConfigError(f"{path}.family", f"unknown family {self.family!r}; expected {FAMILIES}")
        if self.mode < 1:
            raise ConfigError(f"{path}.mode", "must be >= 1")

    def build(self, mesh):
        if self.family == "zero" or self.amplitude == 0:
            return mesh.zeros()
        f = self.amplitude * np.sin(self.mode * np.pi * mesh.x / mesh.length)
        f[0] = f[-1] = 0.0
        return f


@dataclass
class MeshBlock:
    nx: int = 101
    nt: int = 200
    length: float = 1.0
    horizon: float = 0.1

    def build(self):
        return Mesh1D(self.nx, self.nt, self.length, self.horizon)


@dataclass
class TrajectoryBlock:
    p_bar: float = 1.0
    w0: ProfileSpec = field(default_factory=ProfileSpec)
    v0: ProfileSpec = field(default_factory=ProfileSpec)
    smallness: float = 1e-2


@dataclass
class WeightsBlock:
    m: int = 4
    k: float = 12.0
    s: typing.Optional[float] = None
    lam: typing.Optional[float] = field(default=None, metadata={"key": "lambda"})
    omega: typing.List[float] = field(default_factory=lambda: [0.3, 0.7])
    omega1: typing.List[float] = field(default_factory=lambda: [0.35, 0.65])
    omega0: typing.List[float] = field(default_factory=lambda: [0.4, 0.6])
    auto_sweep: bool = True
    max_exponent: int = 3
    rho_scale: typing.Optional[float] = None
    kernel_peak: float = 1e5


@dataclass
class ControlBlock:
    eps: float = 1e-8
    eps_sweep: typing.Optional[typing.List[float]] = None
    cg_tol: float = 1e-10
    max_iter: int = 500
    actuation: str = "chemical"
    y0: ProfileSpec = field(default_factory=lambda: ProfileSpec("sine", 1e-2, 1))
    z0: ProfileSpec = field(default_factory=ProfileSpec)


@dataclass
class FixedPointBlock:
    damping: float = 1.0
    max_iters: int = 20
    rel_tol: float = 1e-6
    smallness_bound: float = 1e-2


@dataclass
class PhysicalBlock:
    D: float = 1.0
    chi: float = 1.0
    mu: float = 1.0


@dataclass
class AuditBlock:
    samples: int = 50
    carleman_samples: int = 20


@dataclass
class RunConfig:
    mesh: MeshBlock = field(default_factory=MeshBlock)
    trajectory: TrajectoryBlock = field(default_factory=TrajectoryBlock)
    weights: WeightsBlock = field(default_factory=WeightsBlock)
    control: ControlBlock = field(default_factory=ControlBlock)
    fixed_point: FixedPointBlock = field(default_factory=FixedPointBlock)
    physical: PhysicalBlock = field(default_factory=PhysicalBlock)
    audit: AuditBlock = field(default_factory=AuditBlock)
    output: str = "out"
    seed: int = 0


def _key(f):
    return f.metadata.get("key", f.name)


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if origin in (list, typing.List):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        (inner,) = typing.get_args(tp)
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if is_dataclass(tp):
        return from_dict(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    return value


def from_dict(cls, data, path=""):
    """Build dataclass ``cls`` from a JSON object, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {_key(f): f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown key")
    kwargs = {}
    for key, f in known.items():
        sub = f"{path}.{key}" if path else key
        if key in data:
            kwargs[f.name] = _coerce(data[key], hints[f.name], sub)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(sub, "missing required key")
    return cls(**kwargs)


def to_dict(obj):
    """Inverse of :func:`from_dict` (JSON-ready, original key names)."""
    if is_dataclass(obj):
        return {_key(f): to_dict(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def _interval(iv, path, lo, hi, strict=True):
    if len(iv) != 2:
        raise ConfigError(path, "an interval needs exactly two numbers")
    a, b = iv
    ok = (lo < a < b < hi) if strict else (lo <= a < b <= hi)
    if not ok:
        raise ConfigError(path, f"({a}, {b}) must lie inside ({lo}, {hi})")


def validate(cfg):
    """Check value ranges and interval nesting; raise ``ConfigError`` on the first problem."""
    m = cfg.mesh
    if m.nx < 8 or m.nt < 8:
        raise ConfigError("mesh", "need nx >= 8 and nt >= 8")
    if not (m.length > 0 and m.horizon > 0):
        raise ConfigError("mesh", "length and horizon must be positive")
    if cfg.trajectory.p_bar <= 0:
        raise ConfigError("trajectory.p_bar", "must be positive")
    cfg.trajectory.w0.validate("trajectory.w0")
    cfg.trajectory.v0.validate("trajectory.v0")
    w = cfg.weights
    _interval(w.omega, "weights.omega", 0.0, m.length)
    _interval(w.omega1, "weights.omega1", w.omega[0], w.omega[1])
    _interval(w.omega0, "weights.omega0", w.omega1[0], w.omega1[1], strict=False)
    if not w.auto_sweep and (w.s is None or w.lam is None):
        raise ConfigError("weights", "s and lambda are required when auto_sweep is false")
    if w.kernel_peak <= 0:
        raise ConfigError("weights.kernel_peak", "must be positive")
    c = cfg.control
    if c.actuation not in ACTUATIONS:
        raise ConfigError("control.actuation", f"expected one of {ACTUATIONS}")
    if c.eps <= 0:
        raise ConfigError("control.eps", "must be positive")
    if c.eps_sweep is not None and (not c.eps_sweep or min(c.eps_sweep) <= 0):
        raise ConfigError("control.eps_sweep", "needs at least one positive value")
    c.y0.validate("control.y0")
    c.z0.validate("control.z0")
    fp = cfg.fixed_point
    if not 0 < fp.damping <= 1:
        raise ConfigError("fixed_point.damping", "must lie in (0, 1]")
    ph = cfg.physical
    if min(ph.D, ph.chi, ph.mu) <= 0:
        raise ConfigError("physical", "D, chi, mu must be positive")
    if cfg.audit.samples < 1 or cfg.audit.carleman_samples < 1:
        raise ConfigError("audit", "sample counts must be >= 1")
    return cfg


def load_config(path=None):
    if path is None:
        return validate(RunConfig())
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    return validate(from_dict(RunConfig, data))
