"""Line-oriented ``key = value`` study configuration.

Blank lines and ``#`` comments are ignored.  Numeric values accept plain
arithmetic (``1/16``, ``4**(-2/3)``, ``1e-3``); ``epsilon`` takes a
comma-separated list of such expressions.

Keys and defaults::

    study          spatial_convergence | temporal_convergence | single_run |
                   stability_sweep | conservation_check          (required)
    scheme         lffd | sifd1 | sifd2 | cnfd                   (required)
    epsilon        list of values in (0, 1]                      (required)
    a, b           domain ends                                   -1, 1
    T              final time                                    2
    h0             base mesh of convergence and sweep studies    1/16
    tau0           base step of temporal studies                 1/40
    levels         number of refinement columns                  5
    h              frozen mesh (temporal studies, single runs)   1/32768 for
                   temporal studies, required for single runs
    tau            frozen step (spatial studies, single runs)    spatial: see
                   tau_scale; required for single runs
    tau_scale      spatial frozen step is tau_scale*min(1, eps^1.5)   1e-4
    coupling       none | sifd_coupled                           none
    potential      paper-benchmark | free                        paper-benchmark
    initial        paper-benchmark | oscillation | zero | plane-wave(l)
                                                                 paper-benchmark
    metric         phi | rho | J  (quantity in the main table)   phi
    M_ref, tau_ref reference grid overrides                      see reference.py
    trace_x        record (t, Re phi1) at the node nearest x     off
    probes         number of conservation samples                20
    v0, a10        frozen coefficients for stability sweeps      potential sup norms
    name           output file stem                              the study kind
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Optional

from .core import Discretization
from .presets import POTENTIALS, initial_preset
from .schemes import SchemeKind

STUDIES = ("spatial_convergence", "temporal_convergence", "single_run",
           "stability_sweep", "conservation_check")
COUPLINGS = ("none", "sifd_coupled")
METRICS = ("phi", "rho", "J")
DEFAULT_TEMPORAL_H = 1.0 / 32768
DEFAULT_TAU_SCALE = 1e-4


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def eval_number(text: str) -> float:
    """Evaluate a plain arithmetic expression without ``eval``."""
    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and type(node.value) in (int, float):
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](walk(node.operand))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        value = float(walk(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


@dataclass(frozen=True)
class StudyConfig:
    study: str
    scheme: SchemeKind
    epsilons: tuple[float, ...]
    epsilon_labels: tuple[str, ...] = ()
    a: float = -1.0
    b: float = 1.0
    T: float = 2.0
    h0: float = 1.0 / 16
    tau0: float = 1.0 / 40
    levels: int = 5
    h: Optional[float] = None
    tau: Optional[float] = None
    tau_scale: float = DEFAULT_TAU_SCALE
    coupling: str = "none"
    potential: str = "paper-benchmark"
    initial: str = "paper-benchmark"
    metric: str = "phi"
    M_ref: Optional[int] = None
    tau_ref: Optional[float] = None
    trace_x: Optional[float] = None
    probes: int = 20
    v0: Optional[float] = None
    a10: Optional[float] = None
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def stem(self) -> str:
        return self.name or self.study

    @property
    def length(self) -> float:
        return self.b - self.a


_FLOAT_KEYS = ("a", "b", "T", "h0", "tau0", "h", "tau", "tau_scale", "tau_ref", "trace_x", "v0", "a10")
_INT_KEYS = ("levels", "M_ref", "probes")
_STR_KEYS = ("study", "scheme", "coupling", "potential", "initial", "metric", "name")
KNOWN_KEYS = frozenset(_FLOAT_KEYS + _INT_KEYS + _STR_KEYS + ("epsilon",))


def _mesh_nodes(length: float, h: float, what: str) -> int:
    ratio = length / h
    M = round(ratio)
    if abs(ratio - M) > 1e-9 * ratio or M < 2 or M % 2:
        raise ConfigError(f"{what}: (b-a)/h = {ratio:g} must be an even integer")
    return M


def parse_config(text: str) -> StudyConfig:
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {raw[key][0]})")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        raw[key] = (lineno, value)

    values: dict[str, object] = {}
    for key, (lineno, value) in raw.items():
        try:
            if key in _FLOAT_KEYS:
                values[key] = eval_number(value)
            elif key in _INT_KEYS:
                number = eval_number(value)
                if number != int(number):
                    raise ValueError(f"{value!r} is not an integer")
                values[key] = int(number)
            elif key == "epsilon":
                labels = tuple(p.strip() for p in value.split(","))
                if any(not p for p in labels):
                    raise ValueError("empty entry in epsilon list")
                values["epsilons"] = tuple(eval_number(p) for p in labels)
                values["epsilon_labels"] = labels
            elif key == "scheme":
                values[key] = SchemeKind.parse(value)
            else:
                values[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None

    for key in ("study", "scheme", "epsilon"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    config = StudyConfig(**values)
    validate(config)
    return config


def validate(c: StudyConfig) -> None:
    if c.study not in STUDIES:
        raise ConfigError(f"study must be one of {', '.join(STUDIES)}, got {c.study!r}")
    if c.coupling not in COUPLINGS:
        raise ConfigError(f"coupling must be one of {', '.join(COUPLINGS)}, got {c.coupling!r}")
    if c.metric not in METRICS:
        raise ConfigError(f"metric must be one of {', '.join(METRICS)}, got {c.metric!r}")
    if c.potential not in POTENTIALS:
        raise ConfigError(f"potential must be one of {', '.join(POTENTIALS)}, got {c.potential!r}")
    try:
        initial_preset(c.initial, c.a, c.b, 1.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not c.epsilons:
        raise ConfigError("epsilon list is empty")
    for e in c.epsilons:
        if not 0 < e <= 1:
            raise ConfigError(f"epsilon must lie in (0, 1], got {e:g}")
    if not c.b > c.a:
        raise ConfigError("domain needs b > a")
    if not c.T >= 0:
        raise ConfigError("T must be non-negative")
    if c.levels < 1:
        raise ConfigError("levels must be at least 1")
    if c.probes < 1:
        raise ConfigError("probes must be at least 1")
    if not c.tau_scale > 0:
        raise ConfigError("tau_scale must be positive")
    if c.coupling == "sifd_coupled":
        if c.study != "temporal_convergence" or c.scheme not in (SchemeKind.SIFD1, SchemeKind.LFFD):
            raise ConfigError("coupling=sifd_coupled applies only to temporal studies of sifd1/lffd")
    if c.M_ref is not None and (c.M_ref < 2 or c.M_ref % 2):
        raise ConfigError("M_ref must be an even integer >= 2")
    if c.tau_ref is not None and not c.tau_ref > 0:
        raise ConfigError("tau_ref must be positive")

    if c.study in ("spatial_convergence", "stability_sweep"):
        for k in range(c.levels):
            _mesh_nodes(c.length, c.h0 / 2**k, f"level {k}")
    if c.study == "temporal_convergence":
        for eps in c.epsilons:
            for k in range(c.levels):
                M, tau = temporal_cell(c, eps, k)
                _check_steps(c.T, tau, f"level {k}")
    if c.study == "conservation_check" and len(c.epsilons) != 1:
        raise ConfigError("conservation_check takes exactly one epsilon")
    if c.study in ("single_run", "conservation_check"):
        if c.h is None or c.tau is None:
            raise ConfigError(f"{c.study} needs both h and tau")
        _mesh_nodes(c.length, c.h, "h")
        _check_steps(c.T, c.tau, "tau")
    if c.study == "spatial_convergence" and c.tau is not None:
        _check_steps(c.T, c.tau, "tau")


def _check_steps(T: float, tau: float, what: str) -> None:
    try:
        Discretization(a=0.0, b=1.0, M=2, tau=tau, T=T)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def coupling_delta(epsilon: float) -> float:
    """``delta(eps) = 2^-k`` for ``eps = 4^(-2k/3)``, i.e. ``eps^(3/4)``."""
    return epsilon ** 0.75


def spatial_tau(c: StudyConfig, epsilon: float) -> float:
    """Frozen step of a spatial study, nudged down so it divides ``T``."""
    if c.tau is not None:
        return c.tau
    nominal = c.tau_scale * min(1.0, epsilon ** 1.5)
    if c.T == 0:
        return nominal
    return c.T / math.ceil(c.T / nominal - 1e-9)


def spatial_cell(c: StudyConfig, epsilon: float, level: int) -> tuple[int, float]:
    return _mesh_nodes(c.length, c.h0 / 2**level, f"level {level}"), spatial_tau(c, epsilon)


def temporal_cell(c: StudyConfig, epsilon: float, level: int) -> tuple[int, float]:
    tau = c.tau0 / 4**level
    if c.coupling == "sifd_coupled":
        h = c.h0 if level == 0 else c.h0 / (4**level * coupling_delta(epsilon))
        return _mesh_nodes(c.length, h, f"level {level} (coupled mesh)"), tau
    h = c.h if c.h is not None else DEFAULT_TEMPORAL_H
    return _mesh_nodes(c.length, h, "h"), tau


def sweep_meshes(c: StudyConfig) -> list[float]:
    return [c.h0 / 2**k for k in range(c.levels)]
