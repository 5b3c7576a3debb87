"""Named potentials and initial data used by the CLI and the tests."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ArrayC, ArrayR, FREE, InitialData, PotentialSpec


def benchmark_V(t, x):
    return 1.0 / (2.0 + np.sin(np.pi * x))


def benchmark_A1(t, x):
    return 1.0 / (1.0 + np.cos(np.pi * x) ** 2)


# sup |V| = 1 at sin = -1, sup |A1| = 1 at cos = 0
BENCHMARK_POTENTIAL = PotentialSpec(V=benchmark_V, A1=benchmark_A1, v_max=1.0, a1_max=1.0,
                                    time_independent=True)


def _benchmark_phi0(x):
    return np.stack([np.sin(np.pi * x) + np.sin(2 * np.pi * x), np.cos(np.pi * x)], axis=1)


def _benchmark_phi0_prime(x):
    return np.stack([np.pi * np.cos(np.pi * x) + 2 * np.pi * np.cos(2 * np.pi * x),
                     -np.pi * np.sin(np.pi * x)], axis=1)


BENCHMARK_INITIAL = InitialData(_benchmark_phi0, _benchmark_phi0_prime)


def _oscillation_phi0(x):
    return np.stack([np.sin(np.pi * (x + 1)), np.cos(np.pi * (x + 1))], axis=1)


def _oscillation_phi0_prime(x):
    return np.stack([np.pi * np.cos(np.pi * (x + 1)), -np.pi * np.sin(np.pi * (x + 1))], axis=1)


# smooth data used for the oscillation traces
OSCILLATION_INITIAL = InitialData(_oscillation_phi0, _oscillation_phi0_prime)


def _zero(x):
    return np.zeros((np.size(x), 2))


ZERO_INITIAL = InitialData(_zero, _zero)


@dataclass(frozen=True)
class PlaneWave:
    """Exact free solution ``exp(i mu x - i lam t) w`` with ``lam = sqrt(mu^2+1)/eps``.

    ``w`` is the unit eigenvector of ``(mu sigma1 + sigma3)/eps`` for ``+lam``.
    """

    l: int
    a: float
    b: float
    epsilon: float

    @property
    def mu(self) -> float:
        return 2 * np.pi * self.l / (self.b - self.a)

    @property
    def lam(self) -> float:
        return float(np.sqrt(self.mu**2 + 1.0) / self.epsilon)

    @property
    def w(self) -> ArrayC:
        r = np.sqrt(self.mu**2 + 1.0)
        # (sigma3 + mu sigma1) w = r w
        v = np.array([self.mu, r - 1.0]) if self.mu != 0 else np.array([1.0, 0.0])
        return (v / np.linalg.norm(v)).astype(np.complex128)

    def exact(self, t: float, x: ArrayR) -> ArrayC:
        phase = np.exp(1j * self.mu * (np.asarray(x) - self.a) - 1j * self.lam * t)
        return phase[:, None] * self.w[None, :]

    def initial(self) -> InitialData:
        return InitialData(lambda x: self.exact(0.0, x),
                           lambda x: 1j * self.mu * self.exact(0.0, x))


POTENTIALS = {"paper-benchmark": BENCHMARK_POTENTIAL, "free": FREE}
_PLANE = re.compile(r"^plane-wave\(\s*(-?\d+)\s*\)$")
INITIAL_NAMES = ("paper-benchmark", "oscillation", "zero", "plane-wave(l)")


def potential_preset(name: str) -> PotentialSpec:
    try:
        return POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential preset {name!r}; expected one of "
                         f"{', '.join(POTENTIALS)}") from None


def initial_preset(name: str, a: float, b: float, epsilon: float) -> InitialData:
    if name == "paper-benchmark":
        return BENCHMARK_INITIAL
    if name == "oscillation":
        return OSCILLATION_INITIAL
    if name == "zero":
        return ZERO_INITIAL
    m = _PLANE.match(name)
    if m:
        return PlaneWave(int(m.group(1)), a, b, epsilon).initial()
    raise ValueError(f"unknown initial preset {name!r}; expected one of {', '.join(INITIAL_NAMES)}")


def exact_solution(name: str, a: float, b: float, epsilon: float,
                   pot_name: str) -> Optional[Callable[[float, ArrayR], ArrayC]]:
    """Closed-form solution for a preset pair, when one exists."""
    m = _PLANE.match(name)
    if pot_name == "free" and m:
        return PlaneWave(int(m.group(1)), a, b, epsilon).exact
    if name == "zero":
        return lambda t, x: np.zeros((np.size(x), 2), dtype=np.complex128)
    return None
