"""Frozen-coefficient von Neumann analysis of the four schemes.

For the three-level schemes each Fourier mode obeys
``xi^2 - 2 i tau theta xi - 1 = 0`` with a scheme-specific ``theta``; the
mode is bounded iff ``|tau theta| <= 1``.  CNFD has a unitary (Cayley)
amplification matrix for every mode and every ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Discretization, PotentialSpec
from .schemes import SchemeKind

UNIT_SLACK = 1e-12


@dataclass(frozen=True)
class StabilityReport:
    tau_max: float  # math.inf when unbounded
    max_amplification: float
    critical_mode: int

    @property
    def stable(self) -> bool:
        return self.max_amplification <= 1.0 + UNIT_SLACK


def tau_max_closed_form(kind, epsilon: float, h: float, v: float, a: float) -> float:
    kind = SchemeKind.parse(kind)
    v, a = abs(v), abs(a)
    if kind is SchemeKind.CNFD:
        return math.inf
    if kind is SchemeKind.SIFD1:
        return epsilon * h
    if kind is SchemeKind.SIFD2:
        return math.inf if v + a == 0 else 1.0 / (v + a)
    eh = epsilon * h
    return eh / (v * eh + math.sqrt(h * h + (a * eh + 1.0) ** 2))


def tau_max(kind, disc: Discretization, pot: PotentialSpec) -> float:
    """Largest stable step from the closed-form bounds, using the potential
    sup-norms as frozen coefficients."""
    return tau_max_closed_form(kind, disc.epsilon, disc.h, pot.v_max, pot.a1_max)


def _modes(disc: Discretization):
    l = np.arange(-disc.M // 2, disc.M // 2)
    return l, 2 * np.pi * l / disc.length


def mode_theta(kind, disc: Discretization, v0: float, a10: float) -> np.ndarray:
    """``theta`` for both sign branches, shape (2, M), modes ordered ``-M/2 .. M/2-1``."""
    kind = SchemeKind.parse(kind)
    _, mu = _modes(disc)
    eps, h = disc.epsilon, disc.h
    sin = np.sin(mu * h)
    if kind is SchemeKind.LFFD:
        root = np.sqrt(h * h + (-a10 * eps * h + sin) ** 2) / (eps * h)
        return np.stack([-v0 + root, -v0 - root])
    if kind is SchemeKind.SIFD1:
        r = sin / (eps * h)
        return np.stack([r, -r])
    if kind is SchemeKind.SIFD2:
        return np.stack([np.full_like(mu, -v0 + a10), np.full_like(mu, -v0 - a10)])
    raise ValueError("CNFD has no three-level mode quadratic")


def quadratic_roots(tau_theta):
    """Both roots of ``xi^2 - 2 i (tau theta) xi - 1 = 0``."""
    tt = np.asarray(tau_theta, dtype=np.complex128)
    disc = np.sqrt(1.0 - tt * tt)
    return 1j * tt + disc, 1j * tt - disc


def cnfd_amplification(disc: Discretization, v0: float, a10: float) -> np.ndarray:
    """Spectral radius of the Crank-Nicolson amplification matrix per mode."""
    _, mu = _modes(disc)
    eps, tau = disc.epsilon, disc.tau
    s = np.sin(mu * disc.h) / (eps * disc.h)
    H = np.zeros((mu.size, 2, 2), dtype=np.complex128)
    H[:, 0, 0] = 1.0 / eps + v0
    H[:, 1, 1] = -1.0 / eps + v0
    H[:, 0, 1] = H[:, 1, 0] = s - a10
    eye = np.eye(2)
    G = np.linalg.solve(1j / tau * eye - 0.5 * H, 1j / tau * eye + 0.5 * H)
    return np.abs(np.linalg.eigvals(G)).max(axis=1)


def amplification_spectrum(kind, disc: Discretization, v0: float = 0.0, a10: float = 0.0) -> StabilityReport:
    """Mode scan at step ``disc.tau`` with constant potentials ``v0``, ``a10``."""
    kind = SchemeKind.parse(kind)
    l, _ = _modes(disc)
    if kind is SchemeKind.CNFD:
        amp = cnfd_amplification(disc, v0, a10)
    else:
        r1, r2 = quadratic_roots(disc.tau * mode_theta(kind, disc, v0, a10))
        amp = np.maximum(np.abs(r1), np.abs(r2)).max(axis=0)
    # modes on the unit circle count as exact ties; ties go to the smallest |l|,
    # then to the positive mode
    key = np.where(amp <= 1.0 + UNIT_SLACK, 1.0, amp)
    order = np.lexsort((-l, np.abs(l), -key))
    k = order[0]
    return StabilityReport(
        tau_max=tau_max_closed_form(kind, disc.epsilon, disc.h, v0, a10),
        max_amplification=float(amp[k]),
        critical_mode=int(l[k]),
    )


def _disc_with_tau(disc: Discretization, tau: float) -> Discretization:
    # T = tau keeps the step-count invariant trivially satisfied
    return disc.replace(tau=tau, T=tau)


def empirical_tau_max(kind, disc: Discretization, v0: float = 0.0, a10: float = 0.0,
                      rtol: float = 1e-10, tau_cap: float = 1e6) -> float:
    """Bisect the mode scan for the stable/unstable transition in ``tau``.

    Returns ``math.inf`` if every step up to ``tau_cap`` is stable.
    """
    def stable(tau):
        return amplification_spectrum(kind, _disc_with_tau(disc, tau), v0, a10).stable

    lo, hi = 0.0, 1e-6
    while stable(hi):
        lo, hi = hi, hi * 2
        if hi > tau_cap:
            return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
