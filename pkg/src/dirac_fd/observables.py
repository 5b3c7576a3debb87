"""Discrete mass, energy, densities and the error metrics used in the tables."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ArrayC, ArrayR, Discretization, PotentialSpec, as_spinor_field, build_grid

# below this the reference current is treated as identically zero
CURRENT_FLOOR = 1e-14


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    mass: float
    energy: Optional[float]
    rho: ArrayR
    current: ArrayR


@dataclass(frozen=True)
class ErrorTriple:
    e_phi: float
    e_rho: float
    e_J: Optional[float]  # None when the reference current vanishes


def mass(field: ArrayC, disc: Discretization) -> float:
    u = as_spinor_field(field, disc.M)
    return float(disc.h * np.sum(u.real**2 + u.imag**2))


def density(field: ArrayC) -> ArrayR:
    u = as_spinor_field(field)
    return np.sum(u.real**2 + u.imag**2, axis=1)


def current(field: ArrayC, epsilon: float) -> ArrayR:
    """``J = Phi^* sigma1 Phi / epsilon = 2 Re(conj(phi1) phi2) / epsilon``."""
    u = as_spinor_field(field)
    return 2.0 * np.real(np.conj(u[:, 0]) * u[:, 1]) / epsilon


def discrete_energy(field: ArrayC, disc: Discretization, pot: PotentialSpec) -> float:
    """Grid energy built on the same central difference the schemes use.

    Only meaningful for time-independent potentials.  The assembled sum is
    real analytically; its imaginary part is checked and dropped.
    """
    if not pot.time_independent:
        raise ValueError("discrete energy is defined only for time-independent potentials")
    u = as_spinor_field(field, disc.M)
    eps, h = disc.epsilon, disc.h
    v, a = pot.sample(0.0, build_grid(disc))
    dx = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * h)
    c0, c1 = np.conj(u[:, 0]), np.conj(u[:, 1])
    kinetic = -1j / eps * (c0 * dx[:, 1] + c1 * dx[:, 0])
    mass_term = (np.abs(u[:, 0]) ** 2 - np.abs(u[:, 1]) ** 2) / eps
    potential = v * (np.abs(u[:, 0]) ** 2 + np.abs(u[:, 1]) ** 2)
    magnetic = -a * (c0 * u[:, 1] + c1 * u[:, 0])
    terms = kinetic + mass_term + potential + magnetic
    total = h * np.sum(terms)
    scale = h * np.sum(np.abs(kinetic) + np.abs(mass_term) + np.abs(potential) + np.abs(magnetic))
    if abs(total.imag) > 1e-12 * max(scale, abs(total.real)):
        raise ArithmeticError(f"energy sum has imaginary part {total.imag:.3e}")
    return float(total.real)


def observe(field: ArrayC, t: float, disc: Discretization, pot: PotentialSpec) -> ObservableRecord:
    u = as_spinor_field(field, disc.M)
    energy = discrete_energy(u, disc, pot) if pot.time_independent else None
    return ObservableRecord(t=t, mass=mass(u, disc), energy=energy,
                            rho=density(u), current=current(u, disc.epsilon))


def error_metrics(numeric: ArrayC, reference: ArrayC, disc: Discretization,
                  epsilon: Optional[float] = None) -> ErrorTriple:
    """l2 wave-function error, l1 density error and relative l1 current error."""
    eps = disc.epsilon if epsilon is None else epsilon
    u = as_spinor_field(numeric, disc.M)
    r = as_spinor_field(reference, disc.M)
    diff = u - r
    e_phi = float(np.sqrt(disc.h * np.sum(diff.real**2 + diff.imag**2)))
    e_rho = float(disc.h * np.sum(np.abs(density(u) - density(r))))
    j_ref = current(r, eps)
    denom = np.sum(np.abs(j_ref))
    e_J = None if denom < CURRENT_FLOOR else float(np.sum(np.abs(current(u, eps) - j_ref)) / denom)
    return ErrorTriple(e_phi, e_rho, e_J)
