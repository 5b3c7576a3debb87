"""Strang time-splitting Fourier pseudospectral solver used as the reference.

Both sub-flows are exact: the constant-coefficient part
``(mu sigma1 + sigma3)/eps`` is exponentiated in closed form per Fourier
mode, and ``V - A1 sigma1`` is exponentiated pointwise.  Each step applies
half a potential flow, a full kinetic flow and another half potential flow,
with potentials sampled at the step midpoint.
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .core import (
    ArrayC,
    ArrayR,
    Discretization,
    InitialData,
    PotentialSpec,
    as_spinor_field,
    build_grid,
    sample_initial,
    wavenumbers,
)
from .fieldio import FieldFormatError, read_field, write_field
from .linalg import ModeSpectrum

CACHE_ENV = "DIRAC_FD_CACHE"
MIN_M_REF = 1024
BASE_TAU_REF = 1e-4


@dataclass(frozen=True)
class ReferenceConfig:
    M_ref: int
    tau_ref: float

    def __post_init__(self):
        if int(self.M_ref) != self.M_ref or self.M_ref <= 0 or self.M_ref % 2:
            raise ValueError(f"M_ref must be a positive even integer, got {self.M_ref}")
        object.__setattr__(self, "M_ref", int(self.M_ref))
        if not self.tau_ref > 0:
            raise ValueError(f"tau_ref must be positive, got {self.tau_ref}")

    @classmethod
    def default_for(cls, epsilon: float, study_M: Iterable[int] = ()) -> "ReferenceConfig":
        """Desk-scale defaults: ``tau_ref = 1e-4 sqrt(eps)`` and the smallest
        ``M_ref >= max(1024, max M)`` that every study ``M`` divides."""
        Ms = [int(m) for m in study_M]
        lcm = math.lcm(*Ms) if Ms else 2
        target = max([MIN_M_REF] + Ms)
        M_ref = lcm * math.ceil(target / lcm)
        if M_ref % 2:
            M_ref *= 2
        return cls(M_ref=M_ref, tau_ref=BASE_TAU_REF * math.sqrt(epsilon))

    def check_grid(self, M: int) -> int:
        """Subsampling stride from the reference grid to a study grid of ``M`` nodes."""
        if self.M_ref % M:
            raise ValueError(f"M_ref={self.M_ref} is not a multiple of study M={M}")
        return self.M_ref // M

    def discretization(self, a: float, b: float, T: float, epsilon: float) -> Discretization:
        """Reference grid; ``tau_ref`` is shrunk slightly if needed so it divides ``T``."""
        steps = max(1, math.ceil(T / self.tau_ref - 1e-9))
        tau = T / steps if T > 0 else self.tau_ref
        return Discretization(a=a, b=b, M=self.M_ref, tau=tau, T=T, epsilon=epsilon)


def kinetic_propagator(mu: ArrayR, dt: float, epsilon: float) -> ArrayC:
    """``exp(-i dt (mu sigma1 + sigma3)/eps)`` for each wavenumber, shape (M, 2, 2)."""
    mu = np.asarray(mu, dtype=np.float64)
    lam = np.sqrt(mu**2 + 1.0) / epsilon
    c = np.cos(dt * lam)
    s = np.sin(dt * lam) / (lam * epsilon)  # sin(dt lam)/lam times the 1/eps of A
    out = np.empty(mu.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = c - 1j * s
    out[..., 1, 1] = c + 1j * s
    out[..., 0, 1] = out[..., 1, 0] = -1j * s * mu
    return out


def kinetic_half_step(spec: ModeSpectrum, dt: float, disc: Discretization) -> ModeSpectrum:
    """Exact flow of the constant-coefficient part over ``dt``, mode by mode."""
    prop = kinetic_propagator(spec.mu, dt, disc.epsilon)
    coeffs = np.einsum("jab,jb->ja", prop, spec.coefficients)
    return ModeSpectrum(coeffs, spec.mu)


def potential_propagator(v: ArrayR, a: ArrayR, dt: float) -> tuple[ArrayC, ArrayC]:
    """Diagonal and off-diagonal entries of ``exp(-i dt v)[cos(dt a) I + i sin(dt a) sigma1]``."""
    phase = np.exp(-1j * dt * np.asarray(v))
    return phase * np.cos(dt * np.asarray(a)), phase * (1j * np.sin(dt * np.asarray(a)))


def potential_step(field: ArrayC, t_mid: float, dt: float, pot: PotentialSpec,
                   disc: Discretization) -> ArrayC:
    u = as_spinor_field(field, disc.M)
    v, a = pot.sample(t_mid, build_grid(disc))
    d, o = potential_propagator(v, a, dt)
    out = np.empty_like(u)
    out[:, 0] = d * u[:, 0] + o * u[:, 1]
    out[:, 1] = o * u[:, 0] + d * u[:, 1]
    return out


class _Splitter:
    """Strang loop on component-major ``(2, M)`` arrays."""

    def __init__(self, disc: Discretization, pot: PotentialSpec):
        self.disc, self.pot = disc, pot
        self.x = build_grid(disc)
        K = kinetic_propagator(wavenumbers(disc), disc.tau, disc.epsilon)
        self.K = np.ascontiguousarray(K.transpose(1, 2, 0))

    def potential(self, u, t_mid, dt):
        v, a = self.pot.sample(t_mid, self.x)
        d, o = potential_propagator(v, a, dt)
        return np.stack([d * u[0] + o * u[1], o * u[0] + d * u[1]])

    def kinetic(self, u):
        U = np.fft.fft(u, axis=1)
        K = self.K
        U = np.stack([K[0, 0] * U[0] + K[0, 1] * U[1], K[1, 0] * U[0] + K[1, 1] * U[1]])
        return np.fft.ifft(U, axis=1)

    def run(self, u):
        tau, N = self.disc.tau, self.disc.steps
        if N == 0:
            return u
        if not self.pot.time_independent:
            for n in range(N):
                tm = (n + 0.5) * tau
                u = self.potential(u, tm, 0.5 * tau)
                u = self.kinetic(u)
                u = self.potential(u, tm, 0.5 * tau)
            return u
        # consecutive half steps merge into one full potential step
        v, a = self.pot.sample(0.0, self.x)
        hd, ho = potential_propagator(v, a, 0.5 * tau)
        fd, fo = potential_propagator(v, a, tau)
        u = np.stack([hd * u[0] + ho * u[1], ho * u[0] + hd * u[1]])
        for n in range(N):
            u = self.kinetic(u)
            d, o = (fd, fo) if n < N - 1 else (hd, ho)
            u = np.stack([d * u[0] + o * u[1], o * u[0] + d * u[1]])
        return u


def reference_solve(init: InitialData, disc_ref: Discretization, pot: PotentialSpec) -> ArrayC:
    """Evolve to ``disc_ref.T`` on the reference grid with step ``disc_ref.tau``."""
    u0 = sample_initial(init, disc_ref)
    u = _Splitter(disc_ref, pot).run(np.ascontiguousarray(u0.T))
    return np.ascontiguousarray(u.T)


def restrict(field: ArrayC, M: int) -> ArrayC:
    """Subsample a reference field onto a study grid of ``M`` nodes."""
    u = as_spinor_field(field)
    if u.shape[0] % M:
        raise ValueError(f"cannot restrict {u.shape[0]} nodes to {M}")
    return np.ascontiguousarray(u[:: u.shape[0] // M])


# --------------------------------------------------------------------------
# disk cache
# --------------------------------------------------------------------------


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "dirac_fd"


class ReferenceCache:
    """Reference fields on disk, keyed by a parameter mapping.

    The key should contain eps, the potential and initial preset names, T,
    M_ref and tau_ref; values are formatted with ``repr`` so floats are exact.
    """

    def __init__(self, directory: Optional[Path] = None, enabled: bool = True):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.enabled = enabled

    @staticmethod
    def key_string(params: Mapping[str, object]) -> str:
        return ";".join(f"{k}={params[k]!r}" for k in sorted(params))

    def path_for(self, params: Mapping[str, object]) -> Path:
        digest = hashlib.sha256(self.key_string(params).encode()).hexdigest()[:24]
        return self.directory / f"ref-{digest}.dfd"

    def get_or_compute(self, params: Mapping[str, object], compute: Callable[[], ArrayC]) -> ArrayC:
        if not self.enabled:
            return compute()
        path = self.path_for(params)
        if path.exists():
            try:
                return read_field(path)
            except (OSError, FieldFormatError):
                pass  # unreadable entries are recomputed and overwritten
        field = compute()
        sidecar = {k: repr(params[k]) for k in sorted(params)}
        write_field(path, field, sidecar)
        return field
