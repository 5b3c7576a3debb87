"""Grid, spinor-field and potential types shared by every solver module.

A spinor field is stored as a complex ``(M, 2)`` array: row ``j`` is the
two-component value at node ``x_j = a + j*h``.  The periodic duplicate node
``x_M`` is never stored; index ``M`` aliases index ``0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

Field = Callable[[float, ArrayR], ArrayLike]
SpinorFunction = Callable[[ArrayR], ArrayLike]


def _readonly(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


SIGMA1 = _readonly(np.array([[0, 1], [1, 0]], dtype=np.complex128))
SIGMA2 = _readonly(np.array([[0, -1j], [1j, 0]], dtype=np.complex128))
SIGMA3 = _readonly(np.array([[1, 0], [0, -1]], dtype=np.complex128))
IDENTITY2 = _readonly(np.eye(2, dtype=np.complex128))


@dataclass(frozen=True)
class PauliConstants:
    sigma1: NDArray = field(default=SIGMA1, repr=False)
    sigma2: NDArray = field(default=SIGMA2, repr=False)
    sigma3: NDArray = field(default=SIGMA3, repr=False)
    identity2: NDArray = field(default=IDENTITY2, repr=False)


PAULI = PauliConstants()

# relative slack for "T/tau is an integer"
_STEP_TOL = 1e-9


@dataclass(frozen=True)
class Discretization:
    """Uniform periodic grid on ``(a, b)`` with ``M`` nodes plus time stepping.

    ``T = 0`` is accepted and means "no steps"; ``T/tau`` must otherwise be
    an integer up to rounding.
    """

    a: float
    b: float
    M: int
    tau: float
    T: float
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.M) != self.M or self.M <= 0 or self.M % 2:
            raise ValueError(f"M must be a positive even integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.T < 0:
            raise ValueError(f"T must be non-negative, got {self.T}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > _STEP_TOL * max(1.0, ratio):
            raise ValueError(
                f"T/tau must be an integer, got T={self.T}, tau={self.tau} (ratio {ratio})"
            )

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def steps(self) -> int:
        return int(round(self.T / self.tau))

    def replace(self, **changes) -> "Discretization":
        params = dict(a=self.a, b=self.b, M=self.M, tau=self.tau, T=self.T, epsilon=self.epsilon)
        params.update(changes)
        return Discretization(**params)


def build_grid(disc: Discretization) -> ArrayR:
    """Nodes ``x_0 .. x_{M-1}``; ``x_M`` is the periodic image of ``x_0``."""
    return disc.a + disc.h * np.arange(disc.M, dtype=np.float64)


def periodic_index(j, M: int):
    """Map any node index (including -1, M, M+1) into ``0 .. M-1``."""
    return np.mod(j, M)


def as_spinor_field(values: ArrayLike, M: Optional[int] = None) -> ArrayC:
    u = np.ascontiguousarray(np.asarray(values, dtype=np.complex128))
    if u.ndim != 2 or u.shape[1] != 2:
        raise ValueError(f"spinor field must have shape (M, 2), got {u.shape}")
    if M is not None and u.shape[0] != M:
        raise ValueError(f"spinor field has {u.shape[0]} nodes, expected {M}")
    return u


def _eval_field(f: Field, t: float, x: ArrayR) -> ArrayR:
    return np.broadcast_to(np.asarray(f(t, x), dtype=np.float64), x.shape)


def _zero_field(t, x):
    return np.zeros_like(x)


@dataclass(frozen=True)
class PotentialSpec:
    """Electric potential ``V(t, x)`` and magnetic potential ``A1(t, x)``.

    ``v_max``/``a1_max`` are the sup-norm bounds used by the stability gates.
    Build through :meth:`from_fields` to have them estimated and checked.
    """

    V: Field = _zero_field
    A1: Field = _zero_field
    v_max: float = 0.0
    a1_max: float = 0.0
    time_independent: bool = True

    @classmethod
    def from_fields(
        cls,
        V: Field,
        A1: Field,
        disc: Discretization,
        time_independent: bool = False,
        v_max: Optional[float] = None,
        a1_max: Optional[float] = None,
        n_times: int = 256,
    ) -> "PotentialSpec":
        x = build_grid(disc)
        times = np.linspace(0.0, max(disc.T, 0.0), n_times)
        v_samples = np.array([_eval_field(V, t, x) for t in times])
        a_samples = np.array([_eval_field(A1, t, x) for t in times])
        if not (np.all(np.isfinite(v_samples)) and np.all(np.isfinite(a_samples))):
            raise ValueError("potentials produced non-finite samples")
        v_sup = float(np.abs(v_samples).max())
        a_sup = float(np.abs(a_samples).max())
        if v_max is None:
            v_max = v_sup
        elif v_max < v_sup * (1 - 1e-12):
            raise ValueError(f"v_max={v_max} is below the sampled sup {v_sup}")
        if a1_max is None:
            a1_max = a_sup
        elif a1_max < a_sup * (1 - 1e-12):
            raise ValueError(f"a1_max={a1_max} is below the sampled sup {a_sup}")
        if time_independent:
            drift = max(np.abs(v_samples - v_samples[0]).max(), np.abs(a_samples - a_samples[0]).max())
            if drift > 1e-12 * max(1.0, v_sup, a_sup):
                raise ValueError("potentials flagged time independent but vary in time")
        return cls(V=V, A1=A1, v_max=float(v_max), a1_max=float(a1_max),
                   time_independent=time_independent)

    def sample(self, t: float, x: ArrayR) -> tuple[ArrayR, ArrayR]:
        v = np.ascontiguousarray(_eval_field(self.V, t, x))
        a = np.ascontiguousarray(_eval_field(self.A1, t, x))
        return v, a


FREE = PotentialSpec()


@dataclass(frozen=True)
class InitialData:
    phi0: SpinorFunction
    phi0_prime: Optional[SpinorFunction] = None


def _sample_spinor(f: SpinorFunction, x: ArrayR) -> ArrayC:
    u = np.asarray(f(x), dtype=np.complex128)
    if u.shape == (2, x.size) and u.shape != (x.size, 2):
        u = u.T
    return as_spinor_field(u, x.size)


def sample_initial(init: InitialData, disc: Discretization) -> ArrayC:
    """Values ``phi0(x_j)`` on the grid, after checking periodicity of ``phi0``."""
    ends = _sample_spinor(init.phi0, np.array([disc.a, disc.b, disc.a]))[:2]
    scale = max(1.0, float(np.abs(ends).max()))
    if np.abs(ends[0] - ends[1]).max() > 1e-10 * scale:
        raise ValueError("initial data is not periodic on (a, b)")
    u = _sample_spinor(init.phi0, build_grid(disc))
    if not np.all(np.isfinite(u)):
        raise ValueError("initial data produced non-finite samples")
    return u


def wavenumbers(disc: Discretization) -> ArrayR:
    """``mu_l = 2*pi*l/(b-a)`` in standard FFT layout (l = 0..M/2-1, -M/2..-1)."""
    l = np.fft.fftfreq(disc.M, d=1.0 / disc.M)
    return 2 * np.pi * l / disc.length


def spectral_derivative(u: ArrayC, disc: Discretization) -> ArrayC:
    """Differentiate a periodic grid field by multiplying mode l by ``i*mu_l``."""
    mu = wavenumbers(disc)
    mu[disc.M // 2] = 0.0  # Nyquist mode has no odd derivative on the grid
    return np.fft.ifft(1j * mu[:, None] * np.fft.fft(u, axis=0), axis=0)


def derivative_of_initial(init: InitialData, disc: Discretization) -> ArrayC:
    if init.phi0_prime is not None:
        return _sample_spinor(init.phi0_prime, build_grid(disc))
    return spectral_derivative(sample_initial(init, disc), disc)
