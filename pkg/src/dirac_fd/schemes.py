"""The four finite-difference time steppers and the driver that runs them.

All schemes use the central difference ``(U[j+1] - U[j-1]) / (2h)`` with
periodic wrap-around.  LFFD, SIFD1 and SIFD2 are three-level schemes started
by :func:`first_step`; CNFD is two-level and solves a cyclic block-tridiagonal
system per step.

With time-independent potentials the LFFD, SIFD1 and CNFD loops run entirely
inside numba between probe points; otherwise each step is driven from Python
with freshly sampled potentials.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numba as nb
import numpy as np

from .core import (
    ArrayC,
    ArrayR,
    Discretization,
    InitialData,
    PotentialSpec,
    as_spinor_field,
    build_grid,
    derivative_of_initial,
    sample_initial,
    wavenumbers,
)
from .linalg import CyclicBlockTridiagonal, SingularSystemError, _cyclic_solve, invert_2x2
from .observables import ObservableRecord, observe

DIVERGENCE_FACTOR = 1e6


class SchemeKind(str, enum.Enum):
    LFFD = "lffd"
    SIFD1 = "sifd1"
    SIFD2 = "sifd2"
    CNFD = "cnfd"

    @property
    def three_level(self) -> bool:
        return self is not SchemeKind.CNFD

    @classmethod
    def parse(cls, name) -> "SchemeKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown scheme {name!r}; expected one of "
                             f"{', '.join(k.value for k in cls)}") from None


@dataclass
class EvolutionState:
    n: int
    t: float
    current: ArrayC
    previous: Optional[ArrayC] = None


@dataclass
class EvolutionResult:
    field: ArrayC
    steps_taken: int
    records: list[ObservableRecord] = field(default_factory=list)
    diverged_step: Optional[int] = None
    trace: Optional[ArrayC] = None

    @property
    def diverged(self) -> bool:
        return self.diverged_step is not None

    @property
    def status(self) -> str:
        return "diverged" if self.diverged else "ok"


# --------------------------------------------------------------------------
# first step
# --------------------------------------------------------------------------


def first_step(phi0: ArrayC, dphi0: ArrayC, disc: Discretization, pot: PotentialSpec) -> ArrayC:
    """Second-order start for the three-level schemes.

    ``sin(tau/eps)`` stands in for ``tau/eps`` so the start stays bounded
    uniformly in ``eps``; the same formula is used for every ``eps``.
    """
    u = as_spinor_field(phi0, disc.M)
    d = as_spinor_field(dphi0, disc.M)
    v, a = pot.sample(0.0, build_grid(disc))
    s = math.sin(disc.tau / disc.epsilon)
    tau = disc.tau
    out = np.empty_like(u)
    out[:, 0] = u[:, 0] - s * d[:, 1] - 1j * (s * u[:, 0] + tau * v * u[:, 0] - tau * a * u[:, 1])
    out[:, 1] = u[:, 1] - s * d[:, 0] - 1j * (-s * u[:, 1] + tau * v * u[:, 1] - tau * a * u[:, 0])
    return out


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _lffd_kernel(prev, cur, v, a, tau, eps, h, out):
    M = cur.shape[0]
    c = 1.0 / (2.0 * h)
    for j in range(M):
        jp = j + 1 if j + 1 < M else 0
        jm = j - 1 if j > 0 else M - 1
        u0, u1 = cur[j, 0], cur[j, 1]
        d0 = (cur[jp, 0] - cur[jm, 0]) * c
        d1 = (cur[jp, 1] - cur[jm, 1]) * c
        hu0 = (-1j * d1 + u0) / eps + v[j] * u0 - a[j] * u1
        hu1 = (-1j * d0 - u1) / eps + v[j] * u1 - a[j] * u0
        out[j, 0] = prev[j, 0] - 2j * tau * hu0
        out[j, 1] = prev[j, 1] - 2j * tau * hu1
    return 0


@nb.njit(cache=True)
def _sifd1_kernel(prev, cur, v, a, tau, eps, h, out):
    M = cur.shape[0]
    c = 1.0 / (2.0 * h)
    te = tau / eps
    for j in range(M):
        jp = j + 1 if j + 1 < M else 0
        jm = j - 1 if j > 0 else M - 1
        d0 = (cur[jp, 0] - cur[jm, 0]) * c
        d1 = (cur[jp, 1] - cur[jm, 1]) * c
        tv = tau * v[j]
        ta = tau * a[j]
        p0, p1 = prev[j, 0], prev[j, 1]
        h0 = (1j + tv + te) * p0 - ta * p1 - 2j * te * d1
        h1 = -ta * p0 + (1j + tv - te) * p1 - 2j * te * d0
        l00 = 1j - tv - te
        l11 = 1j - tv + te
        det = l00 * l11 - ta * ta
        scale = max(abs(l00), abs(l11), abs(ta))
        if not abs(det) > 1e-14 * scale * scale:
            return j + 1
        out[j, 0] = (l11 * h0 - ta * h1) / det
        out[j, 1] = (-ta * h0 + l00 * h1) / det
    return 0


@nb.njit(cache=True)
def _cnfd_rhs(cur, v, a, tau, eps, h, out):
    """Right-hand side ``(i/tau + H/2) Phi^n`` of the Crank-Nicolson system."""
    M = cur.shape[0]
    c = 1.0 / (4.0 * eps * h)
    it = 1j / tau
    for j in range(M):
        jp = j + 1 if j + 1 < M else 0
        jm = j - 1 if j > 0 else M - 1
        u0, u1 = cur[j, 0], cur[j, 1]
        s0 = cur[jp, 0] - cur[jm, 0]
        s1 = cur[jp, 1] - cur[jm, 1]
        out[j, 0] = it * u0 + 0.5 * ((1.0 / eps + v[j]) * u0 - a[j] * u1) - 1j * c * s1
        out[j, 1] = it * u1 + 0.5 * ((-1.0 / eps + v[j]) * u1 - a[j] * u0) - 1j * c * s0


@nb.njit(cache=True)
def _max_modulus(u):
    m = 0.0
    for j in range(u.shape[0]):
        r = math.sqrt(u[j, 0].real ** 2 + u[j, 0].imag ** 2 + u[j, 1].real ** 2 + u[j, 1].imag ** 2)
        if not r <= m:  # also catches NaN
            m = r
    return m


@nb.njit(cache=True)
def _run_three_level(kernel, prev, cur, v, a, tau, eps, h, nsteps, limit, trace_node, trace, n0):
    """Advance ``nsteps``; prev/cur are updated in place.

    Returns (steps done, kernel status, diverged flag).
    """
    buf = np.empty_like(cur)
    p, c, o = prev.copy(), cur.copy(), buf
    done = 0
    status = 0
    diverged = False
    for k in range(nsteps):
        status = kernel(p, c, v, a, tau, eps, h, o)
        if status != 0:
            break
        p, c, o = c, o, p
        done += 1
        if trace_node >= 0:
            trace[n0 + done, 0] = c[trace_node, 0]
            trace[n0 + done, 1] = c[trace_node, 1]
        m = _max_modulus(c)
        if not m <= limit:
            diverged = True
            break
    prev[:, :] = p
    cur[:, :] = c
    return done, status, diverged


@nb.njit(cache=True)
def _run_cnfd(Dinv, W, R, K, L0, Rlast, cur, v, a, tau, eps, h, nsteps, limit, trace_node, trace, n0):
    rhs = np.empty_like(cur)
    done = 0
    diverged = False
    for k in range(nsteps):
        _cnfd_rhs(cur, v, a, tau, eps, h, rhs)
        _cyclic_solve(Dinv, W, R, K, L0, Rlast, rhs, cur)
        done += 1
        if trace_node >= 0:
            trace[n0 + done, 0] = cur[trace_node, 0]
            trace[n0 + done, 1] = cur[trace_node, 1]
        if not _max_modulus(cur) <= limit:
            diverged = True
            break
    return done, diverged


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------


def _potentials(pot: PotentialSpec, disc: Discretization, t: float):
    return pot.sample(t, build_grid(disc))


def _check_state(state: EvolutionState, disc: Discretization, need_previous: bool):
    if need_previous and (state.previous is None or state.n < 1):
        raise ValueError("three-level schemes need n >= 1 and the previous level")
    cur = as_spinor_field(state.current, disc.M)
    prev = as_spinor_field(state.previous, disc.M) if need_previous else None
    return prev, cur


def step_lffd(state: EvolutionState, disc: Discretization, pot: PotentialSpec) -> ArrayC:
    prev, cur = _check_state(state, disc, True)
    v, a = _potentials(pot, disc, state.t)
    out = np.empty_like(cur)
    _lffd_kernel(prev, cur, v, a, disc.tau, disc.epsilon, disc.h, out)
    return out


def step_sifd1(state: EvolutionState, disc: Discretization, pot: PotentialSpec) -> ArrayC:
    prev, cur = _check_state(state, disc, True)
    v, a = _potentials(pot, disc, state.t)
    out = np.empty_like(cur)
    bad = _sifd1_kernel(prev, cur, v, a, disc.tau, disc.epsilon, disc.h, out)
    if bad:
        raise SingularSystemError(f"SIFD1 node matrix {bad - 1} is singular")
    return out


class Sifd2Operator:
    """Per-mode 2x2 matrices of the SIFD2 phase-space solve.

    Mode ``l`` satisfies ``A_l X_l = B_l P_l + 2 tau (G Phi^n)^_l`` with
    ``A_l = i I - s_l sigma1 - (tau/eps) sigma3``, ``B_l = i I + s_l sigma1 +
    (tau/eps) sigma3`` and ``s_l = tau sin(mu_l h) / (eps h)``.  Only
    ``A^{-1} B`` and ``2 tau A^{-1}`` are kept.
    """

    def __init__(self, M: int, h: float, tau: float, eps: float, mu: ArrayR):
        s = tau * np.sin(mu * h) / (eps * h)
        te = tau / eps
        lhs = np.zeros((M, 2, 2), dtype=np.complex128)
        lhs[:, 0, 0] = 1j - te
        lhs[:, 1, 1] = 1j + te
        lhs[:, 0, 1] = lhs[:, 1, 0] = -s
        rhs = np.zeros_like(lhs)
        rhs[:, 0, 0] = 1j + te
        rhs[:, 1, 1] = 1j - te
        rhs[:, 0, 1] = rhs[:, 1, 0] = s
        inv = invert_2x2(lhs)
        prop = inv @ rhs
        # component-major copies for fast elementwise products on (2, M) data
        self.prop = np.ascontiguousarray(prop.transpose(1, 2, 0))
        self.source = np.ascontiguousarray((2 * tau * inv).transpose(1, 2, 0))

    @classmethod
    def for_grid(cls, disc: Discretization) -> "Sifd2Operator":
        return cls(disc.M, disc.h, disc.tau, disc.epsilon, wavenumbers(disc))

    def advance(self, prev_hat, cur, v, a):
        """Return the transform of the next level; arrays are (2, M)."""
        g = np.empty_like(cur)
        g[0] = v * cur[0] - a * cur[1]
        g[1] = v * cur[1] - a * cur[0]
        g_hat = np.fft.fft(g, axis=1)
        P, S = self.prop, self.source
        out = np.empty_like(prev_hat)
        out[0] = P[0, 0] * prev_hat[0] + P[0, 1] * prev_hat[1] + S[0, 0] * g_hat[0] + S[0, 1] * g_hat[1]
        out[1] = P[1, 0] * prev_hat[0] + P[1, 1] * prev_hat[1] + S[1, 0] * g_hat[0] + S[1, 1] * g_hat[1]
        return out


def step_sifd2(state: EvolutionState, disc: Discretization, pot: PotentialSpec) -> ArrayC:
    prev, cur = _check_state(state, disc, True)
    v, a = _potentials(pot, disc, state.t)
    op = Sifd2Operator.for_grid(disc)
    new_hat = op.advance(np.fft.fft(prev.T, axis=1), np.ascontiguousarray(cur.T), v, a)
    return np.ascontiguousarray(np.fft.ifft(new_hat, axis=1).T)


def cnfd_system(M: int, h: float, tau: float, eps: float, v: ArrayR, a: ArrayR) -> CyclicBlockTridiagonal:
    """Left-hand operator ``i/tau - H/2`` with potentials sampled at the half step.

    ``tau`` may be negative (used to check time symmetry).
    """
    diag = np.zeros((M, 2, 2), dtype=np.complex128)
    diag[:, 0, 0] = 1j / tau - 0.5 * (1.0 / eps + v)
    diag[:, 1, 1] = 1j / tau - 0.5 * (-1.0 / eps + v)
    diag[:, 0, 1] = diag[:, 1, 0] = 0.5 * a
    off = 1j / (4 * eps * h)
    sup = np.zeros_like(diag)
    sup[:, 0, 1] = sup[:, 1, 0] = off
    sub = -sup
    return CyclicBlockTridiagonal(diag=diag, sub=sub, super=sup)


def cnfd_rhs(cur: ArrayC, h: float, tau: float, eps: float, v: ArrayR, a: ArrayR) -> ArrayC:
    cur = as_spinor_field(cur)
    out = np.empty_like(cur)
    _cnfd_rhs(cur, np.ascontiguousarray(v, dtype=np.float64),
              np.ascontiguousarray(a, dtype=np.float64), tau, eps, h, out)
    return out


def step_cnfd(state: EvolutionState, disc: Discretization, pot: PotentialSpec) -> ArrayC:
    _, cur = _check_state(state, disc, False)
    v, a = _potentials(pot, disc, state.t + 0.5 * disc.tau)
    system = cnfd_system(disc.M, disc.h, disc.tau, disc.epsilon, v, a)
    return system.factorize().solve(cnfd_rhs(cur, disc.h, disc.tau, disc.epsilon, v, a))


STEPPERS = {
    SchemeKind.LFFD: step_lffd,
    SchemeKind.SIFD1: step_sifd1,
    SchemeKind.SIFD2: step_sifd2,
    SchemeKind.CNFD: step_cnfd,
}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


class _Recorder:
    def __init__(self, disc, pot, probes, trace_node):
        self.disc, self.pot = disc, pot
        self.probes = set(probes)
        self.records: list[ObservableRecord] = []
        self.trace_node = -1 if trace_node is None else int(trace_node)
        self.trace = (np.full((disc.steps + 1, 2), np.nan + 0j)
                      if trace_node is not None else np.zeros((1, 2), dtype=np.complex128))

    def visit(self, n, u):
        if self.trace_node >= 0:
            self.trace[n] = u[self.trace_node]
        if n in self.probes:
            self.records.append(observe(u, n * self.disc.tau, self.disc, self.pot))


def _stops(n_from: int, n_to: int, probes: Iterable[int]) -> list[int]:
    """Step indices in ``(n_from, n_to]`` where the fused loop must pause."""
    return sorted({p for p in probes if n_from < p <= n_to} | {n_to})


def _diverged(u, limit) -> bool:
    return not _max_modulus(u) <= limit


def evolve(kind, init: InitialData, disc: Discretization, pot: PotentialSpec,
           probes: Sequence[int] = (), trace_node: Optional[int] = None,
           divergence_factor: float = DIVERGENCE_FACTOR) -> EvolutionResult:
    """Run ``disc.steps`` steps of ``kind`` from sampled initial data.

    Observables are recorded at the requested probe steps.  The run halts as
    soon as any node exceeds ``divergence_factor * max|Phi^0|`` or turns
    non-finite; the result then carries the step index in ``diverged_step``.
    """
    kind = SchemeKind.parse(kind)
    N = disc.steps
    probes = sorted(set(int(p) for p in probes))
    if probes and (probes[0] < 0 or probes[-1] > N):
        raise ValueError(f"probe steps must lie in 0..{N}")
    if trace_node is not None and not 0 <= trace_node < disc.M:
        raise ValueError(f"trace node must lie in 0..{disc.M - 1}")
    u0 = sample_initial(init, disc)
    limit = divergence_factor * _max_modulus(u0)
    rec = _Recorder(disc, pot, probes, trace_node)
    rec.visit(0, u0)
    if N == 0:
        return _result(u0, 0, rec, None)
    if kind is SchemeKind.CNFD:
        return _evolve_cnfd(u0, disc, pot, probes, rec, limit)

    u1 = first_step(u0, derivative_of_initial(init, disc), disc, pot)
    rec.visit(1, u1)
    if _diverged(u1, limit):
        return _result(u1, 1, rec, 1)
    if kind is SchemeKind.SIFD2:
        return _evolve_sifd2(u0, u1, disc, pot, probes, rec, limit)
    return _evolve_explicit(kind, u0, u1, disc, pot, probes, rec, limit)


def _result(u, n, rec, diverged_step):
    trace = rec.trace if rec.trace_node >= 0 else None
    return EvolutionResult(field=u, steps_taken=n, records=rec.records,
                           diverged_step=diverged_step, trace=trace)


def _evolve_explicit(kind, u0, u1, disc, pot, probes, rec, limit):
    kernel = _lffd_kernel if kind is SchemeKind.LFFD else _sifd1_kernel
    prev, cur = u0.copy(), u1.copy()
    n = 1
    if pot.time_independent:
        v, a = _potentials(pot, disc, 0.0)
        for stop in _stops(1, disc.steps, probes):
            done, status, diverged = _run_three_level(
                kernel, prev, cur, v, a, disc.tau, disc.epsilon, disc.h,
                stop - n, limit, rec.trace_node, rec.trace, n)
            n += done
            if status:
                raise SingularSystemError(f"SIFD1 node matrix {status - 1} is singular")
            if diverged:
                return _result(cur, n, rec, n)
            if n in rec.probes:
                rec.records.append(observe(cur, n * disc.tau, disc, pot))
        return _result(cur, n, rec, None)

    step = STEPPERS[kind]
    while n < disc.steps:
        new = step(EvolutionState(n, n * disc.tau, cur, prev), disc, pot)
        prev, cur = cur, new
        n += 1
        rec.visit(n, cur)
        if _diverged(cur, limit):
            return _result(cur, n, rec, n)
    return _result(cur, n, rec, None)


def _evolve_sifd2(u0, u1, disc, pot, probes, rec, limit):
    op = Sifd2Operator.for_grid(disc)
    x = build_grid(disc)
    prev_hat = np.fft.fft(u0.T, axis=1)
    cur = np.ascontiguousarray(u1.T)
    cur_hat = np.fft.fft(cur, axis=1)
    v, a = _potentials(pot, disc, 0.0)
    n = 1
    while n < disc.steps:
        if not pot.time_independent:
            v, a = pot.sample(n * disc.tau, x)
        new_hat = op.advance(prev_hat, cur, v, a)
        prev_hat, cur_hat = cur_hat, new_hat
        cur = np.fft.ifft(cur_hat, axis=1)
        n += 1
        if rec.trace_node >= 0 or n in rec.probes:
            rec.visit(n, np.ascontiguousarray(cur.T))
        m = np.max(np.sum(cur.real**2 + cur.imag**2, axis=0))
        if not m <= limit * limit:
            return _result(np.ascontiguousarray(cur.T), n, rec, n)
    return _result(np.ascontiguousarray(cur.T), n, rec, None)


def _evolve_cnfd(u0, disc, pot, probes, rec, limit):
    cur = u0.copy()
    n = 0
    M, h, tau, eps = disc.M, disc.h, disc.tau, disc.epsilon
    if pot.time_independent:
        v, a = _potentials(pot, disc, 0.0)
        arrays = cnfd_system(M, h, tau, eps, v, a).factorize().arrays
        for stop in _stops(0, disc.steps, probes):
            done, diverged = _run_cnfd(*arrays, cur, v, a, tau, eps, h, stop - n,
                                       limit, rec.trace_node, rec.trace, n)
            n += done
            if diverged:
                return _result(cur, n, rec, n)
            if n in rec.probes:
                rec.records.append(observe(cur, n * tau, disc, pot))
        return _result(cur, n, rec, None)

    while n < disc.steps:
        cur = step_cnfd(EvolutionState(n, n * tau, cur), disc, pot)
        n += 1
        rec.visit(n, cur)
        if _diverged(cur, limit):
            return _result(cur, n, rec, n)
    return _result(cur, n, rec, None)
