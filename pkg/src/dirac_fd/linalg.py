"""Fourier transform pair and direct solvers for the small linear systems the
schemes produce.

The cyclic block-tridiagonal solver does block Thomas elimination on the open
band and folds the two periodic corner blocks back in with a rank-4 Woodbury
correction, so a factorization costs O(M) and each solve O(M).
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import ArrayC, ArrayR, Discretization, as_spinor_field, wavenumbers

PIVOT_TOL = 1e-14
K_FLUSH = 1e-18


class SingularSystemError(ArithmeticError):
    """A pivot or determinant fell below the conditioning threshold."""


# --------------------------------------------------------------------------
# Fourier pair
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSpectrum:
    """Mode coefficients in standard FFT layout.

    Row ``k`` holds signed mode ``l = modes[k]``; use :meth:`symmetric` for the
    ordering ``l = -M/2 .. M/2-1``.
    """

    coefficients: ArrayC
    mu: ArrayR

    @property
    def M(self) -> int:
        return self.coefficients.shape[0]

    @property
    def modes(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=1.0 / self.M).astype(np.int64)

    def coefficient(self, l: int) -> ArrayC:
        if not -self.M // 2 <= l < self.M // 2:
            raise IndexError(f"mode {l} outside -M/2 .. M/2-1")
        return self.coefficients[l % self.M]

    def symmetric(self) -> tuple[np.ndarray, ArrayC, ArrayR]:
        order = np.fft.fftshift(np.arange(self.M))
        return self.modes[order], self.coefficients[order], self.mu[order]


def dft_forward(field: ArrayC, disc: Discretization) -> ModeSpectrum:
    u = as_spinor_field(field, disc.M)
    return ModeSpectrum(np.fft.fft(u, axis=0) / disc.M, wavenumbers(disc))


def dft_inverse(spec: ModeSpectrum, disc: Discretization) -> ArrayC:
    if spec.M != disc.M:
        raise ValueError(f"spectrum has {spec.M} modes, grid has {disc.M} nodes")
    return np.fft.ifft(spec.coefficients, axis=0) * disc.M


# --------------------------------------------------------------------------
# 2x2 algebra
# --------------------------------------------------------------------------


def apply_2x2(mat, v):
    """``mat @ v`` for one or a batch of 2x2 matrices and 2-vectors."""
    return np.einsum("...ab,...b->...a", np.asarray(mat), np.asarray(v))


def invert_2x2(mat):
    """Adjugate inverse of one or a batch of 2x2 matrices."""
    m = np.asarray(mat, dtype=np.complex128)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    scale = np.abs(m).max(axis=(-2, -1))
    if np.any(np.abs(det) <= PIVOT_TOL * scale**2):
        raise SingularSystemError("2x2 matrix is singular to working precision")
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1]
    inv[..., 0, 1] = -m[..., 0, 1]
    inv[..., 1, 0] = -m[..., 1, 0]
    inv[..., 1, 1] = m[..., 0, 0]
    return inv / det[..., None, None]


# --------------------------------------------------------------------------
# cyclic block-tridiagonal systems
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _band_factor(L, D, R, Dinv, W):
    """Block LU of the open band; returns the failing row or -1."""
    M = D.shape[0]
    for j in range(M):
        if j == 0:
            t00, t01, t10, t11 = D[0, 0, 0], D[0, 0, 1], D[0, 1, 0], D[0, 1, 1]
        else:
            p = Dinv[j - 1]
            w00 = L[j, 0, 0] * p[0, 0] + L[j, 0, 1] * p[1, 0]
            w01 = L[j, 0, 0] * p[0, 1] + L[j, 0, 1] * p[1, 1]
            w10 = L[j, 1, 0] * p[0, 0] + L[j, 1, 1] * p[1, 0]
            w11 = L[j, 1, 0] * p[0, 1] + L[j, 1, 1] * p[1, 1]
            W[j, 0, 0], W[j, 0, 1], W[j, 1, 0], W[j, 1, 1] = w00, w01, w10, w11
            r = R[j - 1]
            t00 = D[j, 0, 0] - (w00 * r[0, 0] + w01 * r[1, 0])
            t01 = D[j, 0, 1] - (w00 * r[0, 1] + w01 * r[1, 1])
            t10 = D[j, 1, 0] - (w10 * r[0, 0] + w11 * r[1, 0])
            t11 = D[j, 1, 1] - (w10 * r[0, 1] + w11 * r[1, 1])
        scale = 0.0
        for a in range(2):
            for b in range(2):
                scale = max(scale, abs(L[j, a, b]), abs(D[j, a, b]), abs(R[j, a, b]))
        det = t00 * t11 - t01 * t10
        if not abs(det) > PIVOT_TOL * scale * scale:
            return j
        Dinv[j, 0, 0] = t11 / det
        Dinv[j, 0, 1] = -t01 / det
        Dinv[j, 1, 0] = -t10 / det
        Dinv[j, 1, 1] = t00 / det
    return -1


@nb.njit(cache=True)
def _band_solve(Dinv, W, R, f, x):
    M = f.shape[0]
    # forward sweep; y is kept in x
    x[0, 0] = f[0, 0]
    x[0, 1] = f[0, 1]
    for j in range(1, M):
        y0, y1 = x[j - 1, 0], x[j - 1, 1]
        x[j, 0] = f[j, 0] - (W[j, 0, 0] * y0 + W[j, 0, 1] * y1)
        x[j, 1] = f[j, 1] - (W[j, 1, 0] * y0 + W[j, 1, 1] * y1)
    y0, y1 = x[M - 1, 0], x[M - 1, 1]
    x[M - 1, 0] = Dinv[M - 1, 0, 0] * y0 + Dinv[M - 1, 0, 1] * y1
    x[M - 1, 1] = Dinv[M - 1, 1, 0] * y0 + Dinv[M - 1, 1, 1] * y1
    for j in range(M - 2, -1, -1):
        n0, n1 = x[j + 1, 0], x[j + 1, 1]
        y0 = x[j, 0] - (R[j, 0, 0] * n0 + R[j, 0, 1] * n1)
        y1 = x[j, 1] - (R[j, 1, 0] * n0 + R[j, 1, 1] * n1)
        x[j, 0] = Dinv[j, 0, 0] * y0 + Dinv[j, 0, 1] * y1
        x[j, 1] = Dinv[j, 1, 0] * y0 + Dinv[j, 1, 1] * y1


@nb.njit(cache=True)
def _cyclic_solve(Dinv, W, R, K, L0, Rlast, f, x):
    _band_solve(Dinv, W, R, f, x)
    M = f.shape[0]
    s0 = L0[0, 0] * x[M - 1, 0] + L0[0, 1] * x[M - 1, 1]
    s1 = L0[1, 0] * x[M - 1, 0] + L0[1, 1] * x[M - 1, 1]
    s2 = Rlast[0, 0] * x[0, 0] + Rlast[0, 1] * x[0, 1]
    s3 = Rlast[1, 0] * x[0, 0] + Rlast[1, 1] * x[0, 1]
    for j in range(M):
        for a in range(2):
            x[j, a] -= K[0, j, a] * s0 + K[1, j, a] * s1 + K[2, j, a] * s2 + K[3, j, a] * s3


@dataclass(frozen=True)
class CyclicBlockTridiagonal:
    """``sub[j] X[j-1] + diag[j] X[j] + super[j] X[j+1] = rhs[j]``, indices mod M."""

    diag: ArrayC
    sub: ArrayC
    super: ArrayC

    def __post_init__(self):
        for name in ("diag", "sub", "super"):
            blocks = np.ascontiguousarray(getattr(self, name), dtype=np.complex128)
            if blocks.ndim != 3 or blocks.shape[1:] != (2, 2):
                raise ValueError(f"{name} must have shape (M, 2, 2), got {blocks.shape}")
            object.__setattr__(self, name, blocks)
        if not self.diag.shape == self.sub.shape == self.super.shape:
            raise ValueError("diag, sub and super must have the same number of blocks")
        if self.M < 2:
            raise ValueError("need at least two blocks")

    @property
    def M(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: ArrayC) -> ArrayC:
        x = as_spinor_field(x, self.M)
        return (apply_2x2(self.sub, np.roll(x, 1, axis=0)) + apply_2x2(self.diag, x)
                + apply_2x2(self.super, np.roll(x, -1, axis=0)))

    def factorize(self) -> "CyclicFactorization":
        return CyclicFactorization(self)


class CyclicFactorization:
    """Reusable O(M) factorization of a :class:`CyclicBlockTridiagonal`."""

    def __init__(self, system: CyclicBlockTridiagonal):
        M = system.M
        L, D, R = system.sub, system.diag, system.super
        self._R = R
        self._Dinv = np.empty_like(D)
        self._W = np.zeros_like(D)
        bad = _band_factor(L, D, R, self._Dinv, self._W)
        if bad >= 0:
            raise SingularSystemError(f"pivot block {bad} is singular to working precision")
        self._L0 = np.ascontiguousarray(L[0])
        self._Rlast = np.ascontiguousarray(R[M - 1])
        # B^{-1} U for the corner coupling, U = [e_0 (x) I2, e_{M-1} (x) I2]
        Z = np.empty((4, M, 2), dtype=np.complex128)
        for c in range(4):
            e = np.zeros((M, 2), dtype=np.complex128)
            e[0 if c < 2 else M - 1, c % 2] = 1.0
            _band_solve(self._Dinv, self._W, R, e, Z[c])
        cap = np.eye(4, dtype=np.complex128)
        for c in range(4):
            cap[0:2, c] += self._L0 @ Z[c, M - 1]
            cap[2:4, c] += self._Rlast @ Z[c, 0]
        sv = np.linalg.svd(cap, compute_uv=False)
        if not sv[-1] > PIVOT_TOL * sv[0]:
            raise SingularSystemError("periodic corner correction is singular")
        cap_inv = np.linalg.inv(cap)
        K = np.einsum("cja,cd->dja", Z, cap_inv)
        # the corner spikes decay geometrically into the interior; on long
        # grids the tail is subnormal, which is far below roundoff of the
        # corner terms but makes every solve many times slower
        peak = np.abs(K).max(axis=(1, 2), keepdims=True)
        K[np.abs(K) < K_FLUSH * peak] = 0.0
        self._K = np.ascontiguousarray(K)

    def solve(self, rhs: ArrayC, out: ArrayC | None = None) -> ArrayC:
        f = as_spinor_field(rhs, self._R.shape[0])
        if out is None:
            out = np.empty_like(f)
        _cyclic_solve(self._Dinv, self._W, self._R, self._K, self._L0, self._Rlast, f, out)
        return out

    # exposed for the fused time loops in schemes.py
    @property
    def arrays(self):
        return self._Dinv, self._W, self._R, self._K, self._L0, self._Rlast


def solve_cyclic_block_tridiag(system: CyclicBlockTridiagonal, rhs: ArrayC) -> ArrayC:
    return system.factorize().solve(rhs)
