"""Independent dense constructions used as oracles."""
import numpy as np

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)


def central_difference_matrix(M, h):
    D = np.zeros((M, M))
    for j in range(M):
        D[j, (j + 1) % M] += 1 / (2 * h)
        D[j, (j - 1) % M] -= 1 / (2 * h)
    return D


def dense_hamiltonian(M, h, eps, v, a):
    """2M x 2M matrix of (-(i/eps) s1 dx + s3/eps + V - A s1), node-major ordering."""
    D = central_difference_matrix(M, h)
    H = np.kron(D, -1j / eps * S1) + np.kron(np.eye(M), S3 / eps)
    H += np.kron(np.diag(v), np.eye(2)) - np.kron(np.diag(a), S1)
    return H


def naive_dft(u):
    M = u.shape[0]
    k = np.arange(M)
    W = np.exp(-2j * np.pi * np.outer(k, k) / M)
    return W @ u / M


def dense_from_blocks(diag, sub, sup):
    M = diag.shape[0]
    A = np.zeros((2 * M, 2 * M), dtype=complex)
    for j in range(M):
        A[2 * j:2 * j + 2, 2 * j:2 * j + 2] += diag[j]
        jm, jp = (j - 1) % M, (j + 1) % M
        A[2 * j:2 * j + 2, 2 * jm:2 * jm + 2] += sub[j]
        A[2 * j:2 * j + 2, 2 * jp:2 * jp + 2] += sup[j]
    return A


def grid_potential(v, a):
    """Time-independent potential given by node values on a fixed grid."""
    from dirac_fd.core import PotentialSpec
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    return PotentialSpec(V=lambda t, x: v, A1=lambda t, x: a,
                         v_max=float(np.abs(v).max()), a1_max=float(np.abs(a).max()),
                         time_independent=True)


def cnfd_dense_step(u, h, tau, eps, v, a):
    M = u.shape[0]
    H = dense_hamiltonian(M, h, eps, v, a)
    I = np.eye(2 * M)
    rhs = (1j / tau * I + 0.5 * H) @ u.ravel()
    return np.linalg.solve(1j / tau * I - 0.5 * H, rhs).reshape(M, 2)


def sifd1_residual(prev, cur, new, h, tau, eps, v, a):
    """Relative defect of i dt Phi = -(i/eps) s1 dx Phi^n + G (Phi^{n+1}+Phi^{n-1})/2."""
    M = cur.shape[0]
    D = central_difference_matrix(M, h)
    G = np.kron(np.eye(M), S3 / eps) + np.kron(np.diag(v), np.eye(2)) - np.kron(np.diag(a), S1)
    lhs = 1j * (new.ravel() - prev.ravel()) / (2 * tau)
    kin = np.kron(D, -1j / eps * S1) @ cur.ravel()
    imp = G @ (new.ravel() + prev.ravel()) / 2
    scale = max(np.abs(lhs).max(), np.abs(kin).max(), np.abs(imp).max())
    return np.abs(lhs - kin - imp).max() / scale


def sifd2_residual(prev, cur, new, h, tau, eps, v, a):
    """Relative defect of i dt Phi = (1/eps)(-i s1 dx + s3)(Phi^{n+1}+Phi^{n-1})/2 + (V - A s1) Phi^n."""
    M = cur.shape[0]
    D = central_difference_matrix(M, h)
    K = (np.kron(D, -1j * S1) + np.kron(np.eye(M), S3)) / eps
    P = np.kron(np.diag(v), np.eye(2)) - np.kron(np.diag(a), S1)
    lhs = 1j * (new.ravel() - prev.ravel()) / (2 * tau)
    imp = K @ (new.ravel() + prev.ravel()) / 2
    exp = P @ cur.ravel()
    scale = max(np.abs(lhs).max(), np.abs(imp).max(), np.abs(exp).max())
    return np.abs(lhs - imp - exp).max() / scale


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}
