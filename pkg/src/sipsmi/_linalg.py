"""Small Hermitian-matrix helpers shared across the package."""

from __future__ import annotations

import numpy as np


def hermitian_part(m: np.ndarray) -> np.ndarray:
    """Symmetrize a square matrix: (M + M^H)/2."""
    return 0.5 * (m + m.conj().T)


def check_hermitian(m: np.ndarray, atol: float = 1e-12) -> None:
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e} > {atol:.1e})")


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def check_covariance(theta: np.ndarray, herm_atol: float = 1e-12, eig_tol: float = -1e-10) -> None:
    """Reject matrices that are not Hermitian PSD (up to roundoff tolerances)."""
    check_hermitian(theta, herm_atol)
    lam = min_eigenvalue(theta)
    if lam < eig_tol:
        raise ValueError(f"matrix is not PSD (min eigenvalue {lam:.3e} < {eig_tol:.1e})")


def psd_clip(m: np.ndarray) -> np.ndarray:
    """Nearest-PSD projection: clip negative eigenvalues of the Hermitian part at 0."""
    lam, vec = np.linalg.eigh(hermitian_part(m))
    lam = np.clip(lam, 0.0, None)
    return hermitian_part((vec * lam) @ vec.conj().T)


def psd_factor(theta: np.ndarray) -> np.ndarray:
    """Square factor F with F F^H = theta, built as V diag(sqrt(lambda)) V^H.

    Negative eigenvalues (roundoff) are clipped at 0 before taking roots.
    """
    lam, vec = np.linalg.eigh(hermitian_part(theta))
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.conj().T


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal real basis of n x n Hermitian matrices (n^2 elements, Frobenius inner product)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = inv_sqrt2
            e[j, i] = inv_sqrt2
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1j * inv_sqrt2
            e[j, i] = -1j * inv_sqrt2
            basis.append(e)
    return basis


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random Hermitian matrix with unit Frobenius norm."""
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = hermitian_part(m)
    return h / np.linalg.norm(h)


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real trace inner product Re tr(A^H B) on matrices."""
    return float(np.real(np.sum(a.conj() * b)))
