"""Dense complex Hermitian linear algebra: eigendecompositions and the
structured projections (Toeplitz, PSD) the covariance fitters build on."""

from dataclasses import dataclass

import numpy as np

from .validation import check_hermitian, check_square

EIG_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class HermitianEig:
    """Full spectrum of a Hermitian matrix, eigenvalues sorted descending.

    ``eigenvectors[:, k]`` is the unit eigenvector paired with
    ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(A):
    """Eigendecompose a Hermitian matrix, spectrum in descending order.

    The input is symmetrized on entry; asymmetry beyond the tolerated
    1e-10 relative level raises.  The returned pair satisfies
    ``A @ v_k = lam_k * v_k`` to within ``1e-8 * ||A||_F``.
    """
    A = check_hermitian(A)
    vals, vecs = np.linalg.eigh(A)
    order = np.argsort(vals)[::-1]
    return HermitianEig(np.ascontiguousarray(vals[order]),
                        np.ascontiguousarray(vecs[:, order]))


def toeplitz_from_lags(lags):
    """Assemble the Hermitian Toeplitz matrix whose first column is `lags`."""
    lags = np.asarray(lags, dtype=np.complex128)
    M = lags.shape[0]
    idx = np.subtract.outer(np.arange(M), np.arange(M))
    T = np.where(idx >= 0, lags[np.abs(idx)], np.conj(lags[np.abs(idx)]))
    # force an exactly real diagonal
    T[np.diag_indices(M)] = lags[0].real
    return T


def toeplitz_lag_multiplicities(M):
    """How often lag k appears in an M x M Hermitian Toeplitz matrix:
    M on the diagonal, 2(M-k) for k >= 1."""
    mult = 2.0 * (M - np.arange(M))
    mult[0] = M
    return mult


def toeplitz_project(A):
    """Frobenius-orthogonal projection onto Hermitian Toeplitz matrices.

    Each diagonal is replaced by its average (the per-diagonal least
    squares optimum).  Returns ``(T, first_column)`` where
    ``first_column[k]`` is the averaged lag-k value, i.e. the mean of the
    k-th subdiagonal of the symmetrized input.
    """
    A = check_hermitian(A)
    M = A.shape[0]
    lags = np.empty(M, dtype=np.complex128)
    for k in range(M):
        lags[k] = np.mean(np.diagonal(A, offset=-k))
    lags[0] = lags[0].real
    return toeplitz_from_lags(lags), lags


def psd_project(A):
    """Project onto the PSD cone: clamp negative eigenvalues to zero."""
    A = check_hermitian(A)
    vals, vecs = np.linalg.eigh(A)
    clipped = np.maximum(vals, 0.0)
    out = (vecs * clipped) @ vecs.conj().T
    return (out + out.conj().T) / 2.0


def psd_sqrt(A, rtol=1e-10):
    """Hermitian square root S with S @ S^H = A for PSD A.

    Eigenvalues down to ``-rtol * ||A||_F`` are treated as zero; a more
    negative spectrum means the input is genuinely indefinite and raises.
    """
    A = check_hermitian(A)
    vals, vecs = np.linalg.eigh(A)
    floor = -rtol * max(np.linalg.norm(A), 1.0)
    if vals[0] < floor:
        raise ValueError(
            f"matrix is significantly indefinite (min eigenvalue {vals[0]:.3e})"
        )
    root = np.sqrt(np.maximum(vals, 0.0))
    out = (vecs * root) @ vecs.conj().T
    return (out + out.conj().T) / 2.0


def herm_inner(A, B):
    """Frobenius inner product <A, B> = tr(A^H B)."""
    A = check_square(A)
    B = check_square(B)
    return complex(np.vdot(A, B))
