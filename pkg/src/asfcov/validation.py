"""Input validation helpers shared by the numerical routines."""

import numpy as np

# Relative asymmetry silently repaired by symmetrization; above this we refuse.
HERMITIAN_RTOL = 1e-10


def as_complex_matrix(A, name="A"):
    """Coerce to a 2-D complex128 array, rejecting non-finite entries."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A.real)) or not np.all(np.isfinite(A.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def check_square(A, name="A"):
    A = as_complex_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def check_hermitian(A, rtol=HERMITIAN_RTOL, name="A"):
    """Return the symmetrized matrix (A + A^H)/2.

    Asymmetry up to ``rtol`` (relative, Frobenius) is repaired silently;
    anything larger raises ``ValueError``.
    """
    A = check_square(A, name)
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T)
    if scale > 0 and asym > rtol * scale:
        raise ValueError(
            f"{name} is not Hermitian: relative asymmetry {asym / scale:.3e}"
        )
    return (A + A.conj().T) / 2.0


def check_snapshots(X, name="X"):
    """Validate an (n_snapshots, n_antennas) complex snapshot matrix."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_snapshots, n_antennas)")
    if X.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one snapshot")
    if not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(X.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_real_vector(v, name="v"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D real vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v
