"""Estimation quality metrics, all in closed form against a known truth."""

import numpy as np

from .linalg import hermitian_eig
from .validation import check_hermitian, check_square


def err_frobenius(sigma_true, sigma_est):
    """Normalized Frobenius error ||true - est||_F / ||true||_F."""
    sigma_true = check_square(sigma_true, "sigma_true")
    sigma_est = check_square(sigma_est, "sigma_est")
    if sigma_true.shape != sigma_est.shape:
        raise ValueError("covariance shapes differ")
    denom = np.linalg.norm(sigma_true)
    if denom == 0:
        raise ValueError("ground-truth covariance is zero")
    return float(np.linalg.norm(sigma_true - sigma_est) / denom)


def err_nmse(sigma_true, sigma_est, noise_power):
    """Normalized MSE of linear-MMSE channel estimation using the candidate
    covariance inside the filter.

    With W = est (N0 I + est)^{-1} applied to y = h + z, the channel MSE is
    tr((I - W) true (I - W)^H) + N0 tr(W W^H); dividing by tr(true) gives
    the reported error.  No Monte Carlo is involved.
    """
    sigma_true = check_hermitian(sigma_true, name="sigma_true")
    sigma_est = check_hermitian(sigma_est, name="sigma_est")
    if sigma_true.shape != sigma_est.shape:
        raise ValueError("covariance shapes differ")
    M = sigma_true.shape[0]
    denom = float(np.trace(sigma_true).real)
    if denom <= 0:
        raise ValueError("ground-truth covariance has non-positive trace")
    system = noise_power * np.eye(M) + sigma_est
    # indefinite estimates (e.g. the raw sample covariance with N < M) can
    # make the filter system rank deficient; invert on its numerical range
    vals, vecs = np.linalg.eigh(system)
    keep = np.abs(vals) > 1e-12 * max(float(np.max(np.abs(vals))), 1e-300)
    if not np.any(keep):
        raise np.linalg.LinAlgError("MMSE filter system is singular")
    inv_vals = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
    W = sigma_est @ ((vecs * inv_vals) @ vecs.conj().T)
    resid = np.eye(M) - W
    mse = np.trace(resid @ sigma_true @ resid.conj().T).real
    mse += noise_power * np.linalg.norm(W) ** 2
    return float(mse / denom)


def _dominant_eigenvectors(sigma, p):
    eig = hermitian_eig(sigma)
    vecs = eig.eigenvectors[:, :p].copy()
    # deterministic phase: first significant entry of each vector made
    # real positive (matters only when eigenvalues tie)
    for k in range(vecs.shape[1]):
        v = vecs[:, k]
        j = int(np.argmax(np.abs(v)))
        phase = v[j] / abs(v[j])
        vecs[:, k] = v / phase
    return vecs


def power_efficiency(sigma_true, sigma_est, p):
    """Captured-power deficit of the estimated p-dominant subspace:
    1 - tr(U_est^H true U_est) / tr(U_true^H true U_true)."""
    sigma_true = check_hermitian(sigma_true, name="sigma_true")
    sigma_est = check_hermitian(sigma_est, name="sigma_est")
    M = sigma_true.shape[0]
    if not (1 <= p <= M):
        raise ValueError(f"subspace dimension p={p} outside [1, {M}]")
    U_true = _dominant_eigenvectors(sigma_true, p)
    U_est = _dominant_eigenvectors(sigma_est, p)
    captured_true = np.trace(U_true.conj().T @ sigma_true @ U_true).real
    captured_est = np.trace(U_est.conj().T @ sigma_true @ U_est).real
    return float(1.0 - captured_est / captured_true)
