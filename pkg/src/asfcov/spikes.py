"""Detection of discrete scattering components: model order by MDL,
locations by the MUSIC pseudo-spectrum."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import array_response
from .linalg import hermitian_eig
from .validation import check_hermitian

logger = logging.getLogger(__name__)

EIGENVALUE_FLOOR = 1e-12
DEFAULT_GRID_SIZE = 4096


@dataclass
class SpikeEstimate:
    """Detected spike count and locations (sorted ascending, in [-1, 1)).

    ``pseudo_spectrum`` optionally keeps the (grid, values) pair used for
    the search, for diagnostics and plotting.
    """

    order: int
    locations: np.ndarray = field(default_factory=lambda: np.empty(0))
    pseudo_spectrum: tuple | None = None

    def __post_init__(self):
        self.locations = np.sort(np.asarray(self.locations, dtype=np.float64))
        if self.order != len(self.locations):
            raise ValueError("order must match the number of locations")


def mdl_order(eigenvalues, n_snapshots):
    """Model-order selection by the minimum description length criterion.

    ``eigenvalues`` must be sorted descending.  Candidate order k pays a
    goodness-of-fit term N(M-k) log(a(k)/b(k)) -- a(k) the arithmetic mean
    of the M-k smallest eigenvalues, b(k) a product over the k largest
    chosen so near-zero trailing eigenvalues never enter a product -- plus
    the parameter-count penalty k(2M-k) log(N) / 2.  Ties break toward the
    smaller order.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be sorted descending")
    if n_snapshots < 2:
        raise ValueError("MDL needs at least two snapshots")
    if np.all(lam <= EIGENVALUE_FLOOR):
        return 0
    M = lam.size
    lam = np.maximum(lam, EIGENVALUE_FLOOR)
    log_lam = np.log(lam)
    best_k, best_val = 0, np.inf
    for k in range(M):
        tail = lam[k:]
        a_k = np.mean(tail)
        # log b(k) = -(1/(M-k)) * sum of the k largest log-eigenvalues
        log_b = -np.sum(log_lam[:k]) / (M - k) if k else 0.0
        fit = n_snapshots * (M - k) * (np.log(a_k) - log_b)
        penalty = 0.5 * k * (2 * M - k) * np.log(n_snapshots)
        val = fit + penalty
        if val < best_val:
            best_k, best_val = k, val
    return best_k


def music_pseudospectrum(noise_basis, grid):
    """MUSIC objective on a grid: eta(xi) = ||U_noi^H a(xi)||^2.

    ``noise_basis`` is the M x (M - r) matrix of noise-subspace
    eigenvectors (orthonormal columns); minima of eta mark spike angles.
    """
    noise_basis = np.asarray(noise_basis, dtype=np.complex128)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if noise_basis.ndim != 2 or noise_basis.shape[1] < 1:
        raise ValueError("noise basis must have at least one column")
    M = noise_basis.shape[0]
    proj = noise_basis.conj().T @ array_response(M, grid)
    return np.sum(np.abs(proj) ** 2, axis=0)


def _refine_minimum(grid, values, i):
    """Parabolic interpolation through a strict grid minimum and its
    neighbors; the offset is clamped to half a grid step."""
    h = grid[1] - grid[0]
    y0, y1, y2 = values[i - 1], values[i], values[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom <= 0:
        return grid[i]
    delta = 0.5 * (y0 - y2) / denom * h
    return grid[i] + float(np.clip(delta, -h / 2, h / 2))


def detect_spikes(sigma_y, n_snapshots, grid_size=DEFAULT_GRID_SIZE, refine=True,
                  keep_spectrum=False):
    """Estimate spike count and locations from a sample covariance.

    Eigendecomposes ``sigma_y``, picks the order by MDL, spans the noise
    subspace with the trailing eigenvectors, and returns the r smallest
    strict interior local minima of the pseudo-spectrum on a uniform grid
    over [-1, 1) (parabolic sub-grid refinement optional).  If fewer local
    minima exist than the MDL order, the order shrinks to what was found.
    """
    sigma_y = check_hermitian(sigma_y, name="sigma_y")
    eig = hermitian_eig(sigma_y)
    M = sigma_y.shape[0]
    r = mdl_order(eig.eigenvalues, n_snapshots)
    grid = -1.0 + 2.0 * np.arange(grid_size) / grid_size
    if r == 0:
        spectrum = None
        if keep_spectrum:
            spectrum = (grid, music_pseudospectrum(eig.eigenvectors, grid))
        return SpikeEstimate(order=0, locations=[], pseudo_spectrum=spectrum)

    noise_basis = eig.eigenvectors[:, r:]
    eta = music_pseudospectrum(noise_basis, grid)
    interior = np.arange(1, grid_size - 1)
    is_min = (eta[interior] < eta[interior - 1]) & (eta[interior] < eta[interior + 1])
    minima = interior[is_min]
    if len(minima) < r:
        logger.warning(
            "MDL order %d exceeds the %d pseudo-spectrum minima found; shrinking",
            r, len(minima),
        )
        r = len(minima)
    chosen = minima[np.argsort(eta[minima])[:r]]
    if refine:
        locations = [_refine_minimum(grid, eta, i) for i in chosen]
    else:
        locations = grid[chosen]
    return SpikeEstimate(
        order=r,
        locations=locations,
        pseudo_spectrum=(grid, eta) if keep_spectrum else None,
    )
