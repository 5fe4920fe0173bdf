"""Atom families for the diffuse ASF part and their covariance columns.

An atom is a unit-mass density on [-1, 1].  For fitting we only ever need
the first column of its scaled covariance S_i^(nu), i.e. the lag vector
``column[k] = int psi_i(xi) e^{j pi nu k xi} dxi``; full M x M matrices are
never materialized per atom.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from .channel import rect_lags
from .linalg import toeplitz_from_lags, toeplitz_project
from .quadrature import oscillatory_lags
from .validation import check_hermitian


@dataclass(frozen=True)
class DiracAtom:
    """Unit point mass at a fixed angle."""

    location: float

    def __post_init__(self):
        if not (-1.0 <= self.location < 1.0):
            raise ValueError(f"atom location {self.location} outside [-1, 1)")


@dataclass(frozen=True)
class RectAtom:
    """Uniform density on [lo, hi], normalized to unit mass."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (-1.0 <= self.lo < self.hi <= 1.0):
            raise ValueError(f"invalid atom support [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class TruncGaussAtom:
    """Gaussian bump truncated to center +/- half_width and clipped to
    [-1, 1]; with ``skewed`` the density carries the angle-coordinate
    Jacobian 1/sqrt(1 - xi^2).  Re-normalized to unit mass either way."""

    center: float
    sigma: float
    half_width: float
    skewed: bool = False

    def __post_init__(self):
        if self.sigma <= 0 or self.half_width <= 0:
            raise ValueError("sigma and half_width must be positive")
        lo, hi = self.support()
        if lo >= hi:
            raise ValueError("atom support lies outside [-1, 1]")

    def support(self):
        return (max(-1.0, self.center - self.half_width),
                min(1.0, self.center + self.half_width))


def dirac_grid(G):
    """G Dirac atoms at the cell centers of a uniform partition of [-1, 1)."""
    if G < 1:
        raise ValueError("G must be >= 1")
    return [DiracAtom(-1.0 + (2.0 * i + 1.0) / G) for i in range(G)]


def gaussian_family(G):
    """G overlapping skewed truncated-Gaussian atoms.

    The shared template has sigma = 4/(3(G+3)) and support half-width
    4/(G+3) (so the window spans six standard deviations); copies are
    shifted to centers 2(i+1)/(G+3) - 1 and skewed by the coordinate
    Jacobian.  As G grows these narrow toward the Dirac grid.
    """
    if G < 1:
        raise ValueError("G must be >= 1")
    sigma = 4.0 / (3.0 * (G + 3))
    half_width = 4.0 / (G + 3)
    centers = [2.0 * (i + 1) / (G + 3) - 1.0 for i in range(1, G + 1)]
    return [TruncGaussAtom(c, sigma, half_width, skewed=True) for c in centers]


def _gauss_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


@functools.lru_cache(maxsize=None)
def _moment_column_cached(atom, M, nu):
    if isinstance(atom, DiracAtom):
        col = np.exp(1j * np.pi * nu * np.arange(M) * atom.location)
    elif isinstance(atom, RectAtom):
        col = rect_lags(atom.lo, atom.hi, 1.0 / (atom.hi - atom.lo), M, nu)
    elif isinstance(atom, TruncGaussAtom):
        lo, hi = atom.support()
        if atom.skewed:
            # substitute xi = sin t: the Jacobian cancels the 1/sqrt(1-xi^2)
            # singularity at the clipped edges
            raw = oscillatory_lags(
                lambda t: _gauss_pdf(np.sin(t), atom.center, atom.sigma),
                math.asin(lo), math.asin(hi), M, nu, phase_fn=np.sin,
            )
        else:
            raw = oscillatory_lags(
                lambda x: _gauss_pdf(x, atom.center, atom.sigma), lo, hi, M, nu
            )
        col = raw / raw[0].real  # entry 0 is the (pre-normalization) mass
    else:
        raise TypeError(f"unknown atom type {type(atom)!r}")
    col.setflags(write=False)
    return col


def atom_moment_column(atom, M, nu=1.0):
    """First column of S_i^(nu) for one atom; cached per (atom, M, nu)."""
    return _moment_column_cached(atom, int(M), float(nu))


def atom_density(atom, xi):
    """Pointwise density of a continuous atom (used for the non-negativity
    constraint grid).  Dirac atoms have no pointwise density."""
    xi = np.asarray(xi, dtype=np.float64)
    if isinstance(atom, RectAtom):
        return np.where((xi >= atom.lo) & (xi <= atom.hi),
                        1.0 / (atom.hi - atom.lo), 0.0)
    if isinstance(atom, TruncGaussAtom):
        lo, hi = atom.support()
        pdf = _gauss_pdf(xi, atom.center, atom.sigma)
        if atom.skewed:
            with np.errstate(divide="ignore"):
                pdf = pdf / np.sqrt(np.maximum(1.0 - xi ** 2, 0.0))
        # normalize so the pointwise values integrate to one, matching the
        # atom's moment column
        z = _atom_mass_raw(atom)
        return np.where((xi >= lo) & (xi <= hi), pdf / z, 0.0)
    raise TypeError(f"no pointwise density for atom type {type(atom)!r}")


@functools.lru_cache(maxsize=None)
def _atom_mass_raw(atom):
    """Pre-normalization mass of a truncated-Gaussian atom."""
    lo, hi = atom.support()
    if atom.skewed:
        raw = oscillatory_lags(
            lambda t: _gauss_pdf(np.sin(t), atom.center, atom.sigma),
            math.asin(lo), math.asin(hi), 1, 0.0, phase_fn=np.sin,
        )
    else:
        raw = oscillatory_lags(
            lambda x: _gauss_pdf(x, atom.center, atom.sigma), lo, hi, 1, 0.0
        )
    return raw[0].real


def weighting_vector(M):
    """Diagonal of the lag weighting W = diag(sqrt(M), sqrt(2(M-1)), ...,
    sqrt(2)), compensating how often each lag repeats in a Hermitian
    Toeplitz matrix."""
    w = 2.0 * (M - np.arange(M))
    w[0] = M
    return np.sqrt(w)


@dataclass
class DesignSystem:
    """Fitting system for one dictionary: G continuous atoms followed by
    the detected spike atoms (extended-grid ordering), the matrix of their
    moment columns, the lag weighting, and the Toeplitzized target."""

    M: int
    nu: float
    atoms: tuple
    n_continuous: int
    n_spikes: int
    design: np.ndarray   # M x (G + r) complex moment columns
    weights: np.ndarray  # length-M diagonal of W
    target: np.ndarray   # length-M first column of the Toeplitzized input

    @property
    def n_atoms(self):
        return self.n_continuous + self.n_spikes

    @property
    def spike_locations(self):
        return np.array([a.location for a in self.atoms[self.n_continuous:]])

    def is_all_dirac(self):
        return all(isinstance(a, DiracAtom) for a in self.atoms)

    def steering_matrix(self):
        """M x (G + r) matrix of array responses; only defined for all-Dirac
        systems, where moment columns and steering vectors coincide."""
        if not self.is_all_dirac():
            raise ValueError("steering matrix requires an all-Dirac system")
        return self.design


def assemble_design(continuous_atoms, spike_locations, sigma_h, M, nu=1.0):
    """Build the weighted lag-domain least-squares system.

    Spike atoms are appended after the continuous dictionary; the target
    is the first column of the Toeplitz projection of ``sigma_h``.
    """
    spike_locations = np.asarray(spike_locations, dtype=np.float64)
    for phi in spike_locations:
        if not (-1.0 <= phi < 1.0):
            raise ValueError(f"spike location {phi} outside [-1, 1)")
    sigma_h = check_hermitian(sigma_h, name="sigma_h")
    if sigma_h.shape[0] != M:
        raise ValueError("sigma_h dimension does not match M")
    atoms = tuple(continuous_atoms) + tuple(DiracAtom(float(p)) for p in spike_locations)
    if not atoms:
        raise ValueError("design needs at least one atom")
    design = np.column_stack([atom_moment_column(a, M, nu) for a in atoms])
    _, target = toeplitz_project(sigma_h)
    return DesignSystem(
        M=M,
        nu=float(nu),
        atoms=atoms,
        n_continuous=len(continuous_atoms),
        n_spikes=len(spike_locations),
        design=design,
        weights=weighting_vector(M),
        target=target,
    )


def reconstruct_covariance(system, u, nu_out=1.0):
    """Covariance sum_i u_i S_i^(nu_out) as a Hermitian Toeplitz matrix.

    ``nu_out = 1`` reproduces the uplink fit; ``nu_out = f_dl / f_ul``
    extrapolates the same coefficients to the downlink carrier.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (system.n_atoms,):
        raise ValueError(f"u must have length {system.n_atoms}")
    cols = np.column_stack(
        [atom_moment_column(a, system.M, nu_out) for a in system.atoms]
    )
    return toeplitz_from_lags(cols @ u)


def nonnegativity_constraint(continuous_atoms, grid_size):
    """Constraint matrix whose rows sample the continuous atoms on a
    uniform grid: feasible b satisfy (matrix @ b) >= 0 pointwise.

    For Dirac dictionaries the pointwise constraint degenerates to
    elementwise non-negativity, returned as an identity.
    """
    G = len(continuous_atoms)
    if grid_size < G:
        raise ValueError("constraint grid must be at least as fine as the dictionary")
    if all(isinstance(a, DiracAtom) for a in continuous_atoms):
        return np.eye(G)
    xi = -1.0 + (2.0 * np.arange(grid_size) + 1.0) / grid_size
    return np.column_stack([atom_density(a, xi) for a in continuous_atoms])
