"""Scikit-learn style covariance estimators.

Every estimator follows the usual contract: hyperparameters in
``__init__`` (so ``get_params`` / ``set_params`` / ``clone`` work), a
``fit(X)`` taking an (n_snapshots, n_antennas) complex snapshot matrix
(or a :class:`~asfcov.channel.SampleBatch`), and fitted attributes with a
trailing underscore, ``covariance_`` foremost.  Estimators whose model
lives in the angle domain can re-synthesize the covariance at another
carrier through :meth:`extrapolate`.
"""

import numpy as np
from sklearn.base import BaseEstimator

from . import benchmarks as _bench
from .channel import SampleBatch
from .dictionary import (
    assemble_design,
    dirac_grid,
    gaussian_family,
    reconstruct_covariance,
)
from .estimators import em_estimate_from_covariance, estimate_nnls, estimate_qp
from .spikes import SpikeEstimate, detect_spikes
from .validation import check_snapshots


class BaseCovarianceEstimator(BaseEstimator):
    """Common fit plumbing: snapshot validation and sample covariances."""

    def fit(self, X, y=None):
        if isinstance(X, SampleBatch):
            snapshots = X.snapshots
            noise_power = X.noise_power
        else:
            snapshots = check_snapshots(X)
            noise_power = float(getattr(self, "noise_power", 0.0) or 0.0)
        self.n_features_in_ = snapshots.shape[1]
        self.noise_power_ = noise_power
        self.sample_covariance_y_ = (
            snapshots.T @ snapshots.conj() / snapshots.shape[0]
        )
        self.sample_covariance_ = self.sample_covariance_y_ - noise_power * np.eye(
            self.n_features_in_
        )
        self._fit(snapshots)
        return self

    def _fit(self, snapshots):
        raise NotImplementedError

    @property
    def supports_extrapolation(self):
        return False

    def extrapolate(self, nu):
        """Covariance at wavelength scale ``nu`` (1 = the fitted carrier)."""
        raise NotImplementedError(
            f"{type(self).__name__} has no angle-domain model to extrapolate"
        )


class SampleCovariance(BaseCovarianceEstimator):
    """Noise-corrected sample covariance baseline."""

    def __init__(self, noise_power=0.0):
        self.noise_power = noise_power

    def _fit(self, snapshots):
        self.covariance_ = self.sample_covariance_


class ParametricCovariance(BaseCovarianceEstimator):
    """Dictionary-based parametric covariance estimator.

    The angular density is modeled as detected spikes plus a dictionary
    expansion of the diffuse part; coefficients are fit by ``method``:

    * ``"nnls"`` -- non-negative least squares on the weighted lags;
    * ``"qp"``   -- least squares with grid non-negativity (overlapping
      dictionaries such as ``dictionary="gauss"``);
    * ``"em"``   -- maximum likelihood via EM (``dictionary="dirac"``
      only), initialized from the NNLS solution.

    Parameters
    ----------
    noise_power : float
        Known per-antenna noise variance (ignored when fitting a
        SampleBatch, which records its own).
    method : {"nnls", "qp", "em"}
    dictionary : {"dirac", "gauss"}
    n_atoms : int or None
        Dictionary size G; defaults to twice the antenna count.
    music : bool
        Whether to run MDL+MUSIC spike detection before fitting.
    music_grid, music_refine : MUSIC search grid size and sub-grid
        parabolic refinement.
    constraint_grid : int
        Non-negativity grid size for the QP method.
    em_tol, em_max_iter : EM stopping rule.
    """

    def __init__(self, noise_power=0.0, method="nnls", dictionary="dirac",
                 n_atoms=None, music=True, music_grid=4096, music_refine=True,
                 constraint_grid=10_000, em_tol=None, em_max_iter=100):
        self.noise_power = noise_power
        self.method = method
        self.dictionary = dictionary
        self.n_atoms = n_atoms
        self.music = music
        self.music_grid = music_grid
        self.music_refine = music_refine
        self.constraint_grid = constraint_grid
        self.em_tol = em_tol
        self.em_max_iter = em_max_iter

    def _atoms(self, M):
        G = self.n_atoms if self.n_atoms is not None else 2 * M
        if self.dictionary == "dirac":
            return dirac_grid(G)
        if self.dictionary == "gauss":
            return gaussian_family(G)
        raise ValueError(f"unknown dictionary kind {self.dictionary!r}")

    def _fit(self, snapshots):
        M = self.n_features_in_
        if self.method not in ("nnls", "qp", "em"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "em" and self.dictionary != "dirac":
            raise ValueError("EM requires a Dirac dictionary (rank-1 atoms)")
        if self.music:
            self.spikes_ = detect_spikes(
                self.sample_covariance_y_,
                snapshots.shape[0],
                grid_size=self.music_grid,
                refine=self.music_refine,
            )
        else:
            self.spikes_ = SpikeEstimate(order=0, locations=[])
        self.design_ = assemble_design(
            self._atoms(M), self.spikes_.locations, self.sample_covariance_, M
        )
        if self.method == "nnls":
            self.report_ = estimate_nnls(self.sample_covariance_, self.design_)
        elif self.method == "qp":
            self.report_ = estimate_qp(
                self.sample_covariance_, self.design_,
                constraint_grid=self.constraint_grid,
            )
        else:
            nnls_report = estimate_nnls(self.sample_covariance_, self.design_)
            self.report_ = em_estimate_from_covariance(
                self.sample_covariance_y_, self.noise_power_, self.design_,
                nnls_report.u, eps_em=self.em_tol, max_iter=self.em_max_iter,
            )
        self.coefficients_ = self.report_.u
        self.covariance_ = reconstruct_covariance(self.design_, self.coefficients_, 1.0)

    @property
    def supports_extrapolation(self):
        return True

    def extrapolate(self, nu):
        return reconstruct_covariance(self.design_, self.coefficients_, nu)


class ToeplitzPsdCovariance(BaseCovarianceEstimator):
    """Alternating-projection benchmark onto the Toeplitz-PSD set."""

    def __init__(self, noise_power=0.0, tol=1e-8, max_iter=500):
        self.noise_power = noise_power
        self.tol = tol
        self.max_iter = max_iter

    def _fit(self, snapshots):
        self.report_ = _bench.toeplitz_psd(
            self.sample_covariance_, tol=self.tol, max_iter=self.max_iter
        )
        self.covariance_ = self.report_.covariance


class SpiceCovariance(BaseCovarianceEstimator):
    """SPICE benchmark on a Dirac grid (no spike detection)."""

    def __init__(self, noise_power=0.0, n_atoms=None, tol=1e-7, max_iter=2000):
        self.noise_power = noise_power
        self.n_atoms = n_atoms
        self.tol = tol
        self.max_iter = max_iter

    def _fit(self, snapshots):
        M = self.n_features_in_
        G = self.n_atoms if self.n_atoms is not None else 2 * M
        self.design_ = assemble_design(dirac_grid(G), [], self.sample_covariance_, M)
        self.report_ = _bench.spice(
            self.sample_covariance_y_, self.design_, snapshots.shape[0],
            tol=self.tol, max_iter=self.max_iter,
        )
        self.coefficients_ = self.report_.extras["u"]
        self.covariance_ = self.report_.covariance

    @property
    def supports_extrapolation(self):
        return True

    def extrapolate(self, nu):
        return _bench.spice_covariance(self.design_, self.coefficients_, nu)


class ProjectionCovariance(BaseCovarianceEstimator):
    """Moment-matching convex projection of the density itself."""

    def __init__(self, noise_power=0.0, grid_size=5000, tol=1e-6, max_iter=2000):
        self.noise_power = noise_power
        self.grid_size = grid_size
        self.tol = tol
        self.max_iter = max_iter

    def _fit(self, snapshots):
        self.report_ = _bench.convex_projection(
            self.sample_covariance_, grid_size=self.grid_size,
            tol=self.tol, max_iter=self.max_iter,
        )
        self.covariance_ = self.report_.covariance
        self.density_ = self.report_.extras["density"]
        self._grid = self.report_.extras["grid"]

    @property
    def supports_extrapolation(self):
        return True

    def extrapolate(self, nu):
        w = np.full(self.grid_size, 2.0 / (self.grid_size - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return _bench.density_covariance(self._grid, w, self.density_,
                                         self.n_features_in_, nu)
