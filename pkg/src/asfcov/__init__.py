"""Spatial channel covariance estimation from few noisy array snapshots.

The estimators model the angular scattering function as discrete spikes
(located by MDL + MUSIC) plus a dictionary expansion of the diffuse part,
fit the coefficients by non-negative least squares, constrained least
squares, or maximum likelihood via EM, and can re-synthesize the
covariance at a different carrier frequency.
"""

from .channel import (
    Asf,
    GridDensity,
    Rect,
    SampleBatch,
    TruncatedGaussian,
    array_response,
    asf_covariance,
    draw_samples,
    noise_power_for_snr,
    random_mixed_asf,
    sample_covariance_h,
    sample_covariance_y,
)
from .covariance import (
    ParametricCovariance,
    ProjectionCovariance,
    SampleCovariance,
    SpiceCovariance,
    ToeplitzPsdCovariance,
)
from .dictionary import (
    DesignSystem,
    DiracAtom,
    RectAtom,
    TruncGaussAtom,
    assemble_design,
    atom_moment_column,
    dirac_grid,
    gaussian_family,
    reconstruct_covariance,
)
from .estimators import (
    EstimatorReport,
    em_estimate,
    em_estimate_from_covariance,
    estimate_nnls,
    estimate_qp,
    flops_em,
    flops_nnls,
    ml_gradient,
    neg_log_likelihood,
    nnls,
)
from .benchmarks import BenchmarkReport, convex_projection, spice, toeplitz_psd
from .linalg import (
    HermitianEig,
    hermitian_eig,
    psd_project,
    psd_sqrt,
    toeplitz_from_lags,
    toeplitz_project,
)
from .metrics import err_frobenius, err_nmse, power_efficiency
from .spikes import SpikeEstimate, detect_spikes, mdl_order, music_pseudospectrum

__version__ = "0.1.0"

__all__ = [
    "Asf", "GridDensity", "Rect", "SampleBatch", "TruncatedGaussian",
    "array_response", "asf_covariance", "draw_samples", "noise_power_for_snr",
    "random_mixed_asf", "sample_covariance_h", "sample_covariance_y",
    "ParametricCovariance", "ProjectionCovariance", "SampleCovariance",
    "SpiceCovariance", "ToeplitzPsdCovariance",
    "DesignSystem", "DiracAtom", "RectAtom", "TruncGaussAtom",
    "assemble_design", "atom_moment_column", "dirac_grid", "gaussian_family",
    "reconstruct_covariance",
    "EstimatorReport", "em_estimate", "em_estimate_from_covariance",
    "estimate_nnls", "estimate_qp", "flops_em", "flops_nnls", "ml_gradient",
    "neg_log_likelihood", "nnls",
    "BenchmarkReport", "convex_projection", "spice", "toeplitz_psd",
    "HermitianEig", "hermitian_eig", "psd_project", "psd_sqrt",
    "toeplitz_from_lags", "toeplitz_project",
    "err_frobenius", "err_nmse", "power_efficiency",
    "SpikeEstimate", "detect_spikes", "mdl_order", "music_pseudospectrum",
]
