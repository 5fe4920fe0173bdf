"""Angular scattering model of a uniform linear array channel.

The ground truth is an angular scattering function (ASF): a non-negative
power density over the normalized angle xi in [-1, 1), made of discrete
spikes (specular paths) plus continuous pieces (diffuse clusters).  This
module synthesizes covariance matrices from an ASF, draws noisy channel
snapshots, and forms the plain sample-covariance estimates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import toeplitz_from_lags
from .quadrature import gauss_mass, oscillatory_lags
from .validation import check_hermitian, check_snapshots


def stream_rng(seed, *stream):
    """Deterministic generator for (seed, stream-id...), splittable so
    parallel trials reproduce under any schedule."""
    if isinstance(seed, (tuple, list)):
        entropy, key = seed[0], tuple(seed[1:]) + tuple(stream)
    else:
        entropy, key = seed, tuple(stream)
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(entropy), spawn_key=tuple(int(s) for s in key))
    )


def array_response(M, xi, nu=1.0):
    """ULA response vector: element m = exp(j*pi*nu*m*xi), m = 0..M-1.

    ``nu`` rescales the electrical spacing; ``nu=1`` is the uplink array.
    Accepts a scalar or a vector of angles (returns an (M, len(xi)) matrix
    in the vector case).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    m = np.arange(M)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim == 0:
        return np.exp(1j * np.pi * nu * m * float(xi))
    return np.exp(1j * np.pi * nu * np.outer(m, xi))


def rect_lags(lo, hi, height, M, nu):
    """Closed-form lags of a rectangular density: entry k is
    h * (e^{j pi nu k hi} - e^{j pi nu k lo}) / (j pi nu k), with h*(hi-lo)
    at k = 0."""
    k = np.arange(M)
    out = np.empty(M, dtype=np.complex128)
    out[0] = height * (hi - lo)
    kk = k[1:] * nu
    out[1:] = height * (np.exp(1j * np.pi * kk * hi) - np.exp(1j * np.pi * kk * lo)) / (
        1j * np.pi * kk
    )
    return out


@dataclass(frozen=True)
class Rect:
    """Flat density of the given height on [lo, hi] within [-1, 1]."""

    lo: float
    hi: float
    height: float

    def __post_init__(self):
        if not (-1.0 <= self.lo < self.hi <= 1.0):
            raise ValueError(f"invalid rect support [{self.lo}, {self.hi}]")
        if self.height < 0:
            raise ValueError("rect height must be >= 0")

    def mass(self):
        return self.height * (self.hi - self.lo)

    def lags(self, M, nu):
        return rect_lags(self.lo, self.hi, self.height, M, nu)

    def density(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        return np.where((xi >= self.lo) & (xi <= self.hi), self.height, 0.0)


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian bump truncated to center +/- half_width (clipped to [-1, 1])
    and scaled to carry the given mass."""

    center: float
    sigma: float
    half_width: float
    mass_total: float

    def __post_init__(self):
        if self.sigma <= 0 or self.half_width <= 0:
            raise ValueError("sigma and half_width must be positive")
        if self.mass_total < 0:
            raise ValueError("mass must be >= 0")
        if self.support()[0] >= self.support()[1]:
            raise ValueError("truncated Gaussian support lies outside [-1, 1]")

    def support(self):
        return max(-1.0, self.center - self.half_width), min(1.0, self.center + self.half_width)

    def mass(self):
        return self.mass_total

    def density(self, xi):
        lo, hi = self.support()
        xi = np.asarray(xi, dtype=np.float64)
        z = gauss_mass(self.center, self.sigma, lo, hi)
        pdf = np.exp(-0.5 * ((xi - self.center) / self.sigma) ** 2) / (
            self.sigma * math.sqrt(2.0 * math.pi)
        )
        return np.where((xi >= lo) & (xi <= hi), self.mass_total * pdf / z, 0.0)

    def lags(self, M, nu):
        lo, hi = self.support()
        return oscillatory_lags(self.density, lo, hi, M, nu)


@dataclass(frozen=True)
class GridDensity:
    """Density sampled on a uniform grid spanning [-1, 1] inclusive;
    integrals use trapezoid weights (half weight at the endpoints)."""

    values: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("grid density needs >= 2 values")
        if np.any(vals < 0):
            raise ValueError("grid density values must be >= 0")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    def grid(self):
        return np.linspace(-1.0, 1.0, len(self.values))

    def weights(self):
        K = len(self.values)
        w = np.full(K, 2.0 / (K - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def mass(self):
        return float(self.weights() @ np.asarray(self.values))

    def lags(self, M, nu):
        xi = self.grid()
        f = self.weights() * np.asarray(self.values)
        return np.exp(1j * np.pi * nu * np.outer(np.arange(M), xi)) @ f

    def density(self, xi):
        return np.interp(np.asarray(xi, dtype=np.float64), self.grid(), np.asarray(self.values))


@dataclass
class Asf:
    """Mixed angular scattering function: spikes plus continuous pieces.

    ``spikes`` is a list of (location, weight) pairs with locations in
    [-1, 1) and positive weights, pairwise distinct; ``pieces`` holds the
    continuous components.
    """

    spikes: list = field(default_factory=list)
    pieces: list = field(default_factory=list)

    def __post_init__(self):
        self.spikes = [(float(p), float(c)) for p, c in self.spikes]
        for phi, c in self.spikes:
            if not (-1.0 <= phi < 1.0):
                raise ValueError(f"spike location {phi} outside [-1, 1)")
            if c <= 0:
                raise ValueError("spike weights must be > 0")
        locs = [p for p, _ in self.spikes]
        if len(set(locs)) != len(locs):
            raise ValueError("spike locations must be pairwise distinct")
        if not self.spikes and not self.pieces:
            raise ValueError("ASF must contain at least one component")
        if self.mass() <= 0:
            raise ValueError("ASF total mass must be > 0")

    def mass(self):
        return sum(c for _, c in self.spikes) + sum(p.mass() for p in self.pieces)

    def scaled(self, factor):
        spikes = [(phi, c * factor) for phi, c in self.spikes]
        pieces = []
        for p in self.pieces:
            if isinstance(p, Rect):
                pieces.append(Rect(p.lo, p.hi, p.height * factor))
            elif isinstance(p, TruncatedGaussian):
                pieces.append(
                    TruncatedGaussian(p.center, p.sigma, p.half_width, p.mass_total * factor)
                )
            elif isinstance(p, GridDensity):
                pieces.append(GridDensity(tuple(v * factor for v in p.values)))
            else:
                raise TypeError(f"unknown ASF piece {type(p)!r}")
        return Asf(spikes, pieces)

    def normalized(self):
        """Rescale to unit total mass."""
        return self.scaled(1.0 / self.mass())


def asf_lags(asf, M, nu=1.0):
    """First covariance column of an ASF: entry k is
    int gamma(xi) e^{j pi nu k xi} d xi."""
    lags = np.zeros(M, dtype=np.complex128)
    k = np.arange(M)
    for phi, c in asf.spikes:
        lags += c * np.exp(1j * np.pi * nu * k * phi)
    for piece in asf.pieces:
        lags += piece.lags(M, nu)
    return lags


def asf_covariance(asf, M, nu=1.0):
    """Synthesize the Hermitian Toeplitz covariance of an ASF at scale nu.

    Spikes and rectangles use closed-form lag integrals; other pieces use
    the adaptive oscillatory quadrature.
    """
    return toeplitz_from_lags(asf_lags(asf, M, nu))


def noise_power_for_snr(snr_db, signal_power=1.0):
    """Per-antenna noise power achieving the requested SNR against a channel
    of the given per-antenna power (= ASF mass)."""
    return signal_power * 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class SampleBatch:
    """N noisy channel snapshots y[s] of dimension M.

    ``snapshots`` is (N, M) complex; ``noise_power`` is the variance of the
    additive circular noise; ``seed`` records how the batch was drawn.
    """

    snapshots: np.ndarray
    noise_power: float
    seed: tuple

    def __post_init__(self):
        snaps = check_snapshots(self.snapshots, "snapshots")
        object.__setattr__(self, "snapshots", snaps)
        if self.noise_power < 0:
            raise ValueError("noise_power must be >= 0")
        seed = self.seed if isinstance(self.seed, tuple) else (int(self.seed),)
        object.__setattr__(self, "seed", tuple(int(s) for s in seed))

    @property
    def n_snapshots(self):
        return self.snapshots.shape[0]

    @property
    def n_antennas(self):
        return self.snapshots.shape[1]


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def draw_samples(sigma_h, noise_power, n_snapshots, seed, psd_rtol=1e-8):
    """Draw y[s] = h[s] + z[s] with h ~ CN(0, sigma_h), z ~ CN(0, N0 I).

    Deterministic for a given seed (int or tuple of ints).  ``sigma_h``
    must be PSD up to ``-psd_rtol * trace``; small negative eigenvalues
    are clamped.
    """
    sigma_h = check_hermitian(sigma_h, name="sigma_h")
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    M = sigma_h.shape[0]
    vals, vecs = np.linalg.eigh(sigma_h)
    trace = float(np.trace(sigma_h).real)
    if vals[0] < -psd_rtol * max(trace, 1.0):
        raise ValueError(
            f"sigma_h indefinite beyond tolerance (min eigenvalue {vals[0]:.3e})"
        )
    factor = vecs * np.sqrt(np.maximum(vals, 0.0))
    rng = stream_rng(seed)
    g = _complex_normal(rng, (n_snapshots, M))
    h = g @ factor.T  # row s is factor @ g[s]
    y = h
    if noise_power > 0:
        y = y + math.sqrt(noise_power) * _complex_normal(rng, (n_snapshots, M))
    seed_t = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    return SampleBatch(snapshots=y, noise_power=float(noise_power), seed=seed_t)


def sample_covariance_y(batch):
    """Plain sample covariance (1/N) sum_s y[s] y[s]^H."""
    Y = batch.snapshots  # rows are snapshots
    return Y.T @ Y.conj() / batch.n_snapshots


def sample_covariance_h(batch):
    """Noise-corrected sample covariance; may be indefinite."""
    cov = sample_covariance_y(batch)
    return cov - batch.noise_power * np.eye(batch.n_antennas)


def random_mixed_asf(max_spikes=3, max_clusters=2, mass_split=0.5, seed=0,
                     min_separation=0.0):
    """Random unit-mass ASF with up to ``max_spikes`` spikes and up to
    ``max_clusters`` rectangular diffuse clusters.

    ``mass_split`` is the fraction of the total power carried by the spike
    part when both parts are present.  ``min_separation`` enforces a
    minimum spike spacing (rejection sampling).  Deterministic per seed.
    """
    if max_spikes < 0 or max_clusters < 0:
        raise ValueError("component caps must be >= 0")
    if max_spikes == 0 and max_clusters == 0:
        raise ValueError("at least one spike or cluster must be allowed")
    if not (0.0 <= mass_split <= 1.0):
        raise ValueError("mass_split must lie in [0, 1]")
    rng = stream_rng(seed, 0xA5F)
    n_spikes = int(rng.integers(0, max_spikes + 1)) if max_spikes else 0
    n_clusters = int(rng.integers(0, max_clusters + 1)) if max_clusters else 0
    if n_spikes == 0 and n_clusters == 0:
        if max_clusters:
            n_clusters = 1
        else:
            n_spikes = 1
    if n_spikes and n_clusters and mass_split == 0.0:
        n_spikes = 0  # spikes would carry zero weight
    if n_spikes and n_clusters and mass_split == 1.0:
        n_clusters = 0

    spikes = []
    if n_spikes:
        for _ in range(256):
            locs = np.sort(rng.uniform(-1.0, 1.0, size=n_spikes))
            if n_spikes == 1 or np.min(np.diff(locs)) >= min_separation:
                break
        else:
            raise ValueError("could not place spikes with the requested separation")
        weights = rng.dirichlet(np.ones(n_spikes))
        spike_mass = mass_split if n_clusters else 1.0
        spikes = [(float(l), float(w * spike_mass)) for l, w in zip(locs, weights)]

    pieces = []
    if n_clusters:
        cluster_mass = (1.0 - mass_split) if n_spikes else 1.0
        shares = rng.dirichlet(np.ones(n_clusters))
        for share in shares:
            width = float(rng.uniform(0.1, 0.5))
            lo = float(rng.uniform(-1.0, 1.0 - width))
            pieces.append(Rect(lo, lo + width, float(share * cluster_mass / width)))

    return Asf(spikes=spikes, pieces=pieces)
