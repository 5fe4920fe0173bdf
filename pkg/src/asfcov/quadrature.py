"""Adaptive composite Gauss-Legendre quadrature for oscillatory lag integrals.

Everything downstream needs integrals of the form

    v_k = \\int_a^b w(x) * exp(j * pi * nu * k * phase(x)) dx,   k = 0..M-1,

where the harmonic index k runs up to the antenna count.  The integrand
oscillates faster as M*nu grows, so a fixed rule cannot be trusted; panels
are doubled until two successive lag vectors agree.
"""

import functools

import numpy as np

PANEL_ORDER = 64
REL_TOL = 1e-10
MAX_DOUBLINGS = 10


@functools.lru_cache(maxsize=8)
def _reference_rule(order):
    # nodes/weights on [-1, 1]
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_nodes(a, b, panels, order):
    """Nodes and weights of a composite rule with `panels` equal panels."""
    x0, w0 = _reference_rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def oscillatory_lags(weight_fn, a, b, M, nu, phase_fn=None, rel_tol=REL_TOL):
    """Integrate ``weight_fn(x) * exp(j*pi*nu*k*phase_fn(x))`` for k = 0..M-1.

    Parameters
    ----------
    weight_fn : callable
        Vectorized non-oscillatory factor of the integrand.
    a, b : float
        Integration interval.
    M : int
        Number of lags (harmonics 0..M-1).
    nu : float
        Wavelength scaling multiplying the phase.
    phase_fn : callable, optional
        Phase coordinate; identity by default.  Used to fold coordinate
        substitutions (e.g. x = sin t) into the same rule.
    rel_tol : float
        Doubling stops once successive lag vectors differ by less than
        this, relative to the largest lag magnitude.

    Returns
    -------
    ndarray of complex, shape (M,)
    """
    if b <= a:
        return np.zeros(M, dtype=np.complex128)
    k = np.arange(M)
    prev = None
    panels = 1
    for _ in range(MAX_DOUBLINGS + 1):
        x, w = _panel_nodes(a, b, panels, PANEL_ORDER)
        ph = x if phase_fn is None else phase_fn(x)
        f = weight_fn(x) * w
        # (M, n) phase matrix contracted against weighted samples
        lags = np.exp(1j * np.pi * nu * np.outer(k, ph)) @ f
        if prev is not None:
            scale = max(np.max(np.abs(lags)), np.finfo(float).tiny)
            if np.max(np.abs(lags - prev)) <= rel_tol * scale:
                return lags
        prev = lags
        panels *= 2
    return prev


def gauss_mass(mu, sigma, lo, hi):
    """Mass of a unit Gaussian N(mu, sigma^2) restricted to [lo, hi]."""
    import math

    z = lambda t: (t - mu) / (sigma * math.sqrt(2.0))
    return 0.5 * (math.erf(z(hi)) - math.erf(z(lo)))
