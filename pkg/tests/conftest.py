import numpy as np
import pytest

from asfcov.channel import Asf, Rect


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def two_spike_scene():
    """Two rectangular clusters plus two half-power spikes (total mass 1.9),
    the reference scene used across the detection and fitting tests."""
    return Asf(
        spikes=[(-0.2, 0.5), (0.4, 0.5)],
        pieces=[Rect(-0.7, -0.4, 1.0), Rect(0.0, 0.6, 1.0)],
    )


def random_hermitian(rng, M, scale=1.0):
    A = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return scale * (A + A.conj().T) / 2.0


def random_psd(rng, M, rank=None):
    rank = rank or M
    B = rng.standard_normal((M, rank)) + 1j * rng.standard_normal((M, rank))
    return B @ B.conj().T / rank


def random_toeplitz_hermitian(rng, M, scale=1.0):
    from asfcov.linalg import toeplitz_from_lags

    lags = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    lags[0] = rng.standard_normal()
    return toeplitz_from_lags(scale * lags)
