import logging

import numpy as np
import numpy.testing as npt
import pytest

from asfcov.channel import (
    Asf,
    array_response,
    asf_covariance,
    draw_samples,
    noise_power_for_snr,
    sample_covariance_y,
)
from asfcov.linalg import hermitian_eig
from asfcov.spikes import SpikeEstimate, detect_spikes, mdl_order, music_pseudospectrum


class TestMdlOrder:
    def test_white_noise_gives_zero(self):
        assert mdl_order(np.full(10, 2.5), 40) == 0

    def test_all_tiny_gives_zero(self):
        assert mdl_order(np.full(6, 1e-15), 40) == 0

    def test_rejects_small_samples(self):
        with pytest.raises(ValueError):
            mdl_order(np.ones(4), 1)

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            mdl_order(np.array([1.0, 2.0, 3.0]), 10)

    def test_single_spike_detected(self):
        # one unit spike, SNR 20 dB, M=25, N=50
        M, N = 25, 50
        S = asf_covariance(Asf(spikes=[(0.3, 1.0)]), M)
        N0 = noise_power_for_snr(20.0)
        hits = 0
        for s in range(500):
            batch = draw_samples(S, N0, N, seed=(301, s))
            lam = hermitian_eig(sample_covariance_y(batch)).eigenvalues
            hits += mdl_order(lam, N) == 1
        assert hits / 500 >= 0.95

    def test_two_spike_scene_never_undershoots(self, two_spike_scene):
        # the diffuse part acts as colored noise: overestimation is expected
        # and tolerated, undershooting r=2 is not
        M, N = 25, 50
        S = asf_covariance(two_spike_scene, M)
        N0 = noise_power_for_snr(20.0, two_spike_scene.mass())
        hits = 0
        for s in range(200):
            batch = draw_samples(S, N0, N, seed=(302, s))
            lam = hermitian_eig(sample_covariance_y(batch)).eigenvalues
            hits += mdl_order(lam, N) >= 2
        assert hits / 200 >= 0.90

    def test_scale_invariant_argmin(self, rng):
        for _ in range(20):
            lam = np.sort(rng.uniform(0.01, 5.0, 12))[::-1]
            base = mdl_order(lam, 30)
            assert mdl_order(1e3 * lam, 30) == base
            assert mdl_order(1e-3 * lam, 30) == base


class TestPseudoSpectrum:
    def test_full_basis_is_constant(self):
        M = 7
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((M, M))
                            + 1j * np.random.default_rng(1).standard_normal((M, M)))
        grid = np.linspace(-1, 1, 64, endpoint=False)
        eta = music_pseudospectrum(Q, grid)
        npt.assert_allclose(eta, M, atol=1e-10)

    def test_exact_spike_nulls(self):
        M = 8
        a = array_response(M, 0.4)
        eig = hermitian_eig(np.outer(a, a.conj()))
        eta = music_pseudospectrum(eig.eigenvectors[:, 1:], np.array([0.4]))
        npt.assert_allclose(eta, 0.0, atol=1e-10)

    def test_bounds(self, rng):
        M = 9
        Q, _ = np.linalg.qr(rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M)))
        grid = np.linspace(-1, 1, 512, endpoint=False)
        eta = music_pseudospectrum(Q[:, 3:], grid)
        assert np.all(eta >= -1e-12)
        assert np.all(eta <= M + 1e-9)

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            music_pseudospectrum(np.eye(4), np.array([]))


class TestDetectSpikes:
    def test_noise_only(self):
        M, N = 8, 200
        hits = 0
        for s in range(500):
            batch = draw_samples(np.zeros((M, M), complex), 1.0, N, seed=(303, s))
            est = detect_spikes(sample_covariance_y(batch), N)
            hits += est.order == 0
        assert hits / 500 >= 0.95

    def test_two_exact_spikes(self):
        M = 32
        S = asf_covariance(Asf(spikes=[(-0.5, 1.0), (0.5, 1.0)]), M)
        est = detect_spikes(S + 1e-12 * np.eye(M), 1000)
        assert est.order == 2
        npt.assert_allclose(est.locations, [-0.5, 0.5], atol=1e-3)

    def test_two_spike_scene_localization(self, two_spike_scene):
        M, N = 25, 50
        S = asf_covariance(two_spike_scene, M)
        N0 = noise_power_for_snr(20.0, two_spike_scene.mass())
        hits = 0
        for s in range(100):
            batch = draw_samples(S, N0, N, seed=(304, s))
            est = detect_spikes(sample_covariance_y(batch), N)
            hits += all(
                est.order and np.min(np.abs(est.locations - t)) <= 0.02
                for t in (-0.2, 0.4)
            )
        assert hits / 100 >= 0.90

    def test_scale_invariance(self, two_spike_scene):
        M, N = 16, 64
        S = asf_covariance(two_spike_scene, M)
        batch = draw_samples(S, 0.019, N, seed=305)
        sy = sample_covariance_y(batch)
        base = detect_spikes(sy, N)
        for alpha in (1e-3, 1e3):
            scaled = detect_spikes(alpha * sy, N)
            assert scaled.order == base.order
            npt.assert_allclose(scaled.locations, base.locations, atol=1e-12)

    def test_shrinks_when_minima_run_out(self, caplog):
        # a pure two-spike covariance has exactly two pseudo-spectrum minima,
        # but small N forces MDL far above that
        M = 16
        S = asf_covariance(Asf(spikes=[(-0.5, 1.0), (0.5, 1.0)]), M)
        batch = draw_samples(S, 1e-6, 12, seed=306)
        with caplog.at_level(logging.WARNING):
            est = detect_spikes(sample_covariance_y(batch), 12, grid_size=256)
        assert est.order == len(est.locations)

    def test_refinement_improves_grid_accuracy(self):
        M = 32
        # location chosen off the 4096-point grid
        loc = 0.40003
        S = asf_covariance(Asf(spikes=[(loc, 1.0)]), M)
        coarse = detect_spikes(S + 1e-12 * np.eye(M), 500, refine=False)
        fine = detect_spikes(S + 1e-12 * np.eye(M), 500, refine=True)
        assert abs(fine.locations[0] - loc) <= abs(coarse.locations[0] - loc)

    def test_spectrum_kept_on_request(self):
        S = asf_covariance(Asf(spikes=[(0.0, 1.0)]), 8)
        est = detect_spikes(S + 1e-9 * np.eye(8), 100, keep_spectrum=True)
        grid, eta = est.pseudo_spectrum
        assert grid.shape == eta.shape == (4096,)


class TestSpikeEstimate:
    def test_sorted_locations(self):
        est = SpikeEstimate(order=2, locations=[0.5, -0.5])
        npt.assert_allclose(est.locations, [-0.5, 0.5])

    def test_order_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SpikeEstimate(order=1, locations=[0.1, 0.2])
