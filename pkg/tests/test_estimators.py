import itertools

import numpy as np
import numpy.testing as npt
import pytest

from asfcov.channel import (
    Asf,
    asf_covariance,
    draw_samples,
    noise_power_for_snr,
    sample_covariance_h,
    sample_covariance_y,
)
from asfcov.dictionary import (
    assemble_design,
    atom_moment_column,
    dirac_grid,
    gaussian_family,
    nonnegativity_constraint,
    reconstruct_covariance,
)
from asfcov.estimators import (
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
from asfcov.linalg import toeplitz_from_lags
from asfcov.metrics import err_frobenius
from asfcov.spikes import detect_spikes

from conftest import random_hermitian


def enumerate_nnls(A, f):
    """Brute-force oracle: solve the unconstrained least squares on every
    support pattern, keep the best feasible solution."""
    n = A.shape[1]
    best_val, best_x = np.inf, np.zeros(n)
    for mask in itertools.product([False, True], repeat=n):
        idx = np.flatnonzero(mask)
        x = np.zeros(n)
        if idx.size:
            sol, *_ = np.linalg.lstsq(A[:, idx], f, rcond=None)
            if np.any(sol < 0):
                continue
            x[idx] = sol
        val = np.linalg.norm(A @ x - f)
        if val < best_val - 1e-12:
            best_val, best_x = val, x
    return best_x


class TestNnls:
    def test_coordinate_clamp(self):
        res = nnls(np.eye(3), np.array([1.0, -2.0, 3.0]))
        npt.assert_allclose(res.x, [1.0, 0.0, 3.0])
        assert res.converged

    def test_positive_mean(self):
        res = nnls(np.array([[1.0], [1.0]]), np.array([1.0, 3.0]))
        npt.assert_allclose(res.x, [2.0])

    def test_matches_enumeration(self, rng):
        for _ in range(50):
            A = rng.standard_normal((6, 3))
            f = rng.standard_normal(6)
            res = nnls(A, f)
            npt.assert_allclose(res.x, enumerate_nnls(A, f), atol=1e-8)

    def test_kkt_certificate(self, rng):
        for _ in range(20):
            A = rng.standard_normal((10, 6))
            f = rng.standard_normal(10)
            res = nnls(A, f, tol=1e-10)
            w = A.T @ (f - A @ res.x)
            scale = np.max(np.abs(A.T @ f))
            assert np.all(res.x >= 0)
            assert np.all(w[res.x == 0] <= 1e-8 * scale)
            assert np.all(np.abs(w[res.x > 0]) <= 1e-8 * scale)

    def test_max_outer_flags_nonconvergence(self, rng):
        A = rng.standard_normal((20, 10))
        f = rng.standard_normal(20)
        res = nnls(A, f, max_outer=1)
        assert not res.converged

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            nnls(np.zeros((3, 0)), np.zeros(3))


class TestEstimateNnls:
    def test_exact_atom_recovery(self):
        M = 7
        atoms = dirac_grid(8)
        target = toeplitz_from_lags(atom_moment_column(atoms[5], M))
        system = assemble_design(atoms, [], target, M)
        report = estimate_nnls(target, system)
        expect = np.zeros(8)
        expect[5] = 1.0
        npt.assert_allclose(report.u, expect, atol=1e-6)

    def test_lemma1_full_vs_reduced(self, rng):
        # the vectorized full-matrix fit and the weighted first-column fit
        # share their minimizer
        M = 8
        atoms = dirac_grid(6)
        spikes = [-0.33, 0.41]
        for _ in range(10):
            sigma_h = random_hermitian(rng, M)
            system = assemble_design(atoms, spikes, sigma_h, M)
            reduced = estimate_nnls(sigma_h, system)
            cols = [
                toeplitz_from_lags(atom_moment_column(a, M)).reshape(-1)
                for a in system.atoms
            ]
            A_full = np.column_stack(cols)
            f_full = sigma_h.reshape(-1)
            full = nnls(
                np.vstack([A_full.real, A_full.imag]),
                np.concatenate([f_full.real, f_full.imag]),
            )
            assert np.linalg.norm(reduced.u - full.x) <= 1e-6

    def test_never_worse_than_zero_model(self, rng):
        M = 6
        system_atoms = dirac_grid(5)
        for _ in range(10):
            sigma_h = random_hermitian(rng, M)
            system = assemble_design(system_atoms, [], sigma_h, M)
            report = estimate_nnls(sigma_h, system)
            w = system.weights
            fitted = np.linalg.norm(w * (system.design @ report.u - system.target))
            zero = np.linalg.norm(w * system.target)
            assert fitted <= zero + 1e-12

    def test_beats_sample_covariance(self, two_spike_scene):
        # detected spikes plus the Dirac grid should beat the raw sample
        # covariance most of the time in Frobenius error
        M, N = 25, 50
        sigma = asf_covariance(two_spike_scene, M)
        noise = noise_power_for_snr(20.0, two_spike_scene.mass())
        atoms = dirac_grid(2 * M)
        wins = 0
        trials = 200
        for s in range(trials):
            batch = draw_samples(sigma, noise, N, seed=(401, s))
            sy = sample_covariance_y(batch)
            sh = sample_covariance_h(batch)
            est = detect_spikes(sy, N)
            system = assemble_design(atoms, est.locations, sh, M)
            report = estimate_nnls(sh, system)
            recon = reconstruct_covariance(system, report.u)
            wins += err_frobenius(sigma, recon) < err_frobenius(sigma, sh)
        assert wins / trials >= 0.80


class TestEstimateQp:
    def test_exact_gaussian_atom(self):
        M, G = 16, 8
        atoms = gaussian_family(G)
        base = assemble_design(atoms, [], np.eye(M), M)
        u_true = np.zeros(G)
        u_true[3] = 1.0
        target = reconstruct_covariance(base, u_true)
        system = assemble_design(atoms, [], target, M)
        report = estimate_qp(target, system, constraint_grid=10_000)
        npt.assert_allclose(report.u, u_true, atol=1e-4)

    def test_all_dirac_matches_nnls(self, rng):
        M = 10
        atoms = dirac_grid(8)
        for _ in range(5):
            sigma_h = random_hermitian(rng, M)
            system = assemble_design(atoms, [0.11], sigma_h, M)
            qp = estimate_qp(sigma_h, system, constraint_grid=16)
            ls = estimate_nnls(sigma_h, system)
            assert np.max(np.abs(qp.u - ls.u)) <= 1e-5

    def test_negative_coefficient_recovered(self):
        # overlapping atoms admit negative weights as long as the mixture
        # stays non-negative on the grid
        M, G = 16, 8
        atoms = gaussian_family(G)
        base = assemble_design(atoms, [], np.eye(M), M)
        b_true = np.zeros(G)
        b_true[1], b_true[2], b_true[3] = 2.0, -0.5, 2.0
        psi = nonnegativity_constraint(atoms, 10_000)
        assert np.min(psi @ b_true) >= -1e-12  # instance is feasible
        target = reconstruct_covariance(base, b_true)
        system = assemble_design(atoms, [], target, M)
        report = estimate_qp(target, system, constraint_grid=10_000)
        assert report.u[2] < 0
        assert np.min(psi @ report.u[:G]) >= -1e-8
        npt.assert_allclose(report.u, b_true, atol=1e-4)

    def test_spike_weights_stay_nonnegative(self, rng):
        M = 12
        atoms = gaussian_family(6)
        sigma_h = random_hermitian(rng, M)
        system = assemble_design(atoms, [-0.2, 0.55], sigma_h, M)
        report = estimate_qp(sigma_h, system, constraint_grid=2000)
        assert np.all(report.u[6:] >= -1e-10)


class TestLikelihood:
    def _system(self, M=10, G=8):
        return assemble_design(dirac_grid(G), [0.37], np.eye(M), M)

    def test_zero_coefficients(self, rng):
        system = self._system()
        M = system.M
        sigma_y = random_hermitian(rng, M) + 10 * np.eye(M)
        noise = 0.4
        val = neg_log_likelihood(np.zeros(system.n_atoms), system, sigma_y, noise)
        expect = M * np.log(noise) + np.trace(sigma_y).real / noise
        npt.assert_allclose(val, expect, rtol=1e-12)

    def test_exact_model_value(self, rng):
        system = self._system()
        u = rng.uniform(0.1, 1.0, system.n_atoms)
        noise = 0.2
        sigma_y = reconstruct_covariance(system, u) + noise * np.eye(system.M)
        val = neg_log_likelihood(u, system, sigma_y, noise)
        sign, logdet = np.linalg.slogdet(sigma_y)
        npt.assert_allclose(val, logdet + system.M, rtol=1e-10)

    def test_gradient_matches_finite_differences(self, rng):
        system = self._system()
        noise = 0.15
        for _ in range(20):
            u = rng.uniform(0.05, 1.0, system.n_atoms)
            Y = rng.standard_normal((system.M, 30)) + 1j * rng.standard_normal((system.M, 30))
            sigma_y = Y @ Y.conj().T / 30
            grad = ml_gradient(u, system, sigma_y, noise)
            step = 1e-5
            for i in range(0, system.n_atoms, 3):
                up, um = u.copy(), u.copy()
                up[i] += step
                um[i] -= step
                fd = (
                    neg_log_likelihood(up, system, sigma_y, noise)
                    - neg_log_likelihood(um, system, sigma_y, noise)
                ) / (2 * step)
                assert abs(grad[i] - fd) <= 1e-4 * max(abs(fd), 1e-6)

    def test_singular_zero_noise_raises(self):
        system = self._system()
        with pytest.raises(np.linalg.LinAlgError):
            neg_log_likelihood(np.zeros(system.n_atoms), system, np.eye(system.M), 0.0)


class TestEm:
    def _system(self, M=12, G=10, spikes=(0.37,)):
        return assemble_design(dirac_grid(G), list(spikes), np.eye(M), M)

    def test_fixed_point(self, rng):
        system = self._system()
        D = system.steering_matrix()
        u_star = rng.uniform(0.1, 1.0, system.n_atoms)
        noise = 0.05
        sigma_y = (D * u_star) @ D.conj().T + noise * np.eye(system.M)
        report = em_estimate_from_covariance(
            sigma_y, noise, system, u_star, eps_em=-1.0, max_iter=1
        )
        assert np.linalg.norm(report.u - u_star) / np.linalg.norm(u_star) <= 1e-3

    def test_monotone_objective(self, rng):
        system = self._system()
        worst = -np.inf
        for _ in range(50):
            u0 = rng.uniform(0, 0.5, system.n_atoms) * (rng.random(system.n_atoms) > 0.3)
            Y = (rng.standard_normal((system.M, 30))
                 + 1j * rng.standard_normal((system.M, 30))) / np.sqrt(2)
            sigma_y = Y @ Y.conj().T / 30 + 0.01 * np.eye(system.M)
            report = em_estimate_from_covariance(
                sigma_y, 0.05, system, u0, eps_em=1e-12, max_iter=60
            )
            trace = np.asarray(report.objective_trace)
            worst = max(worst, float(np.max(np.diff(trace))))
        assert worst <= 1e-9

    def test_nonnegative_iterates(self, rng):
        system = self._system()
        Y = rng.standard_normal((system.M, 20)) + 1j * rng.standard_normal((system.M, 20))
        sigma_y = Y @ Y.conj().T / 20
        report = em_estimate_from_covariance(
            sigma_y, 0.1, system, np.full(system.n_atoms, 0.5), max_iter=30
        )
        assert np.all(report.u >= 0)

    def test_prunes_dead_atoms(self):
        system = self._system(spikes=())
        D = system.steering_matrix()
        u_true = np.zeros(system.n_atoms)
        u_true[2], u_true[7] = 1.0, 0.5
        noise = 0.05
        sigma_y = (D * u_true) @ D.conj().T + noise * np.eye(system.M)
        u0 = np.zeros_like(u_true)
        u0[2] = u0[7] = 0.8
        report = em_estimate_from_covariance(sigma_y, noise, system, u0, max_iter=50)
        dead = np.setdiff1d(np.arange(system.n_atoms), [2, 7])
        assert np.all(report.u[dead] <= 1e-10)

    def test_nnls_init_converges_no_slower(self, two_spike_scene):
        M, N = 25, 50
        sigma = asf_covariance(two_spike_scene, M)
        noise = noise_power_for_snr(20.0, two_spike_scene.mass())
        atoms = dirac_grid(2 * M)
        faster = 0
        trials = 100
        for s in range(trials):
            batch = draw_samples(sigma, noise, N, seed=(402, s))
            sy = sample_covariance_y(batch)
            sh = sample_covariance_h(batch)
            est = detect_spikes(sy, N)
            system = assemble_design(atoms, est.locations, sh, M)
            u0 = estimate_nnls(sh, system).u
            from_nnls = em_estimate_from_covariance(sy, noise, system, u0)
            from_ones = em_estimate_from_covariance(
                sy, noise, system, np.ones(system.n_atoms)
            )
            faster += from_nnls.iterations <= from_ones.iterations
        assert faster / trials >= 0.70

    def test_batch_interface_defaults_to_nnls_init(self, two_spike_scene):
        M, N = 16, 32
        sigma = asf_covariance(two_spike_scene, M)
        noise = noise_power_for_snr(10.0, two_spike_scene.mass())
        batch = draw_samples(sigma, noise, N, seed=403)
        system = assemble_design(dirac_grid(2 * M), [], sample_covariance_h(batch), M)
        report = em_estimate(batch, system)
        assert report.method == "em"
        assert np.all(report.u >= 0)

    def test_rejects_bad_inputs(self, rng):
        system = self._system()
        sigma_y = np.eye(system.M)
        with pytest.raises(ValueError):
            em_estimate_from_covariance(sigma_y, 0.0, system, np.ones(system.n_atoms))
        with pytest.raises(ValueError):
            em_estimate_from_covariance(sigma_y, 0.1, system, -np.ones(system.n_atoms))
        gauss_system = assemble_design(gaussian_family(4), [], np.eye(8), 8)
        with pytest.raises(ValueError):
            em_estimate_from_covariance(np.eye(8), 0.1, gauss_system, np.ones(4))


class TestConsistency:
    def test_error_decreases_with_samples(self):
        # exact-model scene: both fitters approach the truth as N grows
        M = 16
        atoms = dirac_grid(M)
        base = assemble_design(atoms, [], np.eye(M), M)
        rng = np.random.default_rng(88)
        u_true = rng.uniform(0, 0.2, M)
        u_true[4] = 1.0
        sigma = reconstruct_covariance(base, u_true)
        noise = 0.1
        errs_nnls, errs_em = [], []
        for N in (2 * M, 8 * M, 32 * M):
            e_n, e_m = [], []
            for s in range(5):
                batch = draw_samples(sigma, noise, N, seed=(404, N, s))
                sh = sample_covariance_h(batch)
                sy = sample_covariance_y(batch)
                system = assemble_design(atoms, [], sh, M)
                rn = estimate_nnls(sh, system)
                e_n.append(err_frobenius(sigma, reconstruct_covariance(system, rn.u)))
                rm = em_estimate_from_covariance(sy, noise, system, rn.u)
                e_m.append(err_frobenius(sigma, reconstruct_covariance(system, rm.u)))
            errs_nnls.append(np.mean(e_n))
            errs_em.append(np.mean(e_m))
        assert errs_nnls[0] > errs_nnls[1] > errs_nnls[2]
        assert errs_em[0] > errs_em[1] > errs_em[2]


class TestFlops:
    def test_nnls_zero_outer(self):
        npt.assert_allclose(flops_nnls(0, 3.0, 7, 5), 4 * 7 * 5)

    def test_nnls_unit_case(self):
        npt.assert_allclose(flops_nnls(1, 0.0, 1, 1), 16.0)

    def test_nnls_monotone(self):
        base = flops_nnls(5, 2.0, 20, 10)
        assert flops_nnls(6, 2.0, 20, 10) > base
        assert flops_nnls(5, 2.5, 20, 10) > base
        assert flops_nnls(5, 2.0, 21, 10) > base
        assert flops_nnls(5, 2.0, 20, 11) > base

    def test_em_zero_iterations(self):
        npt.assert_allclose(flops_em(0, 4, 3, 7), 4 * 3 * (7 + 2.5))

    def test_em_unit_case(self):
        npt.assert_allclose(flops_em(1, 1, 1, 1), 6.0)

    def test_em_cubic_domination(self):
        G = 10_000
        total = flops_em(10, G, 4, 4)
        assert total / (10 * G**3 / 2.0) == pytest.approx(1.0, rel=0.01)
