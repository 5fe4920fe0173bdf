"""Coefficient estimators for the dictionary covariance model.

Three fitters share the weighted lag-domain design built in
:mod:`asfcov.dictionary`:

* NNLS -- active-set non-negative least squares, for dictionaries whose
  atoms have disjoint support (all coefficients are then non-negative);
* QP -- least squares with the density non-negativity imposed on a fine
  grid, for overlapping dictionaries where individual coefficients may
  go negative;
* ML-EM -- maximum likelihood by expectation-maximization, restricted to
  all-Dirac systems where every atom covariance has rank one.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .dictionary import nonnegativity_constraint
from .linalg import toeplitz_from_lags, toeplitz_project
from .spikes import SpikeEstimate
from .validation import check_hermitian

NNLS_TOL = 1e-10
EM_COEFF_FLOOR = 1e-12
EM_PRUNE_LEVEL = 1e-10
EM_PRUNE_PATIENCE = 5


@dataclass
class EstimatorReport:
    """Outcome of one coefficient fit: the coefficient vector (continuous
    part first, then spike weights), the spike estimate it used, and
    iteration diagnostics."""

    u: np.ndarray
    spikes: SpikeEstimate | None
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    wall_time: float = 0.0
    method: str = ""


@dataclass
class NnlsResult:
    x: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list


def nnls(A, f, tol=NNLS_TOL, max_outer=None):
    """Lawson-Hanson active-set non-negative least squares.

    Solves min ||A x - f|| over x >= 0.  At the returned solution the
    gradient w = A^T (f - A x) satisfies the KKT conditions to within
    ``tol * ||A^T f||_inf``: w_i <= tol-level for zero coordinates and
    |w_i| <= tol-level for positive ones.  If ``max_outer`` passes are
    exhausted the best iterate is returned with ``converged=False``.
    """
    A = np.asarray(A, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 1:
        raise ValueError("A must be a matrix with at least one column")
    n = A.shape[1]
    if max_outer is None:
        max_outer = 3 * n
    scale = max(np.max(np.abs(A.T @ f)), np.finfo(float).tiny)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    trace = []
    converged = False
    outer = 0
    while outer < max_outer:
        w = A.T @ (f - A @ x)
        trace.append(float(np.linalg.norm(f - A @ x)))
        candidates = ~passive
        if not np.any(candidates) or np.max(w[candidates]) <= tol * scale:
            converged = True
            break
        j = np.flatnonzero(candidates)[np.argmax(w[candidates])]
        passive[j] = True
        outer += 1
        while True:
            z = np.zeros(n)
            sol, *_ = np.linalg.lstsq(A[:, passive], f, rcond=None)
            z[passive] = sol
            if np.min(z[passive]) > 0:
                x = z
                break
            # shortest backtrack keeping the iterate feasible
            blocking = np.flatnonzero(passive & (z <= 0))
            ratios = x[blocking] / (x[blocking] - z[blocking])
            alpha = np.min(ratios)
            x = x + alpha * (z - x)
            drop = passive & (x <= 1e-12 * max(np.max(np.abs(x)), 1e-300))
            # the limiting coordinate always leaves, guaranteeing progress
            drop[blocking[np.argmin(ratios)]] = True
            passive &= ~drop
            x[~passive] = 0.0
    else:
        trace.append(float(np.linalg.norm(f - A @ x)))
    return NnlsResult(x=x, iterations=outer, converged=converged, objective_trace=trace)


def _stack_real(Ac, gc):
    """Real-stack a complex least-squares system as [Re; Im] row blocks."""
    B = np.vstack([Ac.real, Ac.imag])
    g = np.concatenate([gc.real, gc.imag])
    return B, g


def _weighted_system(system, sigma_h):
    """Weighted lag-domain system W*(A u - sigma) for a fresh target."""
    sigma_h = check_hermitian(sigma_h, name="sigma_h")
    if sigma_h.shape[0] != system.M:
        raise ValueError("sigma_h dimension does not match the design system")
    _, target = toeplitz_project(sigma_h)
    w = system.weights
    return _stack_real(w[:, None] * system.design, w * target)


def _system_spikes(system):
    return SpikeEstimate(order=system.n_spikes, locations=system.spike_locations)


def estimate_nnls(sigma_h, system, tol=NNLS_TOL, max_outer=None):
    """Fit non-negative coefficients to a sample covariance.

    Minimizes ||W (A u - sigma)|| over u >= 0, the Toeplitz-reduced form
    of the full Frobenius fit; both give the same minimizer because the
    Toeplitz projection residual is orthogonal to the model space.  Meant
    for Dirac (or otherwise disjoint-support) dictionaries, where the
    density non-negativity is exactly elementwise.
    """
    start = time.perf_counter()
    B, g = _weighted_system(system, sigma_h)
    res = nnls(B, g, tol=tol, max_outer=max_outer)
    return EstimatorReport(
        u=res.x,
        spikes=_system_spikes(system),
        objective_trace=res.objective_trace,
        iterations=res.iterations,
        converged=res.converged,
        wall_time=time.perf_counter() - start,
        method="nnls",
    )


# ---------------------------------------------------------------------------
# QP estimator (overlapping dictionaries)

QP_EPS_ABS = 1e-6
QP_EPS_REL = 1e-4
QP_MAX_ITER = 20_000
QP_RHO = 1.0
QP_RELAX = 1.6
QP_FEAS_TOL = 1e-8


def _admm_inequality_ls(B, g, C, max_iter=QP_MAX_ITER, rho=QP_RHO, relax=QP_RELAX,
                        eps_abs=QP_EPS_ABS, eps_rel=QP_EPS_REL):
    """Operator-splitting solver for min ||B u - g||^2 s.t. C u >= 0.

    Standard splitting with slack z = C u >= 0, penalty ``rho`` and
    over-relaxation ``relax``; stops when both primal and dual residuals
    pass the absolute/relative test.
    """
    n = B.shape[1]
    BtB = B.T @ B
    Btg = B.T @ g
    CtC = C.T @ C
    try:
        KKT = np.linalg.cholesky(2.0 * BtB + rho * CtC)
        solve = lambda rhs: np.linalg.solve(KKT.T, np.linalg.solve(KKT, rhs))
    except np.linalg.LinAlgError:
        Kmat = 2.0 * BtB + rho * CtC
        solve = lambda rhs: np.linalg.lstsq(Kmat, rhs, rcond=None)[0]
    u = np.zeros(n)
    z = np.zeros(C.shape[0])
    y = np.zeros(C.shape[0])  # scaled dual
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        u = solve(2.0 * Btg + rho * C.T @ (z - y))
        Cu = C @ u
        Cu_rel = relax * Cu + (1.0 - relax) * z
        z_old = z
        z = np.maximum(Cu_rel + y, 0.0)
        y = y + Cu_rel - z
        r_prim = np.max(np.abs(Cu - z))
        r_dual = rho * np.max(np.abs(C.T @ (z - z_old)))
        tol_prim = eps_abs + eps_rel * max(np.max(np.abs(Cu)), np.max(np.abs(z)), 1e-300)
        tol_dual = eps_abs + eps_rel * max(rho * np.max(np.abs(C.T @ y)), 1e-300)
        if r_prim <= tol_prim and r_dual <= tol_dual:
            converged = True
            break
    return u, z, it, converged


def _polish_qp(B, g, C, z, obj_ref):
    """Re-solve the least squares restricted to the null space of the tight
    constraints, growing the tight set until feasible; accept only if no
    worse than the iterate."""
    n = B.shape[1]
    tight = z <= 1e-6 * max(1.0, float(np.max(z, initial=0.0)))
    for _ in range(n + 1):
        C_act = C[tight]
        if C_act.shape[0] == 0:
            u, *_ = np.linalg.lstsq(B, g, rcond=None)
        else:
            _, s, Vt = np.linalg.svd(C_act, full_matrices=True)
            rank = int(np.sum(s > max(s[0], 1e-300) * 1e-12))
            null_basis = Vt[rank:].T
            if null_basis.shape[1] == 0:
                u = np.zeros(n)
            else:
                w, *_ = np.linalg.lstsq(B @ null_basis, g, rcond=None)
                u = null_basis @ w
        violated = C @ u < -QP_FEAS_TOL
        if not np.any(violated):
            obj = float(np.linalg.norm(B @ u - g) ** 2)
            if obj <= obj_ref * (1 + 1e-9) + 1e-12:
                return u
            return None
        tight = tight | violated
    return None


def estimate_qp(sigma_h, system, constraint_grid=10_000, max_iter=QP_MAX_ITER):
    """Fit coefficients of an overlapping dictionary.

    Minimizes ||W (A u - sigma)||^2 subject to spike weights c >= 0 and the
    reconstructed density being non-negative on a uniform grid of
    ``constraint_grid`` points.  Solved by operator splitting followed by
    an active-set polish; non-convergence is flagged on the report with
    the best iterate returned.
    """
    start = time.perf_counter()
    B, g = _weighted_system(system, sigma_h)
    psi = nonnegativity_constraint(system.atoms[: system.n_continuous], constraint_grid)
    r = system.n_spikes
    C = np.zeros((psi.shape[0] + r, system.n_atoms))
    C[: psi.shape[0], : system.n_continuous] = psi
    if r:
        C[psi.shape[0]:, system.n_continuous:] = np.eye(r)
    u, z, iters, converged = _admm_inequality_ls(B, g, C, max_iter=max_iter)
    obj = float(np.linalg.norm(B @ u - g) ** 2)
    admm_feasible = float(np.min(C @ u, initial=0.0)) >= -QP_FEAS_TOL
    # an infeasible iterate underestimates the constrained objective, so it
    # only serves as a reference when feasible itself
    polished = _polish_qp(B, g, C, z, obj if admm_feasible else np.inf)
    if polished is not None:
        u = polished
    elif not admm_feasible:
        converged = False
    return EstimatorReport(
        u=u,
        spikes=_system_spikes(system),
        objective_trace=[obj, float(np.linalg.norm(B @ u - g) ** 2)],
        iterations=iters,
        converged=converged,
        wall_time=time.perf_counter() - start,
        method="qp",
    )


# ---------------------------------------------------------------------------
# Maximum likelihood via EM (all-Dirac dictionaries)


def _model_covariance(system, u, noise_power):
    lags = system.design @ u
    S = toeplitz_from_lags(lags)
    return S + noise_power * np.eye(system.M)


def neg_log_likelihood(u, system, sigma_y, noise_power):
    """Gaussian negative log likelihood (per snapshot, constants dropped):
    log det(Sigma(u) + N0 I) + tr((Sigma(u) + N0 I)^{-1} sample_cov)."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("coefficients must be non-negative")
    sigma_y = check_hermitian(sigma_y, name="sigma_y")
    S = _model_covariance(system, u, noise_power)
    L = np.linalg.cholesky(S)  # raises LinAlgError if singular (e.g. N0 = 0, u = 0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L).real)))
    half = np.linalg.solve(L, sigma_y)
    inner = np.linalg.solve(L.conj().T, half)
    return logdet + float(np.trace(inner).real)


def ml_gradient(u, system, sigma_y, noise_power):
    """Gradient of the negative log likelihood: entry i is
    tr((S^{-1} - S^{-1} sample_cov S^{-1}) S_i), computed from diagonal
    sums so atom covariances are never materialized."""
    sigma_y = check_hermitian(sigma_y, name="sigma_y")
    S = _model_covariance(system, np.asarray(u, dtype=np.float64), noise_power)
    S_inv = np.linalg.inv(S)
    K = S_inv - S_inv @ sigma_y @ S_inv
    M = system.M
    diag_sums = np.array([np.trace(K, offset=k) for k in range(M)])
    mult = np.full(M, 2.0)
    mult[0] = 1.0
    return np.real(system.design.T @ (mult * diag_sums))


def em_estimate_from_covariance(sigma_y, noise_power, system, u0, eps_em=None,
                                max_iter=100):
    """EM iteration driven by a sample covariance (the per-snapshot E-step
    statistics only enter through it).

    E-step: posterior covariance of the latent per-atom gains,
    Sigma_x = (D^H D / N0 + diag(u)^{-1})^{-1}; M-step: each coefficient
    becomes its posterior second moment.  Stops when the likelihood
    improvement drops below ``eps_em`` (default 1e-4 * M).  Coefficients
    are floored at 1e-12 inside the inverse, and atoms stuck below 1e-10
    for five consecutive iterations are frozen at zero and dropped from
    the E-step.
    """
    if noise_power <= 0:
        raise ValueError("EM requires noise_power > 0")
    if not system.is_all_dirac():
        raise ValueError("EM applies only to all-Dirac dictionaries (rank-1 atoms)")
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (system.n_atoms,):
        raise ValueError(f"u0 must have length {system.n_atoms}")
    if np.any(u0 < 0):
        raise ValueError("u0 must be non-negative")
    sigma_y = check_hermitian(sigma_y, name="sigma_y")
    if eps_em is None:
        eps_em = 1e-4 * system.M

    start = time.perf_counter()
    D = system.steering_matrix()
    gram = D.conj().T @ D
    cross = D.conj().T @ sigma_y @ D
    n = system.n_atoms

    u = np.maximum(u0, EM_COEFF_FLOOR)
    active = np.ones(n, dtype=bool)
    low_streak = np.zeros(n, dtype=int)
    trace = [neg_log_likelihood(u, system, sigma_y, noise_power)]
    converged = False
    iterations = 0
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        precision = gram[np.ix_(idx, idx)] / noise_power
        precision[np.diag_indices(len(idx))] += 1.0 / np.maximum(u[idx], EM_COEFF_FLOOR)
        Sx = np.linalg.inv(precision)
        second = Sx @ cross[np.ix_(idx, idx)] @ Sx / noise_power**2
        u_new = np.zeros(n)
        u_new[idx] = np.real(np.diag(second)) + np.real(np.diag(Sx))

        low = active & (u_new <= EM_PRUNE_LEVEL)
        low_streak[low] += 1
        low_streak[active & ~low] = 0
        f = neg_log_likelihood(u_new, system, sigma_y, noise_power)
        freeze = (low_streak >= EM_PRUNE_PATIENCE) & active
        if np.any(freeze):
            # freeze only if zeroing the decayed atoms does not degrade the
            # likelihood (keeps the objective trace monotone); otherwise
            # retry once they have decayed further
            frozen = u_new.copy()
            frozen[freeze] = 0.0
            f_frozen = neg_log_likelihood(frozen, system, sigma_y, noise_power)
            if f_frozen <= f:
                active &= ~freeze
                u_new, f = frozen, f_frozen

        u = u_new
        iterations += 1
        trace.append(f)
        if trace[-2] - f <= eps_em:
            converged = True
            break
        if not np.any(active):
            converged = True
            break

    return EstimatorReport(
        u=u,
        spikes=_system_spikes(system),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        wall_time=time.perf_counter() - start,
        method="em",
    )


def em_estimate(batch, system, u0=None, eps_em=None, max_iter=100):
    """ML-EM fit from a snapshot batch.

    ``u0`` defaults to the NNLS solution, which empirically converges in
    fewer iterations than a flat start.
    """
    from .channel import sample_covariance_h, sample_covariance_y

    sigma_y = sample_covariance_y(batch)
    if u0 is None:
        u0 = estimate_nnls(sample_covariance_h(batch), system).u
    report = em_estimate_from_covariance(
        sigma_y, batch.noise_power, system, u0, eps_em=eps_em, max_iter=max_iter
    )
    return report


# ---------------------------------------------------------------------------
# FLOP estimates for the two proposed fitters


def flops_nnls(n_outer, avg_inner, n_atoms, M):
    """Approximate FLOP count of the active-set NNLS fit with ``n_outer``
    outer passes, ``avg_inner`` average inner iterations, ``n_atoms``
    columns and a 2M-row real stacked system."""
    if min(n_outer, avg_inner, n_atoms, M) < 0:
        raise ValueError("arguments must be non-negative")
    I = float(n_outer)
    poly = (I**4 / 8.0 + (M + 0.75) * I**3 + (3.0 * M + 7.0 / 8.0) * I**2
            + (2.0 * M + 0.25) * I)
    return 4.0 * (I + 1.0) * n_atoms * M + (1.0 + avg_inner) * poly


def flops_em(n_iter, n_atoms, M, N):
    """Approximate FLOP count of the EM fit: one-off Gram/projection setup
    plus the per-iteration E/M-step cost."""
    if min(n_iter, n_atoms, M, N) < 0:
        raise ValueError("arguments must be non-negative")
    G = float(n_atoms)
    setup = G * M * (N + 0.5 * (G + 1.0))
    per_iter = G**3 / 2.0 + G**2 * (N + 1.5) + G * N
    return setup + float(n_iter) * per_iter
