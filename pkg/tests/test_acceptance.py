"""Acceptance criteria, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line to the terminal summary before
asserting, so a full run prints the verdict for every criterion.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from nepv.analysis import (
    adjoint,
    analytic_adjoint,
    apriori_sigma_ks,
    eta_czbl,
    eta_m,
    inner,
    local_operator,
    operator_norm_frobenius,
    q_extremes,
    realify,
    restricted_derivative,
    rho_sigma_bound,
    self_adjointness_defect,
    sigma_lower_bound,
    spectral_radius,
    sylvester_solution,
)
from nepv.cli import RunConfig, compute_rates
from nepv.linalg import hermitian_eig, orthonormalize, tangent_angle_matrix
from nepv.problems import GpeParams, KohnShamParams, fd_derivative, gpe, kohn_sham
from nepv.scf import ScfOptions, certify, scf_iterate


def record(name, checks, elapsed=None):
    """Log the verdict and each check for one criterion, then assert."""
    failed = [label for label, ok in checks if not ok]
    timing = f" ({elapsed:.1f}s)" if elapsed is not None else ""
    verdict = "PASS" if not failed else "FAIL"
    ACCEPTANCE_LINES.append(f"{verdict}  {name}{timing}")
    ACCEPTANCE_LINES.extend(f"      [{'ok' if ok else 'FAILED'}] {label}" for label, ok in checks)
    assert not failed, failed


def within_rel(x, ref, tol):
    return x is not None and abs(x - ref) <= tol * abs(ref)


def within_abs(x, ref, tol):
    return x is not None and abs(x - ref) <= tol


def quadruple_checks(report, ref, rel, abs_obs):
    observed, rho, sup, czbl = ref
    return [
        (f"eta_sup_infty={report['eta_sup_infty']:.10f}", within_rel(report["eta_sup_infty"], rho, rel[0])),
        (f"eta_sup={report['eta_sup']:.10f}", within_rel(report["eta_sup"], sup, rel[1])),
        (f"eta_czbl={report['eta_czbl']:.10f}", within_rel(report["eta_czbl"], czbl, rel[2])),
        (f"observed={report['observed']}", within_abs(report["observed"], observed, abs_obs)),
    ]


def test_c1_ks_quadruple():
    t0 = time.perf_counter()
    report, _, _ = compute_rates(RunConfig(problem="ks", n=10, k=2, alpha=0.85))
    elapsed = time.perf_counter() - t0
    checks = quadruple_checks(report, (0.9913931781, 0.9913931591, 1.028434776, 1.430511920), (1e-7, 1e-6, 1e-6), 1e-5)
    checks.append(("runtime < 30s", elapsed < 30))
    record("C1 Kohn-Sham alpha=0.85 rate quadruple", checks, elapsed)


@pytest.mark.parametrize(
    "label, potential, beta, ref",
    [
        ("C2 GPE radial beta=3.5 rate quadruple", "radial", 3.5, (0.9136140, 0.9136173, 1.019727, 2.342686)),
        ("C3 GPE nonradial beta=2.2 rate quadruple", "nonradial", 2.2, (0.9652599, 0.9652614, 1.073434, 2.043247)),
    ],
)
def test_c2_c3_gpe_quadruple(label, potential, beta, ref):
    t0 = time.perf_counter()
    report, _, _ = compute_rates(RunConfig(problem="gpe", grid_n=10, ell=1.0, omega=0.85, beta=beta, potential=potential))
    elapsed = time.perf_counter() - t0
    checks = quadruple_checks(report, ref, (1e-5, 1e-5, 1e-5), 1e-4)
    checks.append(("runtime < 120s", elapsed < 120))
    record(label, checks, elapsed)


def test_c4_shift_landscape(ks1):
    p, cert = ks1
    rho = lambda s: spectral_radius(local_operator(p, cert, s))
    fine = np.linspace(0.2, 0.5, 61)
    vals = np.array([rho(s) for s in fine])
    i = int(np.argmin(vals))
    # the fine window must hold the global minimum over a wide log grid
    coarse = np.geomspace(0.01, 50, 60)
    coarse_min = min(rho(s) for s in coarse)
    mu_min, mu_max = q_extremes(p, cert)
    s_lower = sigma_lower_bound(mu_max, cert.delta_star)
    s_apriori = apriori_sigma_ks(1.0, 10)
    tail = np.array([rho(s) for s in np.linspace(5, 50, 46)])
    checks = [
        (f"min rho={vals[i]:.4f} in [0.30, 0.36]", 0.30 <= vals[i] <= 0.36),
        (f"argmin sigma={fine[i]:.3f} in [0.30, 0.42]", 0.30 <= fine[i] <= 0.42),
        ("fine minimum is global", vals[i] <= coarse_min + 1e-12),
        (f"rho(sigma_lower={s_lower:.3f}) < 1", rho(s_lower) < 1),
        (f"rho(sigma_apriori={s_apriori:.3f}) < 1", rho(s_apriori) < 1),
        ("rho strictly increasing on [5, 50]", bool(np.all(np.diff(tail) > 0))),
        ("rho < 1 on [5, 50]", bool(np.all(tail < 1))),
    ]
    record("C4 Kohn-Sham alpha=1 shift landscape", checks)


def test_c5_divergence_threshold():
    checks = []
    for alpha in np.round(np.arange(0.1, 1.01, 0.1), 1):
        p = kohn_sham(KohnShamParams(10, 2, alpha))
        hist = scf_iterate(p, p.start(), ScfOptions(max_iter=5000, tol_residual=1e-12))
        expect = alpha <= 0.8
        checks.append((f"alpha={alpha} converged={hist.converged}", hist.converged == expect))
        # rho at the solution; for divergent alphas take it from the shifted solve
        V = hist.V
        if not hist.converged:
            V = scf_iterate(p, p.start(), ScfOptions(sigma=p.apriori_sigma, tol_residual=1e-13, max_iter=50_000)).V
        r = spectral_radius(local_operator(p, certify(p, V, 1e-11)))
        checks.append((f"alpha={alpha} rho={r:.4f}", (r < 1) == hist.converged))
    record("C5 plain SCF divergence threshold", checks)


def _random_tangent(rng, op):
    Z = rng.standard_normal((op.p, op.k))
    if op.field == "complex":
        Z = Z + 1j * rng.standard_normal((op.p, op.k))
    return Z


def test_c6_property_suite(ks085, ks1, gpe_radial):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    checks = []
    for name, (p, cert) in {"ks": ks085, "gpe": gpe_radial}.items():
        M0 = realify(local_operator(p, cert))
        rho, sup = spectral_radius(M0), operator_norm_frobenius(M0)
        etas = [eta_m(M0, m) for m in (2, 4, 8)]
        czbl = eta_czbl(p, cert)
        checks.append((f"{name} ordering chain", rho <= min(etas) + 1e-10 and max(etas) <= sup + 1e-10 and sup <= czbl + 1e-10))

        op = local_operator(p, cert)
        adj_t, adj_a = adjoint(op), analytic_adjoint(p, cert)
        pair = agree = 0.0
        for _ in range(10):
            Z, Y = _random_tangent(rng, op), _random_tangent(rng, op)
            scale = np.linalg.norm(Z) * np.linalg.norm(Y)
            pair = max(pair, abs(inner(op(Z), Y) - inner(Z, adj_a(Y))) / scale)
            agree = max(agree, np.linalg.norm(adj_t(Y) - adj_a(Y)) / np.linalg.norm(Y))
        checks.append((f"{name} adjoint pairing {pair:.1e}", pair <= 1e-11))
        checks.append((f"{name} analytic vs transposed adjoint {agree:.1e}", agree <= 1e-11))

        Vs = cert.Vstar
        pert = rng.standard_normal(Vs.shape) + (0 if p.is_real else 1j * rng.standard_normal(Vs.shape))
        V = orthonormalize(Vs + 0.05 * pert).basis
        X = sylvester_solution(p, cert, V)
        rhs = cert.Vstar_perp.conj().T @ (p.evaluate(Vs) - p.evaluate(V)) @ Vs
        lhs = cert.lam_perp[:, None] * X - X * cert.lam[None, :]
        checks.append((f"{name} Sylvester residual", np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(X)))

        two_path = 0.0
        for sigma in rng.uniform(0, 3, 3):
            a, b = local_operator(p, cert, sigma), local_operator(p, cert, sigma, form="restricted")
            Z = _random_tangent(rng, a)
            two_path = max(two_path, np.linalg.norm(a(Z) - b(Z)) / max(np.linalg.norm(a(Z)), np.linalg.norm(Z)))
        checks.append((f"{name} two-path identity {two_path:.1e}", two_path <= 1e-12))

        Q = restricted_derivative(p, cert)
        defect = self_adjointness_defect(Q)
        checks.append((f"{name} Q self-adjoint defect {defect:.1e}", defect <= 1e-10))
        checks.append((f"{name} mu_min > 0", q_extremes(p, cert)[0] > 0))

        fd = 0.0
        for _ in range(10):
            Xd = rng.standard_normal(Vs.shape) + (0 if p.is_real else 1j * rng.standard_normal(Vs.shape))
            exact = p.derivative(Vs, Xd)
            fd = max(fd, np.linalg.norm(fd_derivative(p, Vs, Xd) - exact) / np.linalg.norm(exact))
        checks.append((f"{name} finite-difference derivative {fd:.1e}", fd <= 1e-5))

        W = np.linalg.qr(rng.standard_normal((p.k, p.k)) + (0 if p.is_real else 1j * rng.standard_normal((p.k, p.k))))[0]
        dH = np.linalg.norm(p.evaluate(V @ W) - p.evaluate(V))
        T1, T2 = tangent_angle_matrix(V, cert), tangent_angle_matrix(V @ W, cert)
        checks.append((f"{name} unitary invariance of H", dH <= 1e-12 * np.linalg.norm(p.evaluate(V))))
        s1, s2 = np.linalg.svd(T1, compute_uv=False), np.linalg.svd(T2, compute_uv=False)
        checks.append((f"{name} unitary invariance of T", np.linalg.norm(s1 - s2) <= 1e-12 * max(1.0, np.linalg.norm(s1))))

    # first-order law: T(next) = -L(T(V)) + o(||T(V)||), see test_analysis
    p, cert = ks085
    op = local_operator(p, cert)
    Z0 = rng.standard_normal((p.n - p.k, p.k))
    Z0 /= np.linalg.norm(Z0)
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4):
        V = orthonormalize(cert.Vstar + eps * cert.Vstar_perp @ Z0).basis
        V_next = hermitian_eig(p.evaluate(V)).eigenvectors[:, : p.k]
        T, T_next = tangent_angle_matrix(V, cert), tangent_angle_matrix(V_next, cert)
        ratios.append(np.linalg.norm(T_next + op(T)) / np.linalg.norm(T))
    checks.append(("first-order ratio decays >= 5x per decade", ratios[0] >= 5 * ratios[1] and ratios[1] >= 5 * ratios[2]))

    p, cert = ks1
    mu_min, mu_max = q_extremes(p, cert)
    checks.append(("ks alpha=1 mu_min > 0", mu_min > 0))
    ok = True
    for sigma in rng.uniform(-cert.delta_star + 0.01, 30, 50):
        ok &= spectral_radius(local_operator(p, cert, sigma)) <= rho_sigma_bound(mu_min, mu_max, cert.delta_star, cert.s_star, sigma) + 1e-10
    checks.append(("shift bound dominates on 50 sampled sigma", ok))
    record("C6 property suite", checks, time.perf_counter() - t0)


def test_c7_linear_cases():
    rng = np.random.default_rng(5)
    checks = []
    p = kohn_sham(KohnShamParams(10, 2, 0.0))
    V0 = orthonormalize(rng.standard_normal((10, 2))).basis
    h = scf_iterate(p, V0, ScfOptions(tol_residual=1e-12))
    checks.append((f"ks alpha=0: {h.status} after {h.iterations}", h.converged and h.iterations == 1))
    p = gpe(GpeParams(N=10, beta=0.0))
    h = scf_iterate(p, p.start(0), ScfOptions(tol_residual=1e-12))
    checks.append((f"gpe beta=0: {h.status} after {h.iterations}", h.converged and h.iterations == 1))
    record("C7 alpha=0 / beta=0 converge in one iteration", checks)
