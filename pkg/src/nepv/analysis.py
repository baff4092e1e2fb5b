"""Local convergence analysis of (level-shifted) SCF.

The central object is the local R-linear operator

    L_sigma(Z) = D_sigma * (Vp^H DH_sigma(V*)[Vp Z] V*)

acting on tangent-angle matrices ``Z`` of size ``(n-k) x k``; ``*`` is the
Hadamard product and ``D_sigma[i, j] = 1 / (lam[k+i] - lam[j] + sigma)``.
Its spectral radius is the asymptotic SCF rate and its Frobenius-induced
norm the worst one-step contraction.

Operators are applied matrix-free through :class:`RealLinearMap` and turned
into dense real matrices by :func:`realify` for spectra and norms. For a real
problem (``NepvProblem.is_real``) the maps act on real ``Z`` only; otherwise
on complex ``Z`` viewed as a real space of dimension ``2N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .errors import (
    InvalidSpectrum,
    NoRootInRange,
    NotSelfAdjoint,
    ShiftOutOfRange,
    TooLarge,
)
from .linalg import as_basis
from .problems import NepvProblem, laplacian_inverse_norm
from .scf import TOL_GAP, SolutionCertificate

__all__ = [
    "REALIFY_CAP",
    "RealLinearMap",
    "RateReport",
    "inner",
    "m2v",
    "v2m",
    "identity_map",
    "gap_matrix",
    "sylvester_solution",
    "local_operator",
    "restricted_derivative",
    "czbl_operator",
    "realify",
    "derealify",
    "spectral_radius",
    "operator_norm_frobenius",
    "normality_defect",
    "adjoint",
    "analytic_adjoint",
    "eta_sup",
    "eta_sup_infty",
    "eta_czbl",
    "eta_m",
    "self_adjointness_defect",
    "q_extremes",
    "rho_sigma_bound",
    "sigma_lower_bound",
    "apriori_sigma_ks",
    "apriori_sigma_gpe",
    "optimal_sigma",
    "rate_report",
]

REALIFY_CAP = 20_000

Field = Literal["complex", "real"]


@dataclass(frozen=True)
class RealLinearMap:
    """An R-linear map on ``p x k`` matrices.

    ``field="complex"`` means the domain is ``C^{p x k}`` over the reals
    (dimension ``2pk``); ``field="real"`` restricts it to ``R^{p x k}``.
    """

    act: Callable[[np.ndarray], np.ndarray]
    p: int
    k: int
    field: Field = "complex"
    name: str = ""

    @property
    def N(self) -> int:
        return self.p * self.k

    @property
    def dim(self) -> int:
        return 2 * self.N if self.field == "complex" else self.N

    def __call__(self, Z):
        return self.act(np.asarray(Z).reshape(self.p, self.k))


def inner(X, Y) -> float:
    """``Re tr(X^H Y)``."""
    return float(np.real(np.vdot(X, Y)))


def m2v(Z: np.ndarray, field: Field = "complex") -> np.ndarray:
    """Column-major vec of the real part, then (complex field) of the imaginary part."""
    Z = np.asarray(Z)
    re = np.real(Z).ravel(order="F")
    if field == "real":
        return re
    return np.concatenate([re, np.imag(Z).ravel(order="F")])


def v2m(x: np.ndarray, p: int, k: int, field: Field = "complex") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    N = p * k
    if field == "real":
        return x.reshape(p, k, order="F")
    return (x[:N] + 1j * x[N:]).reshape(p, k, order="F")


def identity_map(p: int, k: int, field: Field = "complex") -> RealLinearMap:
    return RealLinearMap(lambda Z: Z, p, k, field, "identity")


def _field_of(problem: NepvProblem) -> Field:
    return "real" if problem.is_real else "complex"


def gap_matrix(cert: SolutionCertificate, sigma: float = 0.0, tol_gap: float = TOL_GAP) -> np.ndarray:
    """``D_sigma[i, j] = 1 / (lam[k+i] - lam[j] + sigma)``; shape ``(n-k, k)``."""
    if sigma <= -cert.delta_star + tol_gap:
        raise ShiftOutOfRange(f"sigma={sigma} must exceed -delta_star={-cert.delta_star}")
    return 1.0 / (cert.lam_perp[:, None] - cert.lam[None, :] + sigma)


def sylvester_solution(problem: NepvProblem, cert: SolutionCertificate, V, sigma: float = 0.0) -> np.ndarray:
    """Solution ``X(V)`` of ``Lp X - X (L - sigma) = Vp^H [H_s(V*) - H_s(V)] V*``."""
    D = gap_matrix(cert, sigma)
    V = as_basis(V)
    Vs, Vp = cert.Vstar, cert.Vstar_perp
    dH = problem.evaluate(Vs) - problem.evaluate(V)
    if sigma != 0:
        dH = dH - sigma * (Vs @ Vs.conj().T - V @ V.conj().T)
    return D * (Vp.conj().T @ dH @ Vs)


def czbl_operator(problem: NepvProblem, cert: SolutionCertificate) -> RealLinearMap:
    """``Z -> Vp^H DH(V*)[Vp Z] V*`` (the unscaled derivative block)."""
    Vs, Vp = cert.Vstar, cert.Vstar_perp

    def act(Z):
        return Vp.conj().T @ problem.derivative(Vs, Vp @ Z) @ Vs

    return RealLinearMap(act, cert.n - cert.k, cert.k, _field_of(problem), "czbl")


def restricted_derivative(problem: NepvProblem, cert: SolutionCertificate) -> RealLinearMap:
    """``Q(Z) = Vp^H DH(V*)[Vp Z] V* + Lp Z - Z L``."""
    block = czbl_operator(problem, cert).act
    lam, lam_perp = cert.lam, cert.lam_perp

    def act(Z):
        return block(Z) + lam_perp[:, None] * Z - Z * lam[None, :]

    return RealLinearMap(act, cert.n - cert.k, cert.k, _field_of(problem), "Q")


def local_operator(
    problem: NepvProblem,
    cert: SolutionCertificate,
    sigma: float = 0.0,
    form: Literal["direct", "restricted"] = "direct",
) -> RealLinearMap:
    """Local R-linear operator ``L_sigma`` of level-shifted SCF at ``V*``.

    ``form="direct"`` differentiates ``H_sigma(V) = H(V) - sigma V V^H``;
    ``form="restricted"`` uses the equivalent ``D_sigma * Q(Z) - Z``.
    """
    D = gap_matrix(cert, sigma)
    Vs, Vp = cert.Vstar, cert.Vstar_perp
    p, k = Vp.shape[1], Vs.shape[1]
    if form == "direct":

        def act(Z):
            X = Vp @ Z
            dH = problem.derivative(Vs, X)
            if sigma != 0:
                dH = dH - sigma * (Vs @ X.conj().T + X @ Vs.conj().T)
            return D * (Vp.conj().T @ dH @ Vs)

    elif form == "restricted":
        Q = restricted_derivative(problem, cert).act

        def act(Z):
            return D * Q(Z) - Z

    else:
        raise ValueError(f"unknown form {form!r}")
    return RealLinearMap(act, p, k, _field_of(problem), f"L_sigma({sigma:g})")


def realify(op: RealLinearMap, cap: int = REALIFY_CAP) -> np.ndarray:
    """Dense real matrix ``M`` with ``M @ m2v(Z) = m2v(op(Z))``.

    Built column by column from the images of the basis ``E_ij`` (and
    ``i E_ij`` on the complex field).
    """
    if op.N > cap:
        raise TooLarge(f"N = {op.N} exceeds the realify cap {cap}")
    d = op.dim
    M = np.empty((d, d))
    e = np.zeros(d)
    for j in range(d):
        e[j] = 1.0
        Y = op.act(v2m(e, op.p, op.k, op.field))
        M[:, j] = m2v(Y, op.field)
        e[j] = 0.0
    return M


def derealify(M: np.ndarray, p: int, k: int, field: Field = "complex", name: str = "") -> RealLinearMap:
    """Wrap a dense real matrix back into a matrix-free action."""
    M = np.asarray(M)
    return RealLinearMap(lambda Z: v2m(M @ m2v(Z, field), p, k, field), p, k, field, name)


def _dense(op) -> np.ndarray:
    return op if isinstance(op, np.ndarray) else realify(op)


def spectral_radius(op) -> float:
    """Largest eigenvalue modulus of the real representation of `op`."""
    M = _dense(op)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def operator_norm_frobenius(op) -> float:
    """Operator norm induced by the Frobenius norm (largest singular value)."""
    M = _dense(op)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def normality_defect(op) -> float:
    """``||M M^T - M^T M||_F``; zero exactly when the operator is normal."""
    M = _dense(op)
    return float(np.linalg.norm(M @ M.T - M.T @ M))


def adjoint(op: RealLinearMap) -> RealLinearMap:
    """Adjoint with respect to ``Re tr(X^H Y)``, via the transposed realification.

    The real representation uses an orthonormal basis for this inner product,
    so the adjoint is represented by the plain transpose.
    """
    return derealify(realify(op).T, op.p, op.k, op.field, f"{op.name}*")


def analytic_adjoint(problem: NepvProblem, cert: SolutionCertificate) -> RealLinearMap:
    """Closed-form adjoint of the unshifted local operator, when the problem has one."""
    if not problem.has_analytic_adjoint:
        raise ValueError(f"{problem.label} has no analytic adjoint")
    D = gap_matrix(cert, 0.0)
    p, k = cert.n - cert.k, cert.k
    return RealLinearMap(
        lambda Y: problem.local_adjoint(cert, D, Y), p, k, _field_of(problem), "L*"
    )


def eta_sup_infty(problem: NepvProblem, cert: SolutionCertificate, sigma: float = 0.0) -> float:
    return spectral_radius(local_operator(problem, cert, sigma))


def eta_sup(problem: NepvProblem, cert: SolutionCertificate, sigma: float = 0.0) -> float:
    return operator_norm_frobenius(local_operator(problem, cert, sigma))


def eta_czbl(problem: NepvProblem, cert: SolutionCertificate) -> float:
    """``|||Z -> Vp^H DH(V*)[Vp Z] V*|||_F / delta_star``."""
    return operator_norm_frobenius(czbl_operator(problem, cert)) / cert.delta_star


def eta_m(op, m: int) -> float:
    """``|||op^m|||_F ** (1/m)``; equals the norm at ``m = 1`` and tends to the spectral radius."""
    if m < 1:
        raise ValueError("m must be >= 1")
    M = _dense(op)
    Mm = np.linalg.matrix_power(M, m)
    nrm = np.linalg.norm(Mm, 2)
    return float(nrm ** (1.0 / m))


def self_adjointness_defect(op) -> float:
    """Relative asymmetry ``||M - M^T||_F / ||M||_F`` of the real representation."""
    M = _dense(op)
    scale = np.linalg.norm(M)
    return float(np.linalg.norm(M - M.T) / scale) if scale > 0 else 0.0


def q_extremes(problem: NepvProblem, cert: SolutionCertificate, tol: float = 1e-8) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the restricted derivative operator.

    Raises :class:`NotSelfAdjoint` if the relative asymmetry exceeds `tol`.
    A non-positive ``mu_min`` is returned as is; callers check the sign.
    """
    M = realify(restricted_derivative(problem, cert))
    defect = self_adjointness_defect(M)
    if defect > tol:
        raise NotSelfAdjoint(f"restricted derivative asymmetry {defect:.3e} > {tol:.1e}")
    mu = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(mu[0]), float(mu[-1])


def rho_sigma_bound(mu_min: float, mu_max: float, delta_star: float, s_star: float, sigma: float) -> float:
    """Upper bound ``max(|mu_max/(sigma+delta) - 1|, |mu_min/(sigma+s) - 1|)`` on ``rho(L_sigma)``."""
    if sigma <= -delta_star:
        raise ShiftOutOfRange(f"sigma={sigma} must exceed -delta_star={-delta_star}")
    if mu_min <= 0 or mu_max < mu_min:
        raise InvalidSpectrum(f"need 0 < mu_min <= mu_max, got ({mu_min}, {mu_max})")
    return max(abs(mu_max / (sigma + delta_star) - 1.0), abs(mu_min / (sigma + s_star) - 1.0))


def sigma_lower_bound(mu_max: float, delta_star: float) -> float:
    """Shifts at or above this value are guaranteed to be locally convergent."""
    return mu_max / 2.0 - delta_star


def apriori_sigma_ks(alpha: float, n: int) -> float:
    return 1.5 * alpha * laplacian_inverse_norm(n) + 2.0


def apriori_sigma_gpe(beta: float, A_f) -> float:
    return 0.5 * (3.0 * beta + float(np.linalg.norm(np.asarray(A_f), 2)))


def optimal_sigma(mu_min: float, mu_max: float, delta_star: float, s_star: float) -> float:
    """Shift at which both branches of :func:`rho_sigma_bound` coincide.

    Solves ``2 (s + d)(s + S) = mu_max (s + S) + mu_min (s + d)`` for the root
    in ``(-d, inf)``, ``d = delta_star``, ``S = s_star``.
    """
    if not 0 < mu_min <= mu_max:
        raise InvalidSpectrum(f"need 0 < mu_min <= mu_max, got ({mu_min}, {mu_max})")
    d, S = delta_star, s_star
    b = 2 * d + 2 * S - mu_max - mu_min
    c = 2 * d * S - mu_max * S - mu_min * d
    disc = b * b - 8 * c
    if disc < 0:
        raise NoRootInRange("negative discriminant")
    root = (-b + np.sqrt(disc)) / 4.0
    if not root > -d:
        raise NoRootInRange(f"root {root} not above -delta_star={-d}")
    branch1 = mu_max / (root + d) - 1.0
    branch2 = 1.0 - mu_min / (root + S)
    if abs(branch1 - branch2) > 1e-8 * max(1.0, abs(branch1)):
        raise NoRootInRange("branches do not balance at the computed root")
    return float(root)


@dataclass
class RateReport:
    eta_sup_infty: float
    eta_sup: float
    eta_czbl: float
    sigma: float = 0.0
    observed: Optional[float] = None
    delta_star: Optional[float] = None
    s_star: Optional[float] = None
    mu_min: Optional[float] = None
    mu_max: Optional[float] = None
    label: str = ""
    params: dict = field(default_factory=dict)


def rate_report(
    problem: NepvProblem,
    cert: SolutionCertificate,
    sigma: float = 0.0,
    observed: Optional[float] = None,
    with_q: bool = True,
) -> RateReport:
    """Compute all rate estimates for one configuration."""
    M = realify(local_operator(problem, cert, sigma))
    mu_min = mu_max = None
    if with_q:
        try:
            mu_min, mu_max = q_extremes(problem, cert)
        except NotSelfAdjoint:
            pass
    return RateReport(
        eta_sup_infty=spectral_radius(M),
        eta_sup=operator_norm_frobenius(M),
        eta_czbl=eta_czbl(problem, cert),
        sigma=sigma,
        observed=observed,
        delta_star=cert.delta_star,
        s_star=cert.s_star,
        mu_min=mu_min,
        mu_max=mu_max,
        label=problem.label,
        params=dict(problem.params),
    )
