"""Plain and level-shifted SCF iterations, solution certificates, rate fitting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    GapViolation,
    InsufficientHistory,
    NonPositiveError,
    NotASolution,
    SingularOverlap,
)
from .linalg import as_basis, canonical_angles, hermitian_eig, tangent_angle_matrix
from .problems import NepvProblem

__all__ = [
    "TOL_GAP",
    "Status",
    "ScfOptions",
    "IterationHistory",
    "SolutionCertificate",
    "nepv_residual",
    "scf_iterate",
    "certify",
    "observed_rate",
]

TOL_GAP = 1e-10


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    DIVERGED = "Diverged"
    GAP_COLLAPSE = "GapCollapse"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolutionCertificate:
    """A certified NEPv solution with the full spectrum of ``H(Vstar)``."""

    Vstar: np.ndarray
    Vstar_perp: np.ndarray
    eigenvalues: np.ndarray
    residual: float

    @property
    def n(self) -> int:
        return self.Vstar.shape[0]

    @property
    def k(self) -> int:
        return self.Vstar.shape[1]

    @property
    def delta_star(self) -> float:
        return float(self.eigenvalues[self.k] - self.eigenvalues[self.k - 1])

    @property
    def s_star(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    @property
    def lam(self) -> np.ndarray:
        return self.eigenvalues[: self.k]

    @property
    def lam_perp(self) -> np.ndarray:
        return self.eigenvalues[self.k :]

    def save(self, path) -> None:
        np.savez(
            path,
            Vstar=self.Vstar,
            Vstar_perp=self.Vstar_perp,
            eigenvalues=self.eigenvalues,
            residual=self.residual,
        )

    @classmethod
    def load(cls, path) -> "SolutionCertificate":
        with np.load(path) as data:
            return cls(
                Vstar=data["Vstar"],
                Vstar_perp=data["Vstar_perp"],
                eigenvalues=data["eigenvalues"],
                residual=float(data["residual"]),
            )


@dataclass
class ScfOptions:
    max_iter: int = 5000
    tol_residual: float = 1e-12
    sigma: float = 0.0
    divergence_cap: float = 1e3
    reference: Optional[SolutionCertificate] = None
    tol_gap: float = TOL_GAP

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if self.divergence_cap <= self.tol_residual:
            raise ValueError("divergence_cap must exceed tol_residual")


@dataclass
class IterationHistory:
    """Per-iterate record of an SCF run.

    Entry ``i`` of `residuals` belongs to ``V_i`` (``V_0`` is the start);
    `gaps[i]` is the gap of the shifted matrix whose eigenvectors gave
    ``V_{i+1}``.
    """

    residuals: list[float] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    subspace_errors: Optional[list[float]] = None
    V: Optional[np.ndarray] = None
    Lam: Optional[np.ndarray] = None
    status: Status = Status.MAX_ITER
    sigma: float = 0.0

    @property
    def iterations(self) -> int:
        """Number of SCF steps (eigen-solves) performed."""
        return len(self.gaps)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def errors(self) -> list[float]:
        """Subspace errors when recorded, residuals otherwise."""
        return self.subspace_errors if self.subspace_errors is not None else self.residuals


def nepv_residual(problem: NepvProblem, V) -> tuple[float, np.ndarray, np.ndarray]:
    """Return ``(||H(V)V - V Lam||_2, H(V), Lam)`` with ``Lam = V^H H(V) V``."""
    V = as_basis(V)
    H = problem.evaluate(V)
    HV = H @ V
    Lam = V.conj().T @ HV
    return float(np.linalg.norm(HV - V @ Lam, 2)), H, Lam


def _subspace_error(V, cert: SolutionCertificate) -> float:
    try:
        return float(np.linalg.norm(tangent_angle_matrix(V, cert)))
    except SingularOverlap:
        return float("inf")


def scf_iterate(problem: NepvProblem, V0, opts: Optional[ScfOptions] = None) -> IterationHistory:
    """Run (level-shifted) SCF from `V0`.

    Each step takes the eigenvectors of the ``k`` smallest eigenvalues of
    ``H(V_i) - sigma V_i V_i^H``. Residuals are always measured on the
    unshifted problem. At least one step is taken, so a linear problem
    reports convergence after exactly one iteration regardless of `V0`.
    """
    opts = opts or ScfOptions()
    k = problem.k
    V = as_basis(V0)
    if problem.is_real and np.iscomplexobj(V) and not np.any(V.imag):
        V = V.real
    hist = IterationHistory(sigma=opts.sigma)
    if opts.reference is not None:
        hist.subspace_errors = []

    step = 0
    while True:
        res, H, Lam = nepv_residual(problem, V)
        hist.residuals.append(res)
        if hist.subspace_errors is not None:
            hist.subspace_errors.append(_subspace_error(V, opts.reference))
        hist.V, hist.Lam = V, Lam
        if step > 0 and res <= opts.tol_residual:
            hist.status = Status.CONVERGED
            break
        if not np.isfinite(res) or res > opts.divergence_cap:
            hist.status = Status.DIVERGED
            break
        if step >= opts.max_iter:
            hist.status = Status.MAX_ITER
            break
        Hs = H - opts.sigma * (V @ V.conj().T) if opts.sigma != 0 else H
        eig = hermitian_eig(Hs)
        gap = float(eig.eigenvalues[k] - eig.eigenvalues[k - 1])
        hist.gaps.append(gap)
        if gap < opts.tol_gap:
            hist.status = Status.GAP_COLLAPSE
            break
        V = eig.eigenvectors[:, :k]
        step += 1
    return hist


def certify(problem: NepvProblem, V, cert_tol: float = 1e-10, tol_gap: float = TOL_GAP) -> SolutionCertificate:
    """Certify that `V` solves the NEPv and package the spectrum of ``H(V)``.

    ``Vstar`` is returned as the eigenvectors of the ``k`` lowest eigenvalues
    of ``H(V)``; they must span (numerically) the same space as `V`.

    Raises
    ------
    NotASolution
        The residual exceeds `cert_tol`, or `V` is an invariant subspace that
        is not the one of the ``k`` smallest eigenvalues.
    GapViolation
        ``lambda_{k+1} - lambda_k <= tol_gap``.
    """
    V = as_basis(V)
    k = problem.k
    res, H, _ = nepv_residual(problem, V)
    if not res <= cert_tol:
        raise NotASolution(f"residual {res:.3e} exceeds {cert_tol:.1e}")
    eig = hermitian_eig(H)
    w, Q = eig.eigenvalues, eig.eigenvectors
    delta = w[k] - w[k - 1]
    if delta <= tol_gap:
        raise GapViolation(f"eigenvalue gap {delta:.3e} <= {tol_gap:.1e}")
    Vstar = Q[:, :k]
    if np.max(np.sin(canonical_angles(V, Vstar))) > 0.5:
        raise NotASolution("V is invariant but not the lowest-k eigenspace of H(V)")
    return SolutionCertificate(Vstar=Vstar, Vstar_perp=Q[:, k:], eigenvalues=w, residual=res)


def observed_rate(
    history: IterationHistory | list,
    window: int = 30,
    floor: float = 1e-8,
    min_start: int = 10,
) -> float:
    """Fit ``error_i ~ c * r^i`` over the tail of the run and return ``r``.

    The tail consists of the last ``window + 1`` errors before the first one
    that drops to `floor`; below that, roundoff dominates and bends the log
    curve. When the run is shorter, every error from index `min_start` on is
    used instead (or the second half of the run, if that is shorter).
    """
    errors = np.asarray(history.errors if isinstance(history, IterationHistory) else history, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    below = np.nonzero(~(errors > floor))[0]
    stop = int(below[0]) if below.size else errors.size
    if stop < window + 1:
        if stop < errors.size and errors[stop] <= 0 and stop >= 2:
            raise NonPositiveError("error sequence hit exactly zero")
        start = min(min_start, stop // 2)
        if stop - start < 3:
            raise InsufficientHistory(f"only {stop} usable errors above floor {floor:g}")
    else:
        start = stop - window - 1
    idx = np.arange(start, stop)
    slope = np.polyfit(idx, np.log(errors[idx]), 1)[0]
    return float(np.exp(slope))
