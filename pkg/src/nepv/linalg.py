"""Dense Hermitian eigensolver, orthonormal bases and subspace geometry.

Everything here works on dense numpy arrays. Bases are stored as complex
``n x k`` matrices unless the input was real, in which case the real dtype is
kept so that real problems stay real all the way through.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    AngleAtPiOverTwo,
    BackendFailure,
    DimensionMismatch,
    NotHermitian,
    RankDeficient,
    SingularOverlap,
)

__all__ = [
    "TOL_EIG",
    "TOL_ORTH",
    "TOL_HERM",
    "TOL_RANK",
    "HermitianEig",
    "Subspace",
    "as_basis",
    "hermitian_eig",
    "orthonormalize",
    "canonical_angles",
    "tangent_angle_matrix",
    "subspace_distance",
]

TOL_EIG = 1e-12
TOL_ORTH = 1e-12
TOL_HERM = 1e-10
TOL_RANK = 1e-10


@dataclass(frozen=True)
class HermitianEig:
    """Eigenvalues in ascending order and the matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class Subspace:
    """An orthonormal basis matrix; validated on construction."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis)
        if B.ndim != 2:
            raise DimensionMismatch(f"basis must be a matrix, got shape {B.shape}")
        k = B.shape[1]
        defect = np.linalg.norm(B.conj().T @ B - np.eye(k))
        if defect > max(TOL_ORTH, 10 * k * np.finfo(float).eps) * max(1, k):
            raise RankDeficient(f"basis is not orthonormal (defect {defect:.3e})")
        object.__setattr__(self, "basis", B)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


def as_basis(X) -> np.ndarray:
    """Return the basis matrix of a :class:`Subspace` or pass arrays through."""
    if isinstance(X, Subspace):
        return X.basis
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _is_real(A: np.ndarray) -> bool:
    return not np.iscomplexobj(A) or not np.any(A.imag)


def hermitian_eig(A, tol_herm: float = TOL_HERM) -> HermitianEig:
    """Eigen-decomposition of a Hermitian matrix.

    ``A`` is symmetrized before decomposing; a relative defect larger than
    `tol_herm` is rejected. Real input (or complex input with zero imaginary
    part) yields real eigenvectors.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    defect = np.linalg.norm(A - A.conj().T)
    if defect > tol_herm * scale:
        raise NotHermitian(f"Hermitian defect {defect:.3e} exceeds {tol_herm:.1e} * {scale:.3e}")
    if _is_real(A):
        A = A.real
    A = 0.5 * (A + A.conj().T)
    try:
        w, Q = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise BackendFailure(str(exc)) from exc
    return HermitianEig(eigenvalues=w, eigenvectors=Q)


def orthonormalize(M, tol_rank: float = TOL_RANK) -> Subspace:
    """Orthonormal basis for ``range(M)``.

    Raises
    ------
    RankDeficient
        If the smallest singular value of `M` is at most `tol_rank` times the
        largest one.
    """
    M = as_basis(M)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[-1] <= tol_rank * max(s[0], np.finfo(float).tiny):
        raise RankDeficient("matrix does not have full column rank")
    Q, R = np.linalg.qr(M)
    # fix the sign/phase so the result is deterministic and Q = M for orthonormal M
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return Subspace(Q * phase.conj()[None, :])


def canonical_angles(X, Y) -> np.ndarray:
    """Canonical angles between ``range(X)`` and ``range(Y)``, ascending."""
    X, Y = as_basis(X), as_basis(Y)
    if X.shape != Y.shape:
        raise DimensionMismatch(f"shapes differ: {X.shape} vs {Y.shape}")
    cosines = np.clip(np.linalg.svd(Y.conj().T @ X, compute_uv=False), 0.0, 1.0)
    theta = np.sort(np.arccos(cosines))
    # arccos loses half the digits near 0; recover small angles from sines
    sines = np.clip(np.linalg.svd(X - Y @ (Y.conj().T @ X), compute_uv=False), 0.0, 1.0)
    small = np.sort(np.arcsin(sines))
    # svd returns cosines descending, i.e. aligned with the ascending angles
    mask = cosines**2 >= 0.5
    theta[mask] = small[mask]
    return theta


def tangent_angle_matrix(V, cert, tol_rank: float = TOL_RANK) -> np.ndarray:
    """``T(V) = (Vstar_perp^H V)(Vstar^H V)^{-1}``.

    `cert` is anything carrying ``Vstar`` and ``Vstar_perp`` (normally a
    :class:`nepv.scf.SolutionCertificate`). The singular values of ``T(V)``
    are the tangents of the canonical angles between ``V`` and ``Vstar``.
    """
    V = as_basis(V)
    C = cert.Vstar.conj().T @ V
    if C.shape[0] != V.shape[1] or cert.Vstar.shape[0] != V.shape[0]:
        raise DimensionMismatch(f"V has shape {V.shape}, Vstar has {cert.Vstar.shape}")
    s = np.linalg.svd(C, compute_uv=False)
    if s[-1] <= tol_rank:
        raise SingularOverlap(f"smallest cosine {s[-1]:.3e} <= {tol_rank:.1e}")
    S = cert.Vstar_perp.conj().T @ V
    return np.linalg.solve(C.T, S.T).T


def subspace_distance(
    X,
    Y,
    kind: Literal["theta", "sin_theta", "tan_theta"] = "theta",
    norm: Literal["spectral", "frobenius"] = "frobenius",
) -> float:
    theta = canonical_angles(X, Y)
    if kind == "theta":
        vals = theta
    elif kind == "sin_theta":
        vals = np.sin(theta)
    elif kind == "tan_theta":
        if np.any(np.cos(theta) <= TOL_RANK):
            raise AngleAtPiOverTwo("tan_theta is undefined for an angle of pi/2")
        vals = np.tan(theta)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if norm == "spectral":
        return float(np.max(np.abs(vals), initial=0.0))
    if norm == "frobenius":
        return float(np.linalg.norm(vals))
    raise ValueError(f"unknown norm {norm!r}")
