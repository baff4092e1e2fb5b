"""NEPv definitions: the generic problem container and the two model Hamiltonians.

Two benchmarks are provided:

* :func:`kohn_sham` -- ``H(V) = L + alpha * Diag(L^{-1} diag(V V^H))`` with the
  1D Laplacian ``L = tridiag(-1, 2, -1)``; real coefficients.
* :func:`gpe` -- a 2D rotating Gross--Pitaevskii discretization
  ``H(v) = A_f + beta * Diag(|v|^2)``; complex Hermitian, ``k = 1``.

Both ``evaluate`` callables accept arbitrary (not necessarily orthonormal)
``V`` so that finite differences can step off the Stiefel manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams

__all__ = [
    "NepvProblem",
    "KohnShamParams",
    "GpeParams",
    "POTENTIALS",
    "laplacian_1d",
    "laplacian_inverse_norm",
    "kohn_sham",
    "gpe",
    "gpe_matrices",
    "constant_problem",
    "fd_derivative",
]

Matrix = np.ndarray


@dataclass(frozen=True)
class NepvProblem:
    """A unitarily invariant Hermitian matrix function ``H(V)``.

    Attributes
    ----------
    n, k
        Ambient and subspace dimension.
    evaluate
        ``V -> H(V)``.
    derivative
        ``(Vstar, X) -> DH(Vstar)[X]``, the real directional derivative.
    label
        Human readable name used in reports.
    is_real
        True when ``H`` maps real ``V`` to real symmetric matrices. The local
        analysis of a real problem is then carried out over real tangent
        matrices, which is the space real SCF iterates actually explore.
    local_adjoint
        Optional closed form ``(cert, D, Y) -> L*(Y)`` for the adjoint of the
        unshifted local operator, with ``D`` the gap matrix.
    initial_guess
        ``seed -> V0``; the default SCF starting basis.
    apriori_sigma
        A shift that provably gives local convergence of level-shifted SCF,
        when the problem knows one.
    """

    n: int
    k: int
    evaluate: Callable[[Matrix], Matrix]
    derivative: Callable[[Matrix, Matrix], Matrix]
    label: str = "nepv"
    is_real: bool = False
    local_adjoint: Optional[Callable[[object, Matrix, Matrix], Matrix]] = None
    initial_guess: Optional[Callable[[int], Matrix]] = None
    apriori_sigma: Optional[float] = None
    params: dict = field(default_factory=dict)

    @property
    def has_analytic_adjoint(self) -> bool:
        return self.local_adjoint is not None

    def start(self, seed: int = 0) -> Matrix:
        if self.initial_guess is not None:
            return self.initial_guess(seed)
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((self.n, self.k))
        if not self.is_real:
            X = X + 1j * rng.standard_normal((self.n, self.k))
        return np.linalg.qr(X)[0]


def laplacian_1d(n: int) -> np.ndarray:
    """Dense ``tridiag(-1, 2, -1)`` of order `n`."""
    return 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


def laplacian_inverse_norm(n: int) -> float:
    """``||L^{-1}||_2`` for the 1D Laplacian, in closed form."""
    return 1.0 / (2.0 * (1.0 - np.cos(np.pi / (n + 1))))


def _density(V: Matrix) -> np.ndarray:
    # diag(V V^H), real by construction
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    return np.sum(np.abs(V) ** 2, axis=1)


def _cross_density(V: Matrix, X: Matrix) -> np.ndarray:
    # Re diag(X V^H)
    V, X = np.atleast_2d(V.T).T, np.atleast_2d(X.T).T
    return np.real(np.sum(X * V.conj(), axis=1))


@dataclass(frozen=True)
class KohnShamParams:
    n: int = 10
    k: int = 2
    alpha: float = 1.0

    def __post_init__(self):
        if self.n < 2 or not 1 <= self.k < self.n or self.alpha < 0:
            raise InvalidParams(f"need n >= 2, 1 <= k < n, alpha >= 0; got {self}")


def kohn_sham(params: KohnShamParams) -> NepvProblem:
    """Single-particle Hamiltonian of a 1D Kohn--Sham model."""
    n, k, alpha = params.n, params.k, float(params.alpha)
    L = laplacian_1d(n)
    Linv = np.linalg.inv(L)

    def evaluate(V):
        return L + alpha * np.diag(Linv @ _density(V))

    def derivative(V, X):
        return 2.0 * alpha * np.diag(Linv @ _cross_density(V, X))

    def adjoint(cert, D, Y):
        Vs, Vp = cert.Vstar, cert.Vstar_perp
        W = Vp @ (D * Y) @ Vs.conj().T
        g = Linv.T @ np.real(np.diag(W))
        return 2.0 * alpha * (Vp.conj().T @ (g[:, None] * Vs))

    def initial_guess(seed):
        return np.linalg.eigh(L)[1][:, :k]

    return NepvProblem(
        n=n,
        k=k,
        evaluate=evaluate,
        derivative=derivative,
        label=f"kohn-sham(n={n}, k={k}, alpha={alpha:g})",
        is_real=True,
        local_adjoint=adjoint,
        initial_guess=initial_guess,
        apriori_sigma=1.5 * alpha * laplacian_inverse_norm(n) + 2.0,
        params={"problem": "ks", "n": n, "k": k, "alpha": alpha},
    )


def radial_potential(x, y):
    return (x**2 + y**2) / 2


def nonradial_potential(x, y):
    return (x**2 + 100 * y**2) / 2


POTENTIALS: dict[str, Callable] = {
    "radial": radial_potential,
    "nonradial": nonradial_potential,
}


@dataclass(frozen=True)
class GpeParams:
    """Grid and physics parameters of the rotating 2D GPE model.

    `potential` is either a callable ``(x, y) -> f`` (vectorized) or a key of
    :data:`POTENTIALS`.
    """

    N: int = 10
    ell: float = 1.0
    omega: float = 0.85
    beta: float = 1.0
    potential: object = "radial"

    def __post_init__(self):
        if self.N < 2 or self.ell <= 0 or self.beta < 0:
            raise InvalidParams(f"need N >= 2, ell > 0, beta >= 0; got {self}")
        if isinstance(self.potential, str) and self.potential not in POTENTIALS:
            raise InvalidParams(f"unknown potential {self.potential!r}")

    @property
    def potential_fn(self) -> Callable:
        if isinstance(self.potential, str):
            return POTENTIALS[self.potential]
        return self.potential


def gpe_matrices(params: GpeParams) -> dict[str, np.ndarray]:
    """Assemble ``A_f`` and its building blocks.

    Unknowns are ordered with the x index running fastest, so ``kron(A, B)``
    applies ``A`` along y and ``B`` along x.
    """
    N, ell = params.N, params.ell
    h = 2.0 * ell / (N + 1)
    x = -ell + h * np.arange(1, N + 1)
    y = x.copy()
    X, Y = np.meshgrid(x, y)
    f_tilde = h**2 * np.asarray(params.potential_fn(X, Y), dtype=float).ravel()
    eye = np.eye(N)
    D1 = 0.5 * (np.eye(N, k=1) - np.eye(N, k=-1))
    D2 = np.eye(N, k=1) + np.eye(N, k=-1) - 2.0 * eye
    M = np.kron(D2, eye) + np.kron(eye, D2)
    M_phi = np.kron(h * np.diag(y), D1) - np.kron(D1, h * np.diag(x))
    A_f = np.diag(f_tilde) - 0.5 * M - 1j * params.omega * M_phi
    return {"A_f": A_f, "M": M, "M_phi": M_phi, "f_tilde": f_tilde, "x": x, "y": y, "h": h}


def gpe(params: GpeParams) -> NepvProblem:
    """Discretized rotating Gross--Pitaevskii NEPv (``k = 1``)."""
    mats = gpe_matrices(params)
    A_f = mats["A_f"]
    beta = float(params.beta)
    n = params.N**2

    def evaluate(V):
        return A_f + beta * np.diag(_density(V))

    def derivative(V, X):
        return 2.0 * beta * np.diag(_cross_density(V, X))

    def adjoint(cert, D, Y):
        Vs, Vp = cert.Vstar, cert.Vstar_perp
        g = np.real(np.diag(Vp @ (D * Y) @ Vs.conj().T))
        return 2.0 * beta * (Vp.conj().T @ (g[:, None] * Vs))

    def initial_guess(seed):
        # a random start: the symmetric ground state of A_f does not excite the
        # slowest error mode, which would hide the asymptotic rate
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n, 1)) + 1j * rng.standard_normal((n, 1))
        return v / np.linalg.norm(v)

    norm_Af = float(np.linalg.eigvalsh(A_f)[-1])
    pot = params.potential if isinstance(params.potential, str) else "custom"
    return NepvProblem(
        n=n,
        k=1,
        evaluate=evaluate,
        derivative=derivative,
        label=f"gpe(N={params.N}, beta={beta:g}, omega={params.omega:g}, {pot})",
        is_real=False,
        local_adjoint=adjoint,
        initial_guess=initial_guess,
        apriori_sigma=0.5 * (3.0 * beta + norm_Af),
        params={
            "problem": "gpe",
            "N": params.N,
            "ell": params.ell,
            "omega": params.omega,
            "beta": beta,
            "potential": pot,
            "norm_A_f": norm_Af,
        },
    )


def constant_problem(A, k: int, label: str = "constant") -> NepvProblem:
    """A linear eigenproblem ``H(V) = A`` viewed as an NEPv with ``DH = 0``."""
    A = np.asarray(A)
    n = A.shape[0]
    zero = np.zeros_like(A)
    real = not np.iscomplexobj(A) or not np.any(A.imag)
    return NepvProblem(
        n=n,
        k=k,
        evaluate=lambda V: A,
        derivative=lambda V, X: zero,
        label=label,
        is_real=real,
        local_adjoint=lambda cert, D, Y: np.zeros_like(Y),
        initial_guess=lambda seed: np.linalg.eigh(A)[1][:, :k],
        params={"problem": "constant", "n": n, "k": k},
    )


def fd_derivative(problem: NepvProblem, V, X, h: float = 1e-5) -> np.ndarray:
    """Central difference ``(H(V + hX) - H(V - hX)) / 2h``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    V = np.asarray(V)
    X = np.asarray(X)
    return (problem.evaluate(V + h * X) - problem.evaluate(V - h * X)) / (2.0 * h)
