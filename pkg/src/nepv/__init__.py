"""Plain and level-shifted SCF for NEPv, with sharp local convergence-rate estimates."""

from .errors import *  # noqa: F401,F403
from .linalg import (
    HermitianEig,
    Subspace,
    canonical_angles,
    hermitian_eig,
    orthonormalize,
    subspace_distance,
    tangent_angle_matrix,
)
from .problems import GpeParams, KohnShamParams, NepvProblem, fd_derivative, gpe, kohn_sham
from .scf import IterationHistory, ScfOptions, SolutionCertificate, Status, certify, observed_rate, scf_iterate
from .analysis import (
    RateReport,
    RealLinearMap,
    eta_czbl,
    eta_sup,
    eta_sup_infty,
    local_operator,
    rate_report,
    realify,
    spectral_radius,
)

__version__ = "0.1.0"
