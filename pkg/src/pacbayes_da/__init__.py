"""PAC-Bayesian domain adaptation bounds on finite domains and finite voter sets."""
from .core import (
    FiniteDomain,
    Posterior,
    VoterMatrix,
    best_target_posterior,
    chi_squared,
    domain_disagreement,
    expected_disagreement,
    expected_joint_error,
    gibbs_risk,
    hdh_sup_distance,
    joint_error_matrix,
    lambda_rho,
    majority_vote_risk,
    pair_disagreement,
    voter_risks,
)
from .errors import (
    AbsoluteContinuityError,
    AlignmentError,
    BoundaryError,
    ConfigError,
    ContractError,
    PacBayesDAError,
    SupportError,
)
from .kernels import BACKEND

__version__ = "0.1.0"
