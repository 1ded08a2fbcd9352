"""Estimation of optimized certainty equivalent (OCE) risk from samples.

The OCE of a loss ``X`` under a convex disutility ``phi`` is
``min_xi xi + E[phi(X - xi)]``. The package offers a batch sample-average
estimator, a streaming stochastic-approximation estimator with iterate
averaging, closed-form finite-sample bounds, and successive rejects for
picking the least risky of several loss distributions.
"""

__version__ = "0.1.0"

from .disutility import DisutilitySpec, Family, closed_form_risk, parse_spec, phi, phi_prime, phi_second, smoothness_constants
from .loss_models import (
    ConstantLoss,
    CreditRiskModel,
    NormalLoss,
    SampleBatch,
    moments,
    oracle_oce,
    credit_portfolio_25,
    read_model,
    sample,
)
from .batch import estimate_oce, grid_oracle, replicate_mse, solve_minimizer
from .streaming import StepSchedule, StreamState, averaged, finalize_oce, init, run, step
from .bounds import BoundConstants, SubExpConstants, constants_from_model
from .bandit import BanditInstance, misid_rate, run_oce_sr, sr_schedule

__all__ = [
    "BanditInstance", "BoundConstants", "ConstantLoss", "CreditRiskModel", "DisutilitySpec", "Family",
    "NormalLoss", "SampleBatch", "StepSchedule", "StreamState", "SubExpConstants", "averaged",
    "closed_form_risk", "constants_from_model", "estimate_oce", "finalize_oce", "grid_oracle", "init",
    "misid_rate", "moments", "oracle_oce", "credit_portfolio_25", "parse_spec", "phi", "phi_prime",
    "phi_second", "read_model", "replicate_mse", "run", "run_oce_sr", "sample", "smoothness_constants",
    "solve_minimizer", "sr_schedule", "step",
]
