"""
Credit losses from a Gaussian factor model
==========================================

Twenty-five positions, each defaulting with probability 0.05, driven by
six common factors. The exact loss variance comes from pairwise bivariate
normal orthant probabilities; correlated defaults make it larger than the
independent-defaults value sum v_i^2 p_i (1 - p_i).
"""
import numpy as np

from oce_risk import DisutilitySpec, credit_portfolio_25, moments, oracle_oce
from oce_risk.batch import ground_truth
from oce_risk.streaming import StepSchedule, replicate_stream

model = credit_portfolio_25()
spec = DisutilitySpec.mean_variance(0.5)

mom = moments(model)
independent = float(np.sum(model.v**2 * model.p * (1 - model.p)))
print(f"mean loss {mom.mean}, variance {mom.variance:.6f} (independent defaults: {independent})")

truth = ground_truth(model, spec)
print(f"exact risk {truth.oce:.6f}")
print(f"Monte-Carlo check {oracle_oce(model, spec, N=200_000, seed=4).oce_hat:.4f}")

# a step scale of 10 is stable on this model; 100 overshoots for hundreds of steps
r = replicate_stream(model, spec, StepSchedule(10.0, 0.8), 1.0, [1000, 5000], 100, 5, truth)
print("b=10  mean |oce_sa - oce| at m=1000, 5000:", np.round(r.mae_oce, 4))
with np.errstate(over="ignore", invalid="ignore"):
    r = replicate_stream(model, spec, StepSchedule(100.0, 0.8), 1.0, [5000], 20, 5, truth)
print("b=100 mean squared error of the averaged iterate:", r.mse_tbar[0])
