"""
Streaming estimation with averaged stochastic approximation
===========================================================

Each sample moves the iterate by t <- t - gamma_j (1 - phi'(x - t)) with
gamma_j = b / j**alpha. The running average of the iterates estimates e*, and
one pass over the retained samples turns it into a risk estimate.
"""
import numpy as np

from oce_risk import DisutilitySpec, NormalLoss, sample
from oce_risk.streaming import StepSchedule, averaged, finalize_oce, init, run, step

spec = DisutilitySpec.mean_variance(0.5)
model = NormalLoss(0.5, 25.0)
x = sample(model, 5000, seed=3).values

for alpha in (0.6, 0.8):
    state = run(x, spec, StepSchedule(10.0, alpha), t0=1.0)
    print(f"alpha={alpha}: last iterate {state.t:8.4f}  average {averaged(state):.4f}  "
          f"risk {finalize_oce(state, spec):.4f}")

# the last iterate keeps jittering; the average settles
iterates, avgs = [], []
state = init(1.0, StepSchedule(10.0, 0.6))
for xj in x:
    step(state, xj, spec)
    iterates.append(state.t)
    avgs.append(averaged(state))
print(f"over the last 1000 steps: iterate sd {np.std(iterates[-1000:]):.3f}, average sd {np.std(avgs[-1000:]):.4f}")
