"""
Estimating OCE risk from a batch of samples
===========================================

A loss X ~ N(0.5, 25) under the mean-variance disutility phi(t) = t + 0.5 t^2
has minimizer e* = E[X] = 0.5 and risk E[X] + 0.5 Var(X) = 13.
The sample-average estimator solves mean(phi'(x - xi)) = 1 and plugs the
root back into xi + mean(phi(x - xi)).
"""
from oce_risk import DisutilitySpec, NormalLoss, closed_form_risk, estimate_oce, replicate_mse, sample

spec = DisutilitySpec.mean_variance(0.5)
model = NormalLoss(0.5, 25.0)

# one batch
est = estimate_oce(sample(model, 10_000, seed=1), spec)
print(f"n=10000: e_hat={est.e_hat:.4f}  oce_hat={est.oce_hat:.4f}  (truth 0.5, 13)")

# errors shrink like 1/n in mean square
for n in (100, 1000, 10_000):
    r = replicate_mse(model, spec, n, reps=500, seed=7)
    print(f"n={n:>6}  mse(e_hat)={r.mse_e:.5f} +/- {r.se_mse_e:.5f}   25/n={25 / n:.5f}")

# other risk families on the same batch
x = sample(model, 10_000, seed=2)
for s in (DisutilitySpec.entropic(0.1), DisutilitySpec.cvar(0.95)):
    print(f"{s}: oce_hat={estimate_oce(x, s).oce_hat:.4f}  exact={closed_form_risk(s, model).oce:.4f}")
