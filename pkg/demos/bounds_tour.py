"""
Finite-sample bounds next to simulated errors
=============================================

Constants for the synthetic model are computed exactly, then every bound is
evaluated and compared with what 1000 simulated batches actually do.
"""
from oce_risk import DisutilitySpec, NormalLoss
from oce_risk import bounds as bd

spec = DisutilitySpec.mean_variance(0.5)
model = NormalLoss(0.5, 25.0)
k = bd.constants_from_model(model, spec, b=10.0, alpha=0.6, A_const=1.0, t0=1.0)

print("mse bound for e_hat at n=100:", bd.mse_bound_minimizer(k, 100))
print("mse bound for oce_hat at n=1000:", round(bd.mse_bound_oce(k, 1000), 4))
print("95% radius for oce_hat at n=10^6:", round(bd.high_conf_radius(k, 10**6, 0.05), 3))
print("streaming constant K0 (A=1):", round(bd.sa_k0(k), 3))
print("E|oce_sa - oce| bound at m=5000:", round(bd.sa_oce_bound(k, 5000), 4))

for n in (100, 1000):
    tail = bd.empirical_tail(model, spec, n, 0.5, reps=1000, seed=6)
    print(f"n={n}: P(|e_hat - e*| >= 0.5) ~ {tail.freq:.3f}  bound {bd.conc_bound_minimizer(k, n, 0.5, capped=True):.3f}")
