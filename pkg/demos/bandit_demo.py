"""
Finding the least risky arm on a fixed budget
=============================================

Five normal arms N(0.5 + i, 25) have mean-variance risks 13..17. Successive
rejects splits the budget into phases and drops the arm with the largest
estimated risk after each one.
"""
from oce_risk.bandit import five_arm_instance, hardness, misid_rate, run_oce_sr, sr_schedule

inst = five_arm_instance()
print("true risks:", inst.true_oce, " hardness H =", hardness(inst).H)
print("per-arm sample counts after each phase at n=1000:", sr_schedule(inst.K, 1000))

res = run_oce_sr(inst, 1000, seed=0)
print("eliminated (phase, arm):", res.elimination_order, " chosen:", res.chosen)

for n in (500, 1000, 2000, 5000):
    m = misid_rate(inst, n, reps=300, seed=1)
    print(f"n={n:>5}  mis-identification {m.rate:.3f} +/- {m.se:.3f}")
