"""Fixed-budget identification of the arm with the lowest OCE risk.

Successive rejects: with ``logbar K = 1/2 + sum_{i=2..K} 1/i`` and

    n_k = ceil((n - K) / (logbar K * (K + 1 - k))),   k = 1..K-1,

every surviving arm holds ``n_k`` samples after phase ``k`` and the arm
with the largest empirical OCE is dropped. Samples accumulate across
phases. Each arm draws from its own random stream, so eliminations never
shift another arm's samples.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._parallel import rep_map
from .batch import estimate_oce, ground_truth
from .bounds import gap_vector, hardness_H, log_bar
from .disutility import DisutilitySpec, parse_spec
from .errors import BudgetError, DomainError
from .loss_models import NormalLoss, draw, read_model


@dataclass(frozen=True)
class BanditInstance:
    arms: tuple
    spec: DisutilitySpec
    true_oce: tuple

    def __post_init__(self):
        if len(self.arms) < 2:
            raise DomainError("a bandit needs at least two arms")
        if len(self.true_oce) != len(self.arms):
            raise DomainError("need one true OCE value per arm")

    @classmethod
    def build(cls, arms: Sequence, spec: DisutilitySpec, true_oce: Optional[Sequence[float]] = None,
              seed: int = 0) -> "BanditInstance":
        """Instance with ``true_oce`` filled from closed forms (or the oracle) when omitted."""
        if true_oce is None:
            true_oce = [ground_truth(a, spec, seed).oce for a in arms]
        return cls(tuple(arms), spec, tuple(float(v) for v in true_oce))

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def best_arm(self) -> int:
        return int(np.argmin(self.true_oce))

    def permuted(self, order: Sequence[int]) -> "BanditInstance":
        """Instance whose arm ``i`` is arm ``order[i]`` of this one."""
        return BanditInstance(tuple(self.arms[i] for i in order), self.spec,
                              tuple(self.true_oce[i] for i in order))


def five_arm_instance(spec: Optional[DisutilitySpec] = None) -> BanditInstance:
    """Normal arms ``N(0.5 + i, 25)``; under mean-variance ``c=0.5`` their OCEs are 13..17."""
    spec = DisutilitySpec.mean_variance(0.5) if spec is None else spec
    return BanditInstance.build([NormalLoss(0.5 + i, 25.0) for i in range(5)], spec)


@dataclass(frozen=True)
class SRResult:
    chosen: int
    elimination_order: tuple
    pulls_per_arm: tuple
    total_pulls: int


def sr_schedule(K: int, n: int) -> list:
    """``[0, n_1, ..., n_{K-1}]``: cumulative per-arm sample counts after each phase."""
    if K < 2:
        raise DomainError("need at least two arms")
    if n <= K:
        raise BudgetError(f"budget n={n} must exceed the number of arms K={K}")
    lb = log_bar(K)
    return [0] + [math.ceil((n - K) / (lb * (K + 1 - k))) for k in range(1, K)]


def arm_rngs(seed: int, arm_seeds: Sequence[int]) -> list:
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, s]))) for s in arm_seeds]


def run_oce_sr(instance: BanditInstance, n: int, seed: int,
               arm_seeds: Optional[Sequence[int]] = None) -> SRResult:
    """One run of successive rejects with per-arm empirical OCE estimates.

    Arm ``i`` samples from a stream keyed by ``(seed, arm_seeds[i])``;
    ``arm_seeds`` defaults to the arm indices. Among equal maximal estimates
    the smallest arm index is removed.
    """
    K = instance.K
    schedule = sr_schedule(K, n)
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    arm_seeds = range(K) if arm_seeds is None else arm_seeds
    if len(arm_seeds) != K:
        raise DomainError("need one stream seed per arm")
    rngs = arm_rngs(seed, arm_seeds)
    held = [np.empty(0) for _ in range(K)]
    alive = list(range(K))
    order = []
    for k in range(1, K):
        pulls = schedule[k] - schedule[k - 1]
        estimates = []
        for i in alive:
            if pulls:
                held[i] = np.concatenate([held[i], draw(instance.arms[i], rngs[i], pulls)])
            estimates.append(estimate_oce(held[i], instance.spec).oce_hat)
        worst = alive[int(np.argmax(estimates))]
        alive.remove(worst)
        order.append((k, worst))
    counts = tuple(h.size for h in held)
    return SRResult(alive[0], tuple(order), counts, sum(counts))


@dataclass(frozen=True)
class MisidRate:
    rate: float
    se: float
    reps: int
    chosen: tuple


def misid_rate(instance: BanditInstance, n: int, reps: int, seed: int) -> MisidRate:
    """Fraction of runs not returning the best arm; run ``r`` uses seed ``seed + r``."""
    if reps < 1:
        raise DomainError("need at least one replication")
    best = instance.best_arm
    chosen = tuple(rep_map(lambda r: run_oce_sr(instance, n, seed + r).chosen, range(reps)))
    p = sum(c != best for c in chosen) / reps
    return MisidRate(p, math.sqrt(p * (1.0 - p) / reps), reps, chosen)


@dataclass(frozen=True)
class Hardness:
    gaps: tuple
    H: float


def hardness(instance: BanditInstance) -> Hardness:
    """Gaps ``oce_[i] - oce_best`` of arms ranked 2..K and the hardness ``H``.

    The best arm's own gap is taken equal to the runner-up's.
    """
    ranked = sorted(instance.true_oce)
    if ranked[1] == ranked[0]:
        raise DomainError("the best arm is not unique")
    gaps = tuple(v - ranked[0] for v in ranked[1:])
    return Hardness(gaps, hardness_H(gaps, instance.K))


def ranked_gaps(instance: BanditInstance) -> np.ndarray:
    """All K gaps in rank order, best arm first."""
    h = hardness(instance)
    return gap_vector(h.gaps, instance.K)


def read_instance(path) -> BanditInstance:
    """Load a bandit instance file.

    Format: ``phi=<spec>`` once, then one ``arm=<model file>`` line per arm;
    relative model paths resolve against the instance file's directory.
    Optional ``true_oce=<v1>,<v2>,...`` overrides the computed risks.
    """
    base = os.path.dirname(os.path.abspath(path))
    spec, arms, true_oce = None, [], None
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = (s.strip() for s in line.partition("="))
            if not eq:
                raise DomainError(f"bad instance line {raw!r}")
            if key == "phi":
                spec = parse_spec(value)
            elif key == "arm":
                arms.append(read_model(os.path.join(base, value)))
            elif key == "true_oce":
                true_oce = [float(v) for v in value.split(",")]
            else:
                raise DomainError(f"unknown instance key {key!r}")
    if spec is None:
        raise DomainError("instance file needs a phi= line")
    return BanditInstance.build(arms, spec, true_oce)
