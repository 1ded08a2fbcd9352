"""Stochastic-approximation OCE estimation for streaming samples.

Each new loss ``x_j`` moves the iterate by

    t_j = t_{j-1} - gamma_j * (1 - phi'(x_j - t_{j-1})),   gamma_j = b / j**alpha,

the running average of the *pre-update* iterates ``t_0 .. t_{m-1}``
estimates the OCE minimizer, and a second pass over the retained samples
with that average gives the risk estimate.

The retained buffer costs O(m) memory. A one-pass variant would have to
evaluate phi at stale averages, so it is not offered.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .disutility import ClosedFormRisk, DisutilitySpec, phi, phi_prime
from .errors import DivergenceError, DomainError, EmptyStreamError
from .loss_models import sample


@dataclass(frozen=True)
class StepSchedule:
    b: float
    alpha: float

    def __post_init__(self):
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise DomainError(f"step scale b must be positive, got {self.b}")
        if not 0.5 < self.alpha < 1.0:
            raise DomainError(f"step exponent alpha must lie in (0.5, 1), got {self.alpha}")

    def gamma(self, j: int) -> float:
        return self.b / j ** self.alpha


@dataclass
class StreamState:
    """Single-writer state of one stream; :func:`step` updates it in place."""

    t: float
    t0: float
    schedule: StepSchedule
    j: int = 0
    sum_t: float = 0.0
    buffer: list = field(default_factory=list)


def init(t0: float, schedule: StepSchedule) -> StreamState:
    if not isinstance(schedule, StepSchedule):
        schedule = StepSchedule(*schedule)
    return StreamState(t=float(t0), t0=float(t0), schedule=schedule)


def step(state: StreamState, x: float, spec: DisutilitySpec) -> StreamState:
    x = float(x)
    j = state.j + 1
    t_prev = state.t
    t_new = t_prev - state.schedule.gamma(j) * (1.0 - phi_prime(spec, x - t_prev))
    if not math.isfinite(t_new):
        raise DivergenceError(f"iterate became non-finite at step {j}", step=j)
    state.sum_t += t_prev
    state.t = t_new
    state.j = j
    state.buffer.append(x)
    return state


def averaged(state: StreamState) -> float:
    if state.j == 0:
        raise EmptyStreamError("no samples processed yet")
    return state.sum_t / state.j


def finalize_oce(state: StreamState, spec: DisutilitySpec, t_bar: Optional[float] = None) -> float:
    """Risk estimate ``t_bar + mean(phi(x_i - t_bar))`` over the retained samples.

    ``t_bar`` defaults to :func:`averaged`; passing it explicitly is meant for
    checks only.
    """
    if state.j == 0:
        raise EmptyStreamError("no samples processed yet")
    t_bar = averaged(state) if t_bar is None else float(t_bar)
    buf = np.asarray(state.buffer, dtype=float)
    return t_bar + float(np.mean(phi(spec, buf - t_bar)))


def run(samples, spec: DisutilitySpec, schedule: StepSchedule, t0: float) -> StreamState:
    """Feed every value of ``samples`` through one fresh stream."""
    state = init(t0, schedule)
    for x in np.asarray(samples, dtype=float):
        step(state, x, spec)
    return state


@dataclass(frozen=True)
class StreamPath:
    """Averaged iterates and risk estimates at each checkpoint, one column per stream."""

    checkpoints: tuple
    t_bar: np.ndarray
    oce_sa: np.ndarray


def run_many(samples: np.ndarray, spec: DisutilitySpec, schedule: StepSchedule, t0: float,
             checkpoints: Sequence[int]) -> StreamPath:
    """Advance many independent streams in lockstep.

    ``samples`` has one row per stream. Row ``r`` gets exactly the arithmetic
    that :func:`step` would apply to it, so results match a scalar run.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise DomainError("samples must be a (streams, steps) array")
    reps, m = x.shape
    cps = tuple(int(c) for c in checkpoints)
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1 or cps[-1] > m:
        raise DomainError("checkpoints must be strictly increasing within 1..m")
    t = np.full(reps, float(t0))
    sum_t = np.zeros(reps)
    t_bar = np.empty((len(cps), reps))
    oce = np.empty((len(cps), reps))
    nxt = 0
    for j in range(1, m + 1):
        sum_t += t
        t = t - schedule.gamma(j) * (1.0 - phi_prime(spec, x[:, j - 1] - t))
        finite = np.isfinite(t)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise DivergenceError(f"iterate became non-finite at step {j} (stream {bad})", step=j, stream=bad)
        if j == cps[nxt]:
            tb = sum_t / j
            t_bar[nxt] = tb
            oce[nxt] = tb + np.mean(phi(spec, x[:, :j] - tb[:, None]), axis=1)
            nxt += 1
            if nxt == len(cps):
                break
    return StreamPath(cps, t_bar, oce)


@dataclass(frozen=True)
class StreamReplicateResult:
    checkpoints: tuple
    e_star: float
    oce_true: float
    mse_tbar: np.ndarray
    se_mse_tbar: np.ndarray
    mae_oce: np.ndarray
    se_mae_oce: np.ndarray
    path: StreamPath


def replicate_stream(model, spec: DisutilitySpec, schedule: StepSchedule, t0: float,
                     checkpoints: Sequence[int], reps: int, seed: int,
                     truth: ClosedFormRisk) -> StreamReplicateResult:
    """Replication ``r`` streams ``sample(model, max(checkpoints), seed + r)``."""
    if reps < 1:
        raise DomainError("need at least one replication")
    m = int(max(checkpoints))
    x = np.stack([sample(model, m, seed + r).values for r in range(reps)])
    path = run_many(x, spec, schedule, t0, checkpoints)
    sq = (path.t_bar - truth.e_star) ** 2
    ab = np.abs(path.oce_sa - truth.oce)
    root = math.sqrt(reps)
    se = (lambda a: np.std(a, axis=1, ddof=1) / root) if reps > 1 else (lambda a: np.zeros(a.shape[0]))
    return StreamReplicateResult(path.checkpoints, truth.e_star, truth.oce,
                                 np.mean(sq, axis=1), se(sq), np.mean(ab, axis=1), se(ab), path)
