"""Sample-average (batch) OCE estimation.

Given losses ``x_1..x_n`` the empirical risk is

    oce_n = min_xi  xi + mean(phi(x_i - xi)),

and for smooth ``phi`` its minimizer solves ``mean(phi'(x_i - xi)) = 1``.
For CVaR the minimizer is an order statistic (the empirical VaR).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._parallel import rep_map
from .disutility import ClosedFormRisk, DisutilitySpec, Family, closed_form_risk, phi, phi_prime, phi_second
from .errors import DomainError, NoClosedFormError, NoRootError, UnsupportedError
from .loss_models import SampleBatch, oracle_oce, sample

DEFAULT_TOL = 1e-10
MAX_DOUBLINGS = 200
MAX_ITER = 500
# offset keeping oracle seeds clear of replication seeds base+0 .. base+reps-1
ORACLE_SEED_OFFSET = 1 << 40


@dataclass(frozen=True)
class BatchEstimate:
    e_hat: float
    oce_hat: float
    n: int
    iterations: int
    residual: float


def _values(samples) -> np.ndarray:
    if isinstance(samples, SampleBatch):
        return samples.values
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("need at least one sample")
    return x


def cvar_index(n: int, alpha: float) -> int:
    """1-based index ``ceil(n * alpha)`` of the empirical VaR.

    ``alpha`` is read as the decimal it prints as, so ``cvar_index(10, 0.9)``
    is 9 even though the double nearest 0.9 is slightly larger.
    """
    return max(1, math.ceil(Fraction(repr(float(alpha))) * n))


def objective(samples, spec: DisutilitySpec, xi: float) -> float:
    """Empirical OCE objective ``xi + mean(phi(x - xi))``."""
    x = _values(samples)
    return xi + float(np.mean(phi(spec, x - xi)))


def _solve(x: np.ndarray, spec: DisutilitySpec, tol: float):
    if spec.family is Family.CVAR:
        k = cvar_index(x.size, spec.param)
        return float(np.partition(x, k - 1)[k - 1]), 0, 0.0
    x_min, x_max = float(np.min(x)), float(np.max(x))
    if x_min == x_max:
        # a point mass is its own minimizer under every family
        return x_min, 0, 0.0
    if spec.family is Family.EXPECTED_LOSS:
        raise UnsupportedError("expected loss is not strongly convex: every point minimizes")

    def g(xi):
        return float(np.mean(phi_prime(spec, x - xi))) - 1.0

    # g is strictly decreasing; find lo with g > 0 and hi with g < 0
    lo, hi = x_min - 1.0, x_max + 1.0
    width = 1.0
    doublings = 0
    while g(lo) <= 0.0:
        if doublings == MAX_DOUBLINGS:
            raise NoRootError("could not bracket the first-order condition from below")
        width *= 2.0
        lo -= width
        doublings += 1
    width = 1.0
    while g(hi) >= 0.0:
        if doublings == MAX_DOUBLINGS:
            raise NoRootError("could not bracket the first-order condition from above")
        width *= 2.0
        hi += width
        doublings += 1

    xi = 0.5 * (lo + hi)
    best_xi, best_res = xi, math.inf
    for it in range(1, MAX_ITER + 1):
        gv = g(xi)
        if abs(gv) < best_res:
            best_xi, best_res = xi, abs(gv)
        if abs(gv) <= tol:
            return xi, it, abs(gv)
        if gv > 0.0:
            lo = xi
        else:
            hi = xi
        curv = float(np.mean(phi_second(spec, x - xi)))
        nxt = xi + gv / curv if curv > 0.0 else math.nan
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == xi or hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(xi)):
            break
        xi = nxt
    # bracket collapsed to machine precision: the residual is rounding noise
    return best_xi, it, best_res


def solve_minimizer(samples, spec: DisutilitySpec, tol: float = DEFAULT_TOL) -> float:
    """Minimizer of the empirical OCE objective.

    Smooth families: root of ``mean(phi'(x - xi)) - 1`` by bracketed
    bisection with Newton steps. CVaR: the ``ceil(n*alpha)``-th order
    statistic.

    Raises
    ------
    UnsupportedError
        For expected loss on a non-constant batch, whose objective is flat.
    NoRootError
        If the bracket cannot be established within 200 doublings.
    """
    return _solve(_values(samples), spec, tol)[0]


def estimate_oce(samples, spec: DisutilitySpec, tol: float = DEFAULT_TOL) -> BatchEstimate:
    x = _values(samples)
    e_hat, iterations, residual = _solve(x, spec, tol)
    oce_hat = e_hat + float(np.mean(phi(spec, x - e_hat)))
    return BatchEstimate(e_hat, oce_hat, x.size, iterations, residual)


@dataclass(frozen=True)
class GridResult:
    xi_star: float
    value: float
    spacing: float


def _golden(f, a: float, b: float, tol: float = 1e-13, max_iter: int = 300):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def grid_oracle(samples, spec: DisutilitySpec, lo: Optional[float] = None,
                hi: Optional[float] = None, steps: int = 10_000) -> GridResult:
    """Brute-force minimizer of ``xi + mean(phi(x - xi))``.

    Evaluates the objective on a uniform grid of ``steps`` cells over
    ``[lo, hi]`` and refines the best point by golden-section search on its
    two neighbouring cells. Does not use derivatives, so it also checks the
    CVaR order-statistic path.
    """
    x = _values(samples)
    x_min, x_max = float(np.min(x)), float(np.max(x))
    span = max(x_max - x_min, 1.0)
    lo = x_min - span if lo is None else lo
    hi = x_max + span if hi is None else hi
    if not lo < hi:
        raise DomainError("need lo < hi")
    if steps < 1000:
        raise DomainError("need at least 1000 grid steps")
    if lo > x_min or hi < x_max:
        raise DomainError("grid must cover the sample range")

    grid = np.linspace(lo, hi, steps + 1)
    spacing = (hi - lo) / steps
    values = np.empty_like(grid)
    chunk = max(1, 4_000_000 // x.size)
    for start in range(0, grid.size, chunk):
        g = grid[start:start + chunk]
        values[start:start + chunk] = g + np.mean(phi(spec, x[None, :] - g[:, None]), axis=1)
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    xi, val = _golden(lambda s: objective(x, spec, s), a, b)
    if values[k] < val:
        xi, val = float(grid[k]), float(values[k])
    return GridResult(float(xi), float(val), spacing)


@dataclass(frozen=True)
class ReplicateResult:
    n: int
    reps: int
    e_star: float
    oce_true: float
    mse_e: float
    se_mse_e: float
    mae_oce: float
    se_mae_oce: float
    mae_e: float
    se_mae_e: float
    e_hat: np.ndarray
    oce_hat: np.ndarray


def ground_truth(model, spec: DisutilitySpec, seed: int = 0) -> ClosedFormRisk:
    """Closed-form risk, or a 10^6-sample oracle estimate when none exists."""
    try:
        return closed_form_risk(spec, model)
    except NoClosedFormError:
        est = oracle_oce(model, spec, N=1_000_000, seed=seed + ORACLE_SEED_OFFSET)
        return ClosedFormRisk(est.e_star_hat, est.oce_hat)


def _mean_se(a: np.ndarray):
    mean = float(np.mean(a))
    se = float(np.std(a, ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    return mean, se


def replicate_mse(model, spec: DisutilitySpec, n: int, reps: int, seed: int,
                  truth: Optional[ClosedFormRisk] = None, tol: float = DEFAULT_TOL) -> ReplicateResult:
    """Monte-Carlo error of the batch estimator over ``reps`` replications.

    Replication ``r`` estimates from ``sample(model, n, seed + r)``.
    """
    if reps < 1:
        raise DomainError("need at least one replication")
    truth = ground_truth(model, spec, seed) if truth is None else truth

    def one(r):
        est = estimate_oce(sample(model, n, seed + r), spec, tol)
        return est.e_hat, est.oce_hat

    out = np.array(rep_map(one, range(reps)))
    e_hat, oce_hat = out[:, 0], out[:, 1]
    err_e = e_hat - truth.e_star
    mse, se_mse = _mean_se(err_e * err_e)
    mae_o, se_o = _mean_se(np.abs(oce_hat - truth.oce))
    mae_e, se_e = _mean_se(np.abs(err_e))
    return ReplicateResult(n, reps, truth.e_star, truth.oce, mse, se_mse, mae_o, se_o,
                           mae_e, se_e, e_hat, oce_hat)
