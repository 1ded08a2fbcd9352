"""Finite-sample error bounds for the batch, streaming and bandit procedures.

Each evaluator is a plain transcription of a closed-form bound in terms of
the constants collected in :class:`BoundConstants`. Probability bounds are
returned raw (they can exceed 1 in the vacuous regime); pass
``capped=True`` to clip them to 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from ._parallel import rep_map
from .batch import DEFAULT_TOL, estimate_oce, ground_truth
from .disutility import ClosedFormRisk, DisutilitySpec, Family, phi, phi_prime, smoothness_constants
from .errors import BudgetError, DomainError, IncompleteConstantsError
from .loss_models import ConstantLoss, NormalLoss, draw, make_rng, moments, sample, subgaussian_parameter


@dataclass(frozen=True)
class BoundConstants:
    """Every quantity that enters a bound; unused ones may stay ``None``.

    ``tau`` is the fourth-moment constant with ``tau**4 >= E[(1 - phi'(X - e*))**4]``.
    ``t0_m2`` and ``t0_m4`` are ``E[(t0 - e*)**2]`` and ``E[(t0 - e*)**4]``.
    ``A_const`` is the schedule-dependent constant of the averaged-iterate
    bound; it has no explicit formula and must be supplied.
    """

    L: Optional[float] = None
    mu: Optional[float] = None
    sigma: Optional[float] = None
    e_star: Optional[float] = None
    mean_X: Optional[float] = None
    second_moment_X: Optional[float] = None
    var_phi: Optional[float] = None
    var_phi_prime: Optional[float] = None
    fourth_moment_phi_prime: Optional[float] = None
    tau: Optional[float] = None
    M: Optional[float] = None
    b: Optional[float] = None
    alpha: Optional[float] = None
    A_const: Optional[float] = None
    t0_m2: Optional[float] = None
    t0_m4: Optional[float] = None

    def __post_init__(self):
        for name in ("var_phi", "var_phi_prime", "fourth_moment_phi_prime", "t0_m2", "t0_m4",
                     "tau", "M", "L", "mu"):
            val = getattr(self, name)
            if val is not None and val < 0.0:
                raise DomainError(f"{name} must be non-negative, got {val}")
        if self.sigma is not None and self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.mu is not None and self.L is not None and self.mu > self.L:
            raise DomainError(f"need mu <= L, got mu={self.mu}, L={self.L}")

    def with_(self, **changes) -> "BoundConstants":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}


def parse_constants(text: str) -> BoundConstants:
    """Read ``key=value`` lines (``#`` comments allowed) into :class:`BoundConstants`."""
    known = {f.name for f in fields(BoundConstants)}
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or key not in known:
            raise DomainError(f"unknown constants line {raw!r}")
        kv[key] = float(value)
    return BoundConstants(**kv)


def _need(k: BoundConstants, *names):
    missing = [n for n in names if getattr(k, n) is None]
    if missing:
        raise IncompleteConstantsError(f"bound needs {', '.join(missing)}")
    return [getattr(k, n) for n in names]


def _cap(x: float, capped: bool) -> float:
    return min(1.0, x) if capped else x


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# --- batch estimator ----------------------------------------------------------

def mse_bound_minimizer(k: BoundConstants, n: int) -> float:
    """``E[(e_n - e*)^2] <= [L^2 (e*^2 + E X^2) - 2 e* E X] / (n mu^2)``."""
    L, mu, e, mx, m2 = _need(k, "L", "mu", "e_star", "mean_X", "second_moment_X")
    if mu <= 0.0:
        raise IncompleteConstantsError("bound is undefined for mu = 0")
    if n < 1:
        raise DomainError("n must be at least 1")
    return (L * L * (e * e + m2) - 2.0 * e * mx) / (n * mu * mu)


def conc_bound_minimizer(k: BoundConstants, n: int, eps: float, capped: bool = False) -> float:
    """``P[|e_n - e*| >= eps] <= 2 exp(-n mu^2 eps^2 / (8 L^2 sigma^2))``."""
    L, mu, s = _need(k, "L", "mu", "sigma")
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    return _cap(2.0 * math.exp(-n * mu * mu * eps * eps / (8.0 * L * L * s * s)), capped)


def mse_bound_oce(k: BoundConstants, n: int) -> float:
    L, mu, vp, vd, m4 = _need(k, "L", "mu", "var_phi", "var_phi_prime", "fourth_moment_phi_prime")
    if mu <= 0.0:
        raise IncompleteConstantsError("bound is undefined for mu = 0")
    mu4 = mu ** 4
    return (2.0 * vp / n
            + 27.0 * L * L * vd * vd / (2.0 * n * n * mu4)
            + 9.0 * L * L * m4 / (2.0 * n ** 3 * mu4))


@dataclass(frozen=True)
class SubExpConstants:
    """Sub-exponential description of ``phi(X - e*) - E[phi(X - e*)]``.

    ``nu``/``b_se`` are the (variance-proxy, rate) pair from the Bernstein
    argument, ``nu = 4 C1 / c2**2``. ``nu_statement = 4 C1 / c2`` is a
    smaller alternative reading, kept for comparison only.
    """

    c0: float
    C1: float
    c2: float
    nu: float
    nu_statement: float
    b_se: float


def subexp_constants(k: BoundConstants) -> SubExpConstants:
    L, s, e = _need(k, "L", "sigma", "e_star")
    if L <= 0.0:
        raise DomainError("need L > 0")
    slope = abs(L * e - 1.0)
    c0 = 1.0 / (12.0 * L * s * s)
    if slope > 0.0:
        c0 = min(c0, 1.0 / (12.0 * s * slope))
    shift = abs(0.5 * L * e * e - e)
    C1 = 2.0 * (4.0 + math.exp(3.0 * c0 * shift) - 3.0 * c0 * shift)
    c2 = 0.5 * c0
    return SubExpConstants(c0, C1, c2, 4.0 * C1 / (c2 * c2), 4.0 * C1 / c2, 2.0 / c2)


def conc_bound_oce(k: BoundConstants, n: int, eps: float, capped: bool = False) -> float:
    """``P[|oce_n - oce| > eps]`` bound: Bernstein term plus minimizer term."""
    L, mu, s = _need(k, "L", "mu", "sigma")
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    se = subexp_constants(k)
    first = 2.0 * math.exp(-se.c2 * n * eps * eps / (4.0 * (4.0 * se.C1 + eps)))
    second = 2.0 * math.exp(-mu * mu * n * eps / (24.0 * L ** 3 * s * s))
    return _cap(first + second, capped)


def high_conf_radius(k: BoundConstants, n: int, delta: float) -> float:
    """Radius ``r`` with ``|oce_n - oce| <= r`` at confidence ``1 - delta``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    L, mu, s = _need(k, "L", "mu", "sigma")
    se = subexp_constants(k)
    ell = math.log(2.0 / delta)
    q = 6.0 * L ** 3 * s * s / (mu * mu * n)
    lin = (1.0 / (se.c2 * n) + q) * ell
    root = math.sqrt((1.0 / se.c2 + q) ** 2 * ell * ell + 8.0 * se.C1 / (se.c2 * n) * ell)
    return lin + root


# --- streaming estimator --------------------------------------------------------

def sa_k0(k: BoundConstants) -> float:
    """Constant ``K0`` of the averaged-iterate bound ``E[(t_bar_m - e*)^2] <= K0^2 / m``."""
    s, mu, b, M, tau, L, A, m2, m4 = _need(k, "sigma", "mu", "b", "M", "tau", "L", "A_const", "t0_m2", "t0_m4")
    if mu <= 0.0:
        raise IncompleteConstantsError("bound is undefined for mu = 0")
    rb = math.sqrt(b)
    total = s / mu + 6.0 * s / (mu * rb) + 4.0 * L * rb / mu
    if M > 0.0:
        total += M * b * tau * tau / (2.0 * mu ** 1.5) * (1.0 + math.sqrt(mu * b))
    if A > 0.0:
        total += 8.0 * A / math.sqrt(mu) * (1.0 / b + L) * math.sqrt(m2 + s * s / (L * L))
        if M > 0.0:
            tail = m2 + 2.0 * tau * tau * b ** 3 * mu + 8.0 * tau * tau * b * b
            tail += mu * m4 / (20.0 * b * tau * tau) if tau > 0.0 else math.inf
            total += 5.0 * M * rb * tau / (2.0 * mu) * A * _exp(24.0 * L ** 4 * b ** 4) * math.sqrt(tail)
    return total


def sa_mse_bound(k: BoundConstants, m: int) -> float:
    return sa_k0(k) ** 2 / m


def sa_oce_bound(k: BoundConstants, m: int, statement_form: bool = False) -> float:
    """Bound on ``E|oce_sa - oce|`` after ``m`` streaming steps.

    The last term is ``sqrt(Var(phi(X - e*))) / sqrt(m)``, which is what the
    Jensen step produces; ``statement_form=True`` uses ``Var(...) / sqrt(m)``
    instead.
    """
    L, vp, vd = _need(k, "L", "var_phi", "var_phi_prime")
    k0 = sa_k0(k)
    last = vp if statement_form else math.sqrt(vp)
    return L * k0 * k0 / (2.0 * m) + k0 * math.sqrt(vd) / m + last / math.sqrt(m)


# --- bandit --------------------------------------------------------------------------

def log_bar(K: int) -> float:
    return 0.5 + sum(1.0 / i for i in range(2, K + 1))


def gap_vector(gaps: Sequence[float], K: int) -> np.ndarray:
    """Gaps for arms ranked 1..K, taking the best arm's gap equal to the runner-up's.

    Accepts either the K-1 gaps of arms ranked 2..K or all K values.
    """
    g = np.asarray(gaps, dtype=float)
    if g.size == K - 1:
        g = np.concatenate([g[:1], g])
    if g.size != K:
        raise DomainError(f"expected {K - 1} or {K} gaps, got {g.size}")
    if np.any(g[1:] <= 0.0) or np.any(np.diff(g[1:]) < 0.0):
        raise DomainError("gaps of arms 2..K must be positive and sorted ascending")
    return g


def hardness_H(gaps: Sequence[float], K: Optional[int] = None) -> float:
    K = len(gaps) + 1 if K is None else K
    g = gap_vector(gaps, K)
    i = np.arange(1, K + 1)
    return float(np.max(i / np.minimum(g / 2.0, g * g / 4.0)))


def arm_G(k: BoundConstants) -> float:
    L, mu, s = _need(k, "L", "mu", "sigma")
    se = subexp_constants(k)
    return min(se.c2 * se.c2 / (32.0 * se.C1), se.c2 / 8.0, mu * mu / (24.0 * L ** 3 * s * s))


def bandit_bound(arms: Sequence[BoundConstants], gaps: Sequence[float], n: int, K: int,
                 capped: bool = True) -> float:
    """Mis-identification bound ``4K(K-1) exp(-(n-K) G_max / (H logbar K))`` for OCE-SR.

    ``G_max`` is the largest per-arm constant of :func:`arm_G`.
    """
    if len(arms) != K:
        raise DomainError(f"need constants for all {K} arms")
    if n < K:
        raise BudgetError(f"budget n={n} is below the number of arms K={K}")
    g_max = max(arm_G(a) for a in arms)
    H = hardness_H(gaps, K)
    return _cap(4.0 * K * (K - 1) * math.exp(-(n - K) * g_max / (H * log_bar(K))), capped)


# --- constants from a model ------------------------------------------------------------

@dataclass(frozen=True)
class PhiMoments:
    var_phi: float
    var_phi_prime: float
    fourth_moment_phi_prime: float
    tau4: float
    exact: bool


def phi_moments(model, spec: DisutilitySpec, e_star: float, n_mc: int = 1_000_000, seed: int = 0) -> PhiMoments:
    """Moments of ``phi(X - e*)`` and ``phi'(X - e*)`` entering the bounds.

    Exact for mean-variance on a normal or constant model, Monte Carlo
    otherwise.
    """
    if spec.family is Family.MEAN_VARIANCE and isinstance(model, (NormalLoss, ConstantLoss)):
        c = spec.param
        mean = model.mean if isinstance(model, NormalLoss) else model.value
        s2 = model.variance if isinstance(model, NormalLoss) else 0.0
        shift = mean - e_star
        # Y = X - e* ~ N(shift, s2); phi(Y) = Y + c Y^2, phi'(Y) = 1 + 2cY
        var_phi = (1.0 + 2.0 * c * shift) ** 2 * s2 + 2.0 * c * c * s2 * s2
        a = 1.0 + 2.0 * c * shift
        k2 = (2.0 * c) ** 2 * s2
        m4 = a ** 4 + 6.0 * a * a * k2 + 3.0 * k2 * k2
        b = -2.0 * c * shift
        tau4 = b ** 4 + 6.0 * b * b * k2 + 3.0 * k2 * k2
        return PhiMoments(var_phi, k2, m4, tau4, True)
    y = draw(model, make_rng(seed), n_mc) - e_star
    f, fp = phi(spec, y), phi_prime(spec, y)
    return PhiMoments(float(np.var(f)), float(np.var(fp)), float(np.mean(fp ** 4)),
                      float(np.mean((1.0 - fp) ** 4)), False)


def tau_from_samples(spec: DisutilitySpec, samples, e_star: float) -> float:
    """``tau`` with ``tau**4`` equal to the sample mean of ``(1 - phi'(x - e*))**4``."""
    fp = phi_prime(spec, np.asarray(samples, dtype=float) - e_star)
    return float(np.mean((1.0 - fp) ** 4)) ** 0.25


def constants_from_model(model, spec: DisutilitySpec, *, b: Optional[float] = None,
                         alpha: Optional[float] = None, A_const: Optional[float] = None,
                         t0: Optional[float] = None, truth: Optional[ClosedFormRisk] = None,
                         n_mc: int = 1_000_000, seed: int = 0) -> BoundConstants:
    sc = smoothness_constants(spec)
    truth = ground_truth(model, spec, seed) if truth is None else truth
    mom = moments(model)
    pm = phi_moments(model, spec, truth.e_star, n_mc=n_mc, seed=seed)
    sigma = subgaussian_parameter(model)
    return BoundConstants(
        L=sc.L, mu=sc.mu, sigma=sigma if sigma > 0.0 else None, e_star=truth.e_star,
        mean_X=mom.mean, second_moment_X=mom.second_moment,
        var_phi=pm.var_phi, var_phi_prime=pm.var_phi_prime,
        fourth_moment_phi_prime=pm.fourth_moment_phi_prime, tau=pm.tau4 ** 0.25, M=sc.M,
        b=b, alpha=alpha, A_const=A_const,
        t0_m2=None if t0 is None else (t0 - truth.e_star) ** 2,
        t0_m4=None if t0 is None else (t0 - truth.e_star) ** 4,
    )


# --- Monte-Carlo tail frequencies ----------------------------------------------------

@dataclass(frozen=True)
class TailFrequency:
    freq: float
    se: float
    reps: int


def abs_errors(model, spec: DisutilitySpec, n: int, reps: int, seed: int,
               truth: Optional[ClosedFormRisk] = None, tol: float = DEFAULT_TOL):
    """Absolute batch errors ``|e_n - e*|`` and ``|oce_n - oce|``, one per replication."""
    truth = ground_truth(model, spec, seed) if truth is None else truth

    def one(r):
        est = estimate_oce(sample(model, n, seed + r), spec, tol)
        return abs(est.e_hat - truth.e_star), abs(est.oce_hat - truth.oce)

    out = np.array(rep_map(one, range(reps)))
    return out[:, 0], out[:, 1]


def tail_frequency(errors: np.ndarray, eps: float) -> TailFrequency:
    hits = np.asarray(errors) >= eps
    p = float(np.mean(hits))
    return TailFrequency(p, math.sqrt(p * (1.0 - p) / hits.size), hits.size)


def empirical_tail(model, spec: DisutilitySpec, n: int, eps: float, reps: int, seed: int,
                   target: str = "minimizer", truth: Optional[ClosedFormRisk] = None) -> TailFrequency:
    """Fraction of replications whose absolute error is at least ``eps``."""
    if target not in ("minimizer", "oce"):
        raise DomainError(f"target must be 'minimizer' or 'oce', got {target!r}")
    err_e, err_o = abs_errors(model, spec, n, reps, seed, truth)
    return tail_frequency(err_e if target == "minimizer" else err_o, eps)
