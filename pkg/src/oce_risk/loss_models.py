"""Samplable loss distributions.

All randomness goes through :func:`make_rng`, a Philox4x64 counter-based
generator keyed by a non-negative integer seed. Replication ``r`` of an
experiment seeded with ``s`` uses seed ``s + r``; distinct Philox keys give
non-overlapping streams, so runs are bit-for-bit repeatable.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_CHUNK = 1 << 16
_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def make_rng(seed: int) -> np.random.Generator:
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


# --- standard normal helpers ------------------------------------------------

def std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_quantile(p: float, tol: float = 1e-12) -> float:
    """Inverse of the standard normal CDF.

    Newton iterations on the erfc-based CDF, safeguarded by bisection on
    [-40, 40]; the result is accurate to well below 1e-9.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    # solve in the tail that keeps the CDF value away from 1 to avoid cancellation
    if p > 0.5:
        return -std_normal_quantile(1.0 - p, tol)
    lo, hi = -40.0, 0.0
    x = -1.0
    for _ in range(200):
        f = std_normal_cdf(x) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        dens = std_normal_pdf(x)
        step = f / dens if dens > 0.0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


# --- models ------------------------------------------------------------------

@dataclass(frozen=True)
class NormalLoss:
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise DomainError("normal loss parameters must be finite")
        if self.variance <= 0.0:
            raise DomainError(f"variance must be positive, got {self.variance}")

    @property
    def sigma(self) -> float:
        """Sub-Gaussian parameter (the standard deviation)."""
        return math.sqrt(self.variance)

    @property
    def tag(self) -> str:
        return f"normal(mean={self.mean!r},variance={self.variance!r})"


@dataclass(frozen=True)
class ConstantLoss:
    """A point mass; useful for consistency checks."""

    value: float

    @property
    def tag(self) -> str:
        return f"constant({self.value!r})"


@dataclass(frozen=True, eq=False)
class CreditRiskModel:
    """Gaussian factor model of portfolio default losses.

    Position ``i`` defaults when ``R_i = A[i,0] eps_i + sum_j A[i,j] Z_j``
    exceeds the threshold ``Phi^{-1}(1 - p_i)``; the loss is
    ``sum_i v_i 1{default_i}``. ``eps`` holds one idiosyncratic standard
    normal per position and ``Z`` one per systematic factor.

    ``p_i`` may be 0 or 1 (never / always defaults); thresholds then become
    +inf / -inf.
    """

    v: np.ndarray
    p: np.ndarray
    A: np.ndarray
    _thresholds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        p = np.array(self.p, dtype=float)
        A = np.array(self.A, dtype=float)
        if v.ndim != 1 or p.shape != v.shape:
            raise DomainError("v and p must be vectors of equal length")
        m = v.size
        if A.ndim != 2 or A.shape[0] != m or A.shape[1] < 2:
            raise DomainError(f"A must be m x (d+1) with d >= 1, got {A.shape}")
        d = A.shape[1] - 1
        if not d < m:
            raise DomainError(f"need fewer factors than positions (d={d}, m={m})")
        if np.any(v < 0.0):
            raise DomainError("fractional losses must be non-negative")
        if np.any((p < 0.0) | (p > 1.0)):
            raise DomainError("default probabilities must lie in [0, 1]")
        if np.any(A[:, 0] <= 0.0) or np.any(A[:, 1:] < 0.0):
            raise DomainError("need A[i,0] > 0 and A[i,j] >= 0")
        norms = np.sum(A * A, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise DomainError("each row of A must have unit Euclidean norm")
        for arr in (v, p, A):
            arr.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "A", A)
        thr = np.array([_threshold(pi) for pi in p])
        thr.setflags(write=False)
        object.__setattr__(self, "_thresholds", thr)

    @classmethod
    def from_loadings(cls, v, p, loadings) -> "CreditRiskModel":
        """Build from the m x d systematic loadings; ``A[:,0]`` closes each row to unit norm."""
        L = np.atleast_2d(np.asarray(loadings, dtype=float))
        a0 = np.sqrt(1.0 - np.sum(L * L, axis=1))
        return cls(v, p, np.column_stack([a0, L]))

    @property
    def m(self) -> int:
        return self.v.size

    @property
    def d(self) -> int:
        return self.A.shape[1] - 1

    @property
    def sigma(self) -> float:
        """Sub-Gaussian parameter from the bounded support [0, sum v] (Hoeffding)."""
        return 0.5 * float(np.sum(self.v))

    @property
    def tag(self) -> str:
        return f"credit(m={self.m},d={self.d})"

    def __eq__(self, other):
        if not isinstance(other, CreditRiskModel):
            return NotImplemented
        return (np.array_equal(self.v, other.v) and np.array_equal(self.p, other.p)
                and np.array_equal(self.A, other.A))

    __hash__ = None


LossModel = Union[NormalLoss, ConstantLoss, CreditRiskModel]


def _threshold(p: float) -> float:
    if p >= 1.0:
        return -math.inf
    if p <= 0.0:
        return math.inf
    return std_normal_quantile(1.0 - p)


def credit_thresholds(model: CreditRiskModel) -> np.ndarray:
    """Default thresholds ``r_i = Phi^{-1}(1 - p_i)``; needs every ``p_i`` in (0, 1)."""
    if np.any((model.p <= 0.0) | (model.p >= 1.0)):
        raise DomainError("thresholds need every default probability in (0, 1)")
    return model._thresholds.copy()


def credit_portfolio_25() -> CreditRiskModel:
    """The 25-position, 6-factor portfolio used in the credit-risk experiment.

    Five groups of five positions with losses 1.00, 1.25, ..., 2.00; every
    position defaults with probability 0.05, loads 0.1 on its group factor
    and 0.1 on a common sixth factor.
    """
    m, d = 25, 6
    v = np.repeat([1.0, 1.25, 1.5, 1.75, 2.0], 5)
    p = np.full(m, 0.05)
    loadings = np.zeros((m, d))
    for g in range(5):
        loadings[5 * g:5 * g + 5, g] = 0.1
    loadings[:, 5] = 0.1
    return CreditRiskModel.from_loadings(v, p, loadings)


# --- sampling ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleBatch:
    values: np.ndarray
    seed: int
    model_tag: str

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise DomainError("a sample batch needs at least one value")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def shifted(self, c: float) -> "SampleBatch":
        return SampleBatch(self.values + c, self.seed, f"{self.model_tag}+{c!r}")


def draw(model: LossModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. losses from ``model`` using ``rng``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if isinstance(model, NormalLoss):
        return model.mean + model.sigma * rng.standard_normal(n)
    if isinstance(model, ConstantLoss):
        return np.full(n, float(model.value))
    if isinstance(model, CreditRiskModel):
        out = np.empty(n)
        a0, loadings, thr, v = model.A[:, 0], model.A[:, 1:], model._thresholds, model.v
        for start in range(0, n, _CHUNK):
            k = min(_CHUNK, n - start)
            z = rng.standard_normal((k, model.d))
            eps = rng.standard_normal((k, model.m))
            r = eps * a0 + z @ loadings.T
            out[start:start + k] = np.where(r > thr, v, 0.0).sum(axis=1)
        return out
    raise TypeError(f"unsupported model type {type(model).__name__}")


def sample(model: LossModel, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    return SampleBatch(draw(model, make_rng(seed), n), seed, model.tag)


# --- moments -----------------------------------------------------------------

@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    second_moment: float
    exact: bool


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def bivariate_upper_orthant(h: float, k: float, rho: float) -> float:
    """``P[Y1 > h, Y2 > k]`` for standard normals with correlation ``rho``.

    Uses d/dr P = bivariate density at (h, k; r) and integrates r over
    [0, rho] with 64-point Gauss-Legendre; intended for |rho| well below 1.
    """
    base = (1.0 - std_normal_cdf(h)) * (1.0 - std_normal_cdf(k))
    if rho == 0.0:
        return base
    r = 0.5 * rho * (_GL_NODES + 1.0)
    one_m = 1.0 - r * r
    dens = np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_m)) / (2.0 * math.pi * np.sqrt(one_m))
    return base + 0.5 * rho * float(np.dot(_GL_WEIGHTS, dens))


def _credit_moments_quadrature(model: CreditRiskModel) -> Moments:
    v, p, thr = model.v, model.p, model._thresholds
    mean = float(np.dot(v, p))
    var = float(np.sum(v * v * p * (1.0 - p)))
    loadings = model.A[:, 1:]
    rho = loadings @ loadings.T
    random_pos = [i for i in range(model.m) if 0.0 < p[i] < 1.0]
    cov = 0.0
    for a, i in enumerate(random_pos):
        for j in random_pos[a + 1:]:
            pij = bivariate_upper_orthant(thr[i], thr[j], rho[i, j])
            cov += float(v[i] * v[j] * (pij - p[i] * p[j]))
    var += 2.0 * cov
    return Moments(mean, var, var + mean * mean, exact=True)


def moments(model: LossModel, method: str = "exact", n_mc: int = 10_000_000, seed: int = 0) -> Moments:
    """Mean, variance and second moment of the loss.

    ``method="exact"`` is analytic for normal/constant models and uses
    pairwise bivariate-normal default probabilities for the credit model.
    ``method="monte-carlo"`` estimates from ``n_mc`` draws instead
    (``exact=False`` in the result).
    """
    if method == "monte-carlo":
        x = draw(model, make_rng(seed), n_mc)
        mean = float(np.mean(x))
        var = float(np.var(x))
        return Moments(mean, var, float(np.mean(x * x)), exact=False)
    if method != "exact":
        raise DomainError(f"unknown moments method {method!r}")
    if isinstance(model, NormalLoss):
        return Moments(model.mean, model.variance, model.variance + model.mean ** 2, True)
    if isinstance(model, ConstantLoss):
        return Moments(model.value, 0.0, model.value ** 2, True)
    return _credit_moments_quadrature(model)


def subgaussian_parameter(model: LossModel) -> float:
    if isinstance(model, ConstantLoss):
        return 0.0
    return model.sigma


# --- Monte-Carlo oracle ------------------------------------------------------

@dataclass(frozen=True)
class OracleEstimate:
    e_star_hat: float
    oce_hat: float
    se_e: float
    se_oce: float
    n: int


def oracle_oce(model: LossModel, spec, N: int = 1_000_000, seed: int = 0) -> OracleEstimate:
    """Large-sample batch estimate used as ground truth when no closed form exists.

    Standard errors come from the delta method: ``std(phi(X - e))/sqrt(N)``
    for the risk and ``std(phi'(X - e)) / (mean(phi''(X - e)) sqrt(N))``
    for the minimizer (NaN for CVaR).
    """
    from .batch import estimate_oce
    from .disutility import Family, phi, phi_prime, phi_second

    if N < 100_000:
        raise DomainError(f"the oracle needs N >= 1e5 samples, got {N}")
    batch = sample(model, N, seed)
    est = estimate_oce(batch, spec)
    resid = batch.values - est.e_hat
    se_oce = float(np.std(phi(spec, resid)) / math.sqrt(N))
    se_e = math.nan
    if spec.family is not Family.CVAR:
        curv = float(np.mean(phi_second(spec, resid)))
        if curv > 0.0:
            se_e = float(np.std(phi_prime(spec, resid)) / (curv * math.sqrt(N)))
        else:
            se_e = 0.0
    return OracleEstimate(est.e_hat, est.oce_hat, se_e, se_oce, N)


# --- model files ---------------------------------------------------------------

def _parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise DomainError(f"line {lineno}: expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",") if x.strip()])


def _matrix(text: str) -> np.ndarray:
    return np.array([_floats(row) for row in text.split(";") if row.strip()])


def parse_model(text: str) -> LossModel:
    kv = _parse_kv(text)
    kind = kv.get("kind")
    if kind == "normal":
        return NormalLoss(float(kv["mean"]), float(kv["variance"]))
    if kind == "constant":
        return ConstantLoss(float(kv["value"]))
    if kind == "credit":
        v, p = _floats(kv["v"]), _floats(kv["p"])
        if "A" in kv:
            model = CreditRiskModel(v, p, _matrix(kv["A"]))
        else:
            model = CreditRiskModel.from_loadings(v, p, _matrix(kv["loadings"]))
        for key, expected in (("m", model.m), ("d", model.d)):
            if key in kv and int(kv[key]) != expected:
                raise DomainError(f"declared {key}={kv[key]} but data implies {expected}")
        return model
    raise DomainError(f"unknown model kind {kind!r}")


def format_model(model: LossModel) -> str:
    if isinstance(model, NormalLoss):
        return f"kind=normal\nmean={model.mean!r}\nvariance={model.variance!r}\n"
    if isinstance(model, ConstantLoss):
        return f"kind=constant\nvalue={model.value!r}\n"
    fmt = lambda arr: ",".join(repr(float(x)) for x in arr)  # noqa: E731
    rows = ";".join(fmt(row) for row in model.A)
    return (f"kind=credit\nm={model.m}\nd={model.d}\nv={fmt(model.v)}\n"
            f"p={fmt(model.p)}\nA={rows}\n")


def read_model(path) -> LossModel:
    with open(path) as fh:
        return parse_model(fh.read())


def bundled_model_path(name: str) -> str:
    """Path of a model file shipped with the package (``credit_25``, ``normal_synthetic``)."""
    path = os.path.join(_DATA_DIR, f"{name}.txt")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path
