"""Disutility functions defining an OCE risk.

Four families are supported:

==============  ========================  =====================
family          phi(t)                    text form
==============  ========================  =====================
expected loss   t                         ``expected-loss``
entropic        (exp(gamma t) - 1)/gamma  ``entropic:gamma=1.0``
mean-variance   t + c t^2                 ``mean-variance:c=0.5``
CVaR            max(t, 0)/(1 - alpha)     ``cvar:alpha=0.95``
==============  ========================  =====================

Every evaluator accepts a scalar or an array and returns the same shape.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DisutilityOverflowError,
    DomainError,
    KinkError,
    NoClosedFormError,
    UnsupportedError,
)

# exp(709.78) is the largest finite double; stay a little below it.
ENTROPIC_EXPONENT_LIMIT = 700.0


class Family(str, enum.Enum):
    EXPECTED_LOSS = "expected-loss"
    ENTROPIC = "entropic"
    MEAN_VARIANCE = "mean-variance"
    CVAR = "cvar"


_PARAM_NAME = {
    Family.EXPECTED_LOSS: None,
    Family.ENTROPIC: "gamma",
    Family.MEAN_VARIANCE: "c",
    Family.CVAR: "alpha",
}


@dataclass(frozen=True)
class DisutilitySpec:
    """A disutility family together with its single parameter."""

    family: Family
    param: Optional[float] = None

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.EXPECTED_LOSS:
            if self.param is not None:
                raise DomainError("expected-loss takes no parameter")
            return
        if self.param is None or not math.isfinite(self.param):
            raise DomainError(f"{family.value} needs a finite {_PARAM_NAME[family]}")
        object.__setattr__(self, "param", float(self.param))
        if family is Family.CVAR:
            if not 0.0 < self.param < 1.0:
                raise DomainError(f"alpha must lie in (0, 1), got {self.param}")
        elif self.param <= 0.0:
            raise DomainError(f"{_PARAM_NAME[family]} must be positive, got {self.param}")

    @classmethod
    def expected_loss(cls) -> "DisutilitySpec":
        return cls(Family.EXPECTED_LOSS)

    @classmethod
    def entropic(cls, gamma: float) -> "DisutilitySpec":
        return cls(Family.ENTROPIC, gamma)

    @classmethod
    def mean_variance(cls, c: float) -> "DisutilitySpec":
        return cls(Family.MEAN_VARIANCE, c)

    @classmethod
    def cvar(cls, alpha: float) -> "DisutilitySpec":
        return cls(Family.CVAR, alpha)

    @property
    def is_smooth(self) -> bool:
        """True when phi' exists everywhere."""
        return self.family is not Family.CVAR

    def __str__(self) -> str:
        name = _PARAM_NAME[self.family]
        if name is None:
            return self.family.value
        return f"{self.family.value}:{name}={self.param!r}"


def parse_spec(text: str) -> DisutilitySpec:
    """Parse the one-line text form, e.g. ``mean-variance:c=0.5``."""
    head, _, tail = text.strip().partition(":")
    try:
        family = Family(head.strip())
    except ValueError:
        raise DomainError(f"unknown disutility family {head!r}") from None
    name = _PARAM_NAME[family]
    if name is None:
        if tail.strip():
            raise DomainError(f"{family.value} takes no parameter")
        return DisutilitySpec(family)
    key, eq, value = tail.partition("=")
    if not eq or key.strip() != name:
        raise DomainError(f"expected '{family.value}:{name}=<value>', got {text!r}")
    return DisutilitySpec(family, float(value))


@dataclass(frozen=True)
class SmoothnessConstants:
    """Strong convexity ``mu``, smoothness ``L`` and Lipschitz constant ``M`` of phi''.

    ``None`` marks a constant that does not exist globally.
    """

    mu: float
    L: Optional[float]
    M: Optional[float]


def _check_entropic(gamma: float, t):
    if np.any(gamma * np.asarray(t) > ENTROPIC_EXPONENT_LIMIT):
        raise DisutilityOverflowError(
            f"gamma*t exceeds {ENTROPIC_EXPONENT_LIMIT}; exp would overflow"
        )


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def phi(spec: DisutilitySpec, t):
    t_arr = np.asarray(t, dtype=float)
    fam, p = spec.family, spec.param
    if fam is Family.EXPECTED_LOSS:
        y = t_arr.copy()
    elif fam is Family.ENTROPIC:
        _check_entropic(p, t_arr)
        y = np.expm1(p * t_arr) / p
    elif fam is Family.MEAN_VARIANCE:
        y = t_arr + p * t_arr * t_arr
    else:
        y = np.maximum(t_arr, 0.0) / (1.0 - p)
    return _out(y, t)


def phi_prime(spec: DisutilitySpec, t):
    t_arr = np.asarray(t, dtype=float)
    fam, p = spec.family, spec.param
    if fam is Family.EXPECTED_LOSS:
        y = np.ones_like(t_arr)
    elif fam is Family.ENTROPIC:
        _check_entropic(p, t_arr)
        y = np.exp(p * t_arr)
    elif fam is Family.MEAN_VARIANCE:
        y = 1.0 + 2.0 * p * t_arr
    else:
        if np.any(t_arr == 0.0):
            raise KinkError("CVaR disutility is not differentiable at 0")
        y = np.where(t_arr > 0.0, 1.0 / (1.0 - p), 0.0)
    return _out(y, t)


def phi_second(spec: DisutilitySpec, t):
    t_arr = np.asarray(t, dtype=float)
    fam, p = spec.family, spec.param
    if fam is Family.EXPECTED_LOSS:
        y = np.zeros_like(t_arr)
    elif fam is Family.ENTROPIC:
        _check_entropic(p, t_arr)
        y = p * np.exp(p * t_arr)
    elif fam is Family.MEAN_VARIANCE:
        y = np.full_like(t_arr, 2.0 * p)
    else:
        raise UnsupportedError("CVaR disutility has no second derivative")
    return _out(y, t)


def smoothness_constants(spec: DisutilitySpec) -> SmoothnessConstants:
    fam = spec.family
    if fam is Family.EXPECTED_LOSS:
        return SmoothnessConstants(mu=0.0, L=0.0, M=0.0)
    if fam is Family.MEAN_VARIANCE:
        return SmoothnessConstants(mu=2.0 * spec.param, L=2.0 * spec.param, M=0.0)
    # entropic: phi'' = gamma e^{gamma t} sweeps (0, inf), so no global mu, L or M
    return SmoothnessConstants(mu=0.0, L=None, M=None)


@dataclass(frozen=True)
class ClosedFormRisk:
    e_star: float
    oce: float


def closed_form_risk(spec: DisutilitySpec, model) -> ClosedFormRisk:
    """Exact minimizer and OCE risk where a closed form is known.

    Covered pairs: mean-variance with any model whose moments are known,
    entropic and CVaR with a normal (or constant) model, and expected loss
    with any model. For expected loss every point minimizes; 0 is reported.

    Raises
    ------
    NoClosedFormError
        For any other pair; fall back to
        :func:`oce_risk.loss_models.oracle_oce`.
    """
    from .loss_models import ConstantLoss, NormalLoss, moments, std_normal_pdf, std_normal_quantile

    fam, p = spec.family, spec.param
    if isinstance(model, ConstantLoss):
        return ClosedFormRisk(model.value, model.value)
    if fam is Family.EXPECTED_LOSS:
        return ClosedFormRisk(0.0, moments(model).mean)
    if fam is Family.MEAN_VARIANCE:
        mom = moments(model)
        return ClosedFormRisk(mom.mean, mom.mean + p * mom.variance)
    if isinstance(model, NormalLoss):
        if fam is Family.ENTROPIC:
            # log E[e^{gamma X}] / gamma from the normal moment-generating function
            value = model.mean + 0.5 * p * model.variance
            return ClosedFormRisk(value, value)
        z = std_normal_quantile(p)
        sd = math.sqrt(model.variance)
        var = model.mean + sd * z
        return ClosedFormRisk(var, model.mean + sd * std_normal_pdf(z) / (1.0 - p))
    raise NoClosedFormError(f"no closed form for {spec} on {type(model).__name__}")
