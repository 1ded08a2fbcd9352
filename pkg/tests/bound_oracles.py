"""Second, independently written transcriptions of the bound formulas.

Used only by the tests. They favour readability over speed and deliberately
share no code with the library.
"""
import math

import numpy as np


def prod0(*factors):
    # product with the convention 0 * inf = 0, matching a term that vanishes
    if any(f == 0 for f in factors):
        return 0.0
    out = 1.0
    for f in factors:
        out *= f
    return out


def exp_or_inf(x):
    return math.inf if x > 709.0 else math.exp(x)


def mse_min(L, mu, e, ex, ex2, n):
    numer = L**2 * (e**2 + ex2) - 2 * e * ex
    return numer / (n * mu**2)


def conc_min(L, mu, sigma, n, eps):
    return 2 * math.exp(-(n * mu**2 * eps**2) / (8 * L**2 * sigma**2))


def mse_oce(L, mu, var_phi, var_dphi, m4_dphi, n):
    t1 = 2 * var_phi / n
    t2 = 27 * L**2 * var_dphi**2 / (2 * n**2 * mu**4)
    t3 = 9 * L**2 * m4_dphi / (2 * n**3 * mu**4)
    return t1 + t2 + t3


def subexp(L, sigma, e):
    cands = [1 / (12 * L * sigma**2)]
    if L * e != 1:
        cands.append(1 / (12 * sigma * abs(L * e - 1)))
    c0 = min(cands)
    a = abs(L * e**2 / 2 - e)
    C1 = 2 * (4 + math.exp(3 * c0 * a) - 3 * c0 * a)
    return c0, C1, c0 / 2


def conc_oce(L, mu, sigma, e, n, eps):
    _, C1, c2 = subexp(L, sigma, e)
    a = 2 * math.exp(-c2 * n * eps**2 / (4 * (4 * C1 + eps)))
    b = 2 * math.exp(-mu**2 * n * eps / (24 * L**3 * sigma**2))
    return a + b


def radius(L, mu, sigma, e, n, delta):
    _, C1, c2 = subexp(L, sigma, e)
    lg = math.log(2 / delta)
    k = 6 * L**3 * sigma**2 / (mu**2 * n)
    first = (1 / (c2 * n) + k) * lg
    inner = (1 / c2 + 6 * L**3 * sigma**2 / (n * mu**2)) ** 2 * lg**2 + (8 * C1 / (c2 * n)) * lg
    return first + math.sqrt(inner)


def k0(sigma, mu, b, M, tau, L, A, m2, m4):
    terms = [
        sigma / mu,
        6 * sigma / (mu * b**0.5),
        prod0(M * b * tau**2 / (2 * mu**1.5), 1 + (mu * b) ** 0.5),
        4 * L * b**0.5 / mu,
        prod0(8 * A / mu**0.5, 1 / b + L, (m2 + sigma**2 / L**2) ** 0.5),
    ]
    if tau == 0:
        bracket = math.inf
    else:
        bracket = (m2 + mu * m4 / (20 * b * tau**2) + 2 * tau**2 * b**3 * mu + 8 * tau**2 * b**2) ** 0.5
    terms.append(prod0(5 * M * b**0.5 * tau / (2 * mu), A, exp_or_inf(24 * L**4 * b**4), bracket))
    return sum(terms)


def sa_oce(L, K0, var_dphi, var_phi, m, statement=False):
    last = var_phi if statement else math.sqrt(var_phi)
    return L * K0**2 / (2 * m) + K0 * math.sqrt(var_dphi) / m + last / math.sqrt(m)


def hardness(ranked_gaps):
    """``ranked_gaps`` lists Delta_[1..K] with Delta_[1] already set."""
    return max((i + 1) / min(d / 2, d * d / 4) for i, d in enumerate(ranked_gaps))


def arm_g(L, mu, sigma, e):
    _, C1, c2 = subexp(L, sigma, e)
    return min(c2**2 / (32 * C1), c2 / 8, mu**2 / (24 * L**3 * sigma**2))


def bandit(arm_params, gaps_2_to_K, n):
    K = len(arm_params)
    logbar = 0.5 + sum(1 / i for i in range(2, K + 1))
    H = hardness([gaps_2_to_K[0]] + list(gaps_2_to_K))
    G = max(arm_g(*p) for p in arm_params)
    return min(1.0, 4 * K * (K - 1) * math.exp(-(n - K) * G / (H * logbar)))


def normal_mv_moments(mean, var, c, e):
    """Moments of phi(Y), phi'(Y) for Y = X - e ~ N(mean - e, var), phi(y) = y + c y^2, by quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(60)
    weights = weights / weights.sum()
    y = (mean - e) + math.sqrt(var) * nodes
    f = y + c * y * y
    fp = 1 + 2 * c * y
    ef, efp = np.dot(weights, f), np.dot(weights, fp)
    return (float(np.dot(weights, (f - ef) ** 2)), float(np.dot(weights, (fp - efp) ** 2)),
            float(np.dot(weights, fp**4)), float(np.dot(weights, (1 - fp) ** 4)))
