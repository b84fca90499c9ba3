"""Privacy accounting for T-fold composition of the Poisson-subsampled
Gaussian mechanism.

Two accountants are provided:

* ``rdp_epsilon`` -- Renyi-DP moments of the sampled Gaussian mechanism
  (exact integral formula at integer orders, stable series at fractional
  orders), composed over T steps and converted with
  eps = min_alpha [T * eps_alpha + log(1/delta) / (alpha - 1)].
* ``gdp_epsilon`` / ``gdp_mu`` -- the closed-form Gaussian-DP surrogate
  mu = p * sqrt(T * (e^{1/sigma^2} - 1)) and its (eps, delta) conversion
  eps = mu^2 + mu * sqrt(2 log(1/delta)).

``calibrate_sigma`` inverts either accountant by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import CalibrationError, InvalidArgumentError

__all__ = [
    "PrivacySpec", "DEFAULT_ORDERS",
    "gdp_mu", "gdp_epsilon", "rdp_epsilon", "calibrate_sigma",
]

# Fixed order grid so results reproduce bit-exactly.
DEFAULT_ORDERS = tuple(np.arange(1.5, 64.0 + 1e-9, 0.25)) + (128.0, 256.0, 512.0)

SIGMA_MIN, SIGMA_MAX = 0.3, 100.0


@dataclass(frozen=True)
class PrivacySpec:
    eps: float
    delta: float
    p: float       # sampling probability per step
    steps: int

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("target eps must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError("delta must be in (0, 1)")
        if not 0.0 < self.p <= 1.0:
            raise InvalidArgumentError("sampling probability must be in (0, 1]")
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")


def gdp_mu(sigma: float, p: float, steps: int) -> float:
    """Asymptotic Gaussian-DP parameter of T subsampled Gaussian steps."""
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be > 0")
    return p * math.sqrt(steps * math.expm1(1.0 / sigma ** 2))


def gdp_epsilon(mu: float, delta: float) -> float:
    """(eps, delta) implied by a mu-GDP guarantee."""
    if mu < 0:
        raise InvalidArgumentError("mu must be >= 0")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must be in (0, 1)")
    return mu ** 2 + mu * math.sqrt(2.0 * math.log(1.0 / delta))


def _log_add(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = max(a, b), min(a, b)
    return hi + math.log1p(math.exp(lo - hi))


def _log_sub(a: float, b: float) -> float:
    # requires a >= b
    if b == -math.inf:
        return a
    if a == b:
        return -math.inf
    return a + math.log1p(-math.exp(b - a))


def _log_erfc(x: float) -> float:
    return math.log(2.0) + special.log_ndtr(-x * math.sqrt(2.0))


def _log_moment_int(q: float, sigma: float, alpha: int) -> float:
    """log E[(..)^alpha] of the sampled Gaussian at integer order."""
    acc = -math.inf
    for k in range(alpha + 1):
        term = (
            math.lgamma(alpha + 1) - math.lgamma(k + 1) - math.lgamma(alpha - k + 1)
            + k * math.log(q) + (alpha - k) * math.log1p(-q)
            + (k * k - k) / (2.0 * sigma ** 2)
        )
        acc = _log_add(acc, term)
    return acc


def _log_moment_frac(q: float, sigma: float, alpha: float) -> float:
    """Fractional-order log moment via the split-integral series."""
    log_a0, log_a1 = -math.inf, -math.inf
    z0 = sigma ** 2 * math.log(1.0 / q - 1.0) + 0.5
    i = 0
    while True:
        coef = special.binom(alpha, i)
        if coef == 0.0:
            break
        log_coef = math.log(abs(coef))
        j = alpha - i
        log_t0 = log_coef + i * math.log(q) + j * math.log1p(-q)
        log_t1 = log_coef + j * math.log(q) + i * math.log1p(-q)
        log_e0 = math.log(0.5) + _log_erfc((i - z0) / (math.sqrt(2.0) * sigma))
        log_e1 = math.log(0.5) + _log_erfc((z0 - j) / (math.sqrt(2.0) * sigma))
        log_s0 = log_t0 + (i * i - i) / (2.0 * sigma ** 2) + log_e0
        log_s1 = log_t1 + (j * j - j) / (2.0 * sigma ** 2) + log_e1
        if coef > 0:
            log_a0 = _log_add(log_a0, log_s0)
            log_a1 = _log_add(log_a1, log_s1)
        else:
            log_a0 = _log_sub(log_a0, log_s0)
            log_a1 = _log_sub(log_a1, log_s1)
        i += 1
        if max(log_s0, log_s1) < -40 and i > alpha:
            break
    return _log_add(log_a0, log_a1)


def _rdp_single(q: float, sigma: float, alpha: float) -> float:
    """Renyi divergence bound of one sampled-Gaussian step at order alpha."""
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return alpha / (2.0 * sigma ** 2)
    if float(alpha).is_integer():
        log_m = _log_moment_int(q, sigma, int(alpha))
    else:
        log_m = _log_moment_frac(q, sigma, alpha)
    return log_m / (alpha - 1.0)


def rdp_epsilon(sigma: float, p: float, steps: int, delta: float,
                orders=DEFAULT_ORDERS) -> float:
    """Upper bound on eps after composing T subsampled Gaussian steps."""
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be > 0")
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError("p must be in [0, 1]")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError("delta must be in (0, 1)")
    best = math.inf
    for alpha in orders:
        eps_alpha = _rdp_single(p, sigma, float(alpha))
        best = min(best, steps * eps_alpha + math.log(1.0 / delta) / (alpha - 1.0))
    return best


def _account(method: str, sigma: float, spec: PrivacySpec) -> float:
    if method == "rdp":
        return rdp_epsilon(sigma, spec.p, spec.steps, spec.delta)
    if method == "gdp":
        return gdp_epsilon(gdp_mu(sigma, spec.p, spec.steps), spec.delta)
    raise InvalidArgumentError(f"unknown accounting method {method!r}")


def calibrate_sigma(spec: PrivacySpec, method: str = "rdp",
                    rel_tol: float = 1e-4) -> float:
    """Smallest noise multiplier meeting the budget, by bisection.

    eps is monotone decreasing in sigma, so bisect on a log scale in
    [SIGMA_MIN, SIGMA_MAX] until the bracket is within rel_tol.
    """
    lo, hi = SIGMA_MIN, SIGMA_MAX
    if _account(method, lo, spec) <= spec.eps:
        return lo
    if _account(method, hi, spec) > spec.eps:
        raise CalibrationError(
            f"eps={spec.eps} unattainable for sigma in [{SIGMA_MIN}, {SIGMA_MAX}]"
        )
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if _account(method, mid, spec) <= spec.eps:
            hi = mid
        else:
            lo = mid
    return hi
