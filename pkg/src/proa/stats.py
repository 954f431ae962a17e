"""Concentration bounds and the sequential hypothesis test.

Two error bounds are provided for a Bernoulli mean estimated from i.i.d.
samples:

* ``hoeffding_epsilon`` -- the classic fixed-sample half-width
  sqrt(log(2/delta) / (2n)), valid only when n is chosen in advance.

* ``adaptive_epsilon`` -- an anytime-valid half-width

      eps(delta, n) = sqrt((0.6*log(log_{1.1}(n) + 1)
                            + (1/1.8)*log(24/delta)) / n)

  which holds simultaneously at every sample count, so the sampling loop
  may stop at a data-dependent time without voiding the guarantee.  The
  constants 0.6 and 1.1 are fixed by design and are not tunable.

``hypothesis_decision`` turns an estimate and a bound into a three-way
verdict against the tolerated failure rate tau, and
``agresti_coull_interval`` is the fixed-sample binomial interval used by
the baseline certifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "ConfidenceParams",
    "BoundValue",
    "TestVerdict",
    "adaptive_epsilon",
    "hoeffding_epsilon",
    "hypothesis_decision",
    "agresti_coull_interval",
    "normal_quantile",
]

# Fixed coefficients of the adaptive bound.  The remaining constants of the
# formula (the 1/1.8 factor and the 24 inside the log) are kept verbatim
# as published and are not derived from these.
ADAPTIVE_A = 0.6
ADAPTIVE_C = 1.1
_LOG_C = math.log(ADAPTIVE_C)


@dataclass(frozen=True)
class ConfidenceParams:
    """Parameters of one certification query.

    delta: confidence complement, in (0, 1).
    tau:   tolerated failure rate, in [0, 1).
    a, c:  coefficients of the adaptive bound; pinned to 0.6 and 1.1.
    """

    delta: float
    tau: float = 0.05
    a: float = ADAPTIVE_A
    c: float = ADAPTIVE_C

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must be in [0, 1), got {self.tau}")
        if self.a != ADAPTIVE_A or self.c != ADAPTIVE_C:
            raise ValueError(
                f"bound coefficients are fixed at a={ADAPTIVE_A}, c={ADAPTIVE_C}; "
                f"got a={self.a}, c={self.c}"
            )


@dataclass(frozen=True)
class BoundValue:
    """A confidence half-width together with the sample count it covers."""

    epsilon: float
    n: int


class TestVerdict(Enum):
    CERTIFIED_HOLDS = "certified_holds"
    CERTIFIED_VIOLATED = "certified_violated"
    UNDECIDED = "undecided"


TestVerdict.__test__ = False  # keep pytest from trying to collect the enum


def _adaptive_epsilon_raw(delta: float, n: int) -> float:
    """The adaptive half-width formula with no range check on delta.

    Exposed separately so the raw formula can be evaluated at nonsensical
    confidence inputs (e.g. delta=24 makes the second term vanish); the
    public operation validates delta in (0, 1).
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    double_log = math.log(math.log(n) / _LOG_C + 1.0)
    return math.sqrt((ADAPTIVE_A * double_log + math.log(24.0 / delta) / 1.8) / n)


def adaptive_epsilon(params: ConfidenceParams, n: int) -> BoundValue:
    """Anytime-valid half-width for the running mean after n samples.

    Monotone nonincreasing in n for n >= 2.  Raises ValueError on n < 1
    (ConfidenceParams already rejects delta outside (0, 1)).
    """
    return BoundValue(_adaptive_epsilon_raw(params.delta, n), n)


def hoeffding_epsilon(delta: float, n: int) -> BoundValue:
    """Fixed-sample half-width sqrt(log(2/delta) / (2n)).

    Used only by fixed-budget baselines and tests; delta up to 2 is
    accepted (delta=2 gives a zero-width bound).
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if not 0.0 < delta <= 2.0:
        raise ValueError(f"delta must be in (0, 2], got {delta}")
    return BoundValue(math.sqrt(math.log(2.0 / delta) / (2.0 * n)), n)


def hypothesis_decision(mu_hat: float, epsilon: float, tau: float) -> TestVerdict:
    """Three-way decision for the stability probability against 1 - tau.

    Certifies when mu_hat + tau - epsilon - 1 >= 0 (the estimate clears
    1 - tau even after subtracting the error bound), rejects when
    mu_hat + tau + epsilon - 1 < 0, and stays undecided otherwise.  For
    epsilon > 0 the two regions are disjoint.
    """
    if not 0.0 <= mu_hat <= 1.0:
        raise ValueError(f"mu_hat must be in [0, 1], got {mu_hat}")
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    if mu_hat + tau - epsilon - 1.0 >= 0.0:
        return TestVerdict.CERTIFIED_HOLDS
    if mu_hat + tau + epsilon - 1.0 < 0.0:
        return TestVerdict.CERTIFIED_VIOLATED
    return TestVerdict.UNDECIDED


def agresti_coull_interval(
    successes: int, n: int, alpha: float
) -> tuple[float, float]:
    """Binomial confidence interval from inverting the large-sample test.

    Closed form with z = normal_quantile(1 - alpha/2):

        (p_hat + z^2/2n +- z*sqrt(p_hat(1-p_hat)/n + z^2/4n^2)) / (1 + z^2/n)

    Both endpoints are clamped to [0, 1].
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must be in [0, {n}], got {successes}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    z = normal_quantile(1.0 - alpha / 2.0)
    p_hat = successes / n
    center = p_hat + z * z / (2.0 * n)
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))
    denom = 1.0 + z * z / n
    lower = max(0.0, min(1.0, (center - half) / denom))
    upper = max(0.0, min(1.0, (center + half) / denom))
    return lower, upper


# Coefficients of the Acklam rational approximation to the inverse normal
# CDF, refined below by one Halley step to well past 1e-9 absolute error.
_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
_NQ_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF, accurate to better than 1e-9 absolute."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    # Reflect the upper half onto the lower: 1 - p is exact there, and the
    # erfc-based refinement keeps full relative precision only in the
    # lower tail, where its argument is positive.
    if p > 0.5:
        return -_normal_quantile_lower(1.0 - p)
    return _normal_quantile_lower(p)


def _normal_quantile_lower(p: float) -> float:
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    if p < _NQ_P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    # One Halley step against the exact CDF via erfc (x <= 0 here, so the
    # erfc argument is nonnegative and fully accurate).
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)
