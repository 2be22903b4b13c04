"""Closed-form steady-state behavior of the zero-attracting RLS filter.

For a white zero-mean input and a forgetting factor close to one, the
steady-state per-tap mean deviations and the mean square deviation
(MSD) of the filter have closed forms that depend on how each true tap
relates to the attraction range (-1/alpha, 1/alpha): exactly zero taps,
small taps inside the range, large taps outside.  This module evaluates
those predictions; nothing here runs a simulation.

Numerics: 1 - lambda_prime^2 is a catastrophic-cancellation hazard when
the forgetting factor approaches 1, so it is always computed through
its algebraic expansion in (1 - forgetting) rather than by squaring and
subtracting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterParams, g_scalar, g_vector

__all__ = [
    "SignalModel",
    "TapPartition",
    "TheoryPrediction",
    "PriceMoments",
    "InstabilityError",
    "classify_taps",
    "mean_deviation_limit",
    "zero_tap_mean_bound",
    "lambda_prime",
    "one_minus_lambda_prime_sq",
    "beta_prime",
    "is_stable",
    "msd_large",
    "msd_small",
    "msd_zero",
    "msd_total",
    "price_moments",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class InstabilityError(RuntimeError):
    """The steady-state formulas degenerate: beta*alpha^2 >= sigma_x^2.

    Under 0 < forgetting < 1 this is exactly the condition
    lambda_prime >= 1, so both the mean and mean-square limits are
    undefined.  Carries the offending quantity instead of yielding NaN.
    """

    def __init__(self, quantity: str, value: float):
        self.quantity = quantity
        self.value = value
        super().__init__(f"unstable parameters: {quantity} = {value!r}")


@dataclass(frozen=True)
class SignalModel:
    """White input and independent observation noise, by their variances."""

    input_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.input_variance) and self.input_variance > 0.0):
            raise ValueError(f"input_variance must be positive, got {self.input_variance!r}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0.0):
            raise ValueError(f"noise_variance must be nonnegative, got {self.noise_variance!r}")


@dataclass
class TapPartition:
    """Index sets of exactly-zero, small and large true taps."""

    zero: np.ndarray
    small: np.ndarray
    large: np.ndarray

    def __post_init__(self):
        self.zero = np.asarray(self.zero, dtype=int)
        self.small = np.asarray(self.small, dtype=int)
        self.large = np.asarray(self.large, dtype=int)

    @property
    def n_taps(self) -> int:
        return self.zero.size + self.small.size + self.large.size

    def labels(self) -> np.ndarray:
        """Length-N array of 'zero' / 'small' / 'large' per tap index."""
        out = np.empty(self.n_taps, dtype=object)
        out[self.zero] = "zero"
        out[self.small] = "small"
        out[self.large] = "large"
        return out

    def same_as(self, other: "TapPartition") -> bool:
        return (np.array_equal(self.zero, other.zero)
                and np.array_equal(self.small, other.small)
                and np.array_equal(self.large, other.large))


@dataclass(frozen=True)
class PriceMoments:
    """Gaussian moments of the attraction kernel: E[w g(w)] and E[g^2(w)]."""

    cross_moment: float
    square_moment: float


@dataclass
class TheoryPrediction:
    """Every closed-form steady-state quantity, plus the intermediates."""

    mean_dev: np.ndarray
    zero_tap_mean_bound: float
    lambda_prime: float
    beta_prime: float
    g_s: float
    b_omega: float
    c_omega: float
    omega: float
    d_large: float
    d_small: float
    d_zero: float
    d_total: float
    stable: bool
    partition: TapPartition = field(repr=False, default=None)


def classify_taps(w0, alpha: float) -> TapPartition:
    """Partition tap indices by |w0_k| against the attraction range.

    Exactly-zero taps go to ``zero``; 0 < |w0_k| < 1/alpha to ``small``;
    |w0_k| >= 1/alpha to ``large`` (boundary ties to large, where the
    attraction vanishes on both branch limits).
    """
    w0 = np.asarray(w0, dtype=float)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    if not np.isfinite(w0).all():
        raise ValueError("w0 contains non-finite entries")
    mag = np.abs(w0)
    radius = 1.0 / alpha
    zero = np.flatnonzero(w0 == 0.0)
    large = np.flatnonzero(mag >= radius)
    small = np.flatnonzero((mag > 0.0) & (mag < radius))
    return TapPartition(zero=zero, small=small, large=large)


def is_stable(params: FilterParams, model: SignalModel) -> bool:
    """True iff beta*alpha^2 < sigma_x^2, equivalently lambda_prime < 1."""
    return params.beta * params.alpha ** 2 < model.input_variance


def _require_stable(params: FilterParams, model: SignalModel) -> None:
    ratio = params.beta * params.alpha ** 2 / model.input_variance
    if not ratio < 1.0:
        raise InstabilityError("beta*alpha^2/sigma_x^2", ratio)


def lambda_prime(params: FilterParams, model: SignalModel) -> float:
    """Contraction factor of the per-tap second-moment recursion.

    sqrt(lam^2 + 2 beta lam (1-lam) alpha^2 / sx2
         + beta^2 (1-lam)^2 alpha^4 / sx2^2);
    the radicand is the perfect square of lam + beta (1-lam) alpha^2/sx2.
    """
    lam = params.forgetting
    beta = params.beta
    if beta == 0.0:
        return lam
    a2s = params.alpha ** 2 / model.input_variance
    return math.sqrt(lam * lam
                     + 2.0 * beta * lam * (1.0 - lam) * a2s
                     + beta * beta * (1.0 - lam) ** 2 * a2s * a2s)


def one_minus_lambda_prime_sq(params: FilterParams, model: SignalModel) -> float:
    """1 - lambda_prime^2 without subtracting near-equal quantities.

    Expanded as (1-lam) * ((1+lam) - 2 lam c - (1-lam) c^2) with
    c = beta alpha^2 / sx2; exact in the reals and stable as lam -> 1.
    """
    lam = params.forgetting
    c = params.beta * params.alpha ** 2 / model.input_variance
    return (1.0 - lam) * ((1.0 + lam) - 2.0 * lam * c - (1.0 - lam) * c * c)


def beta_prime(params: FilterParams, model: SignalModel) -> float:
    """Coefficient of the small-tap attraction-energy term in the MSD."""
    _require_stable(params, model)
    lam = params.forgetting
    beta = params.beta
    sx2 = model.input_variance
    a2 = params.alpha ** 2
    gap = sx2 - beta * a2
    return (2.0 * beta ** 2 * lam * (1.0 - lam) / (sx2 * gap)
            + beta ** 2 * (1.0 - lam) ** 2 / sx2 ** 2
            + 2.0 * beta ** 3 * (1.0 - lam) ** 2 * a2 / (sx2 ** 2 * gap))


def zero_tap_mean_bound(params: FilterParams, model: SignalModel) -> float:
    """Upper bound alpha*beta/(sx2 - beta*alpha^2) on |E[w_k]| at zero taps."""
    _require_stable(params, model)
    return (params.alpha * params.beta
            / (model.input_variance - params.beta * params.alpha ** 2))


def mean_deviation_limit(w0, partition: TapPartition, params: FilterParams,
                         model: SignalModel, sgn_estimate=None) -> np.ndarray:
    """Limiting per-tap mean deviation E[w_k(n) - w0_k].

    Large taps converge unbiased (0).  Small taps settle at
    beta/(sx2 - beta*alpha^2) * g(w0_k).  Zero taps settle at
    alpha*beta/(beta*alpha^2 - sx2) * lim E[sgn(w_k(n))]; that limiting
    sign average has no closed form, so callers supply ``sgn_estimate``
    (entries in [-1, 1], used only at zero taps; default 0, which is
    accurate because the zero-tap distribution is symmetric).
    """
    w0 = np.asarray(w0, dtype=float)
    _require_stable(params, model)
    n = w0.size
    if sgn_estimate is None:
        sgn_estimate = np.zeros(n)
    sgn_estimate = np.asarray(sgn_estimate, dtype=float)
    if sgn_estimate.shape != (n,):
        raise ValueError(f"sgn_estimate must have shape ({n},)")
    if np.any(np.abs(sgn_estimate) > 1.0) or not np.isfinite(sgn_estimate).all():
        raise ValueError("sgn_estimate entries must lie in [-1, 1]")
    beta = params.beta
    gap = model.input_variance - beta * params.alpha ** 2
    out = np.zeros(n)
    if partition.small.size:
        out[partition.small] = (beta / gap) * g_vector(w0[partition.small], params.alpha)
    if partition.zero.size:
        # + 0.0 normalizes -0.0 when the sign estimate is zero
        out[partition.zero] = (params.alpha * beta / -gap) * sgn_estimate[partition.zero] + 0.0
    return out


def msd_large(partition: TapPartition, params: FilterParams,
              model: SignalModel) -> float:
    """Steady-state deviation power summed over large taps.

    |Z_L| (1-lam) sv2 / ((1+lam) sx2): the classical RLS per-tap value,
    because the attraction never acts outside its range.
    """
    lam = params.forgetting
    return (partition.large.size * (1.0 - lam) * model.noise_variance
            / ((1.0 + lam) * model.input_variance))


def msd_small(w0, partition: TapPartition, params: FilterParams,
              model: SignalModel) -> float:
    """Steady-state deviation power summed over small taps."""
    w0 = np.asarray(w0, dtype=float)
    _require_stable(params, model)
    lam = params.forgetting
    lp2 = one_minus_lambda_prime_sq(params, model)
    noise_term = (partition.small.size * (1.0 - lam) ** 2 * model.noise_variance
                  / (lp2 * model.input_variance))
    g_sum = float(np.sum(g_vector(w0[partition.small], params.alpha) ** 2))
    return noise_term + beta_prime(params, model) * g_sum / lp2


def msd_zero(partition: TapPartition, params: FilterParams,
             model: SignalModel) -> tuple[float, float]:
    """Steady-state deviation power over zero taps, and its per-tap rms.

    The per-tap second moment omega^2 solves
    omega^2 + b_omega * omega + c_omega = 0, whose unique nonnegative
    root is taken (b_omega >= 0 and c_omega <= 0 always hold here).
    Returns (|Z_0| * omega^2, omega).
    """
    _require_stable(params, model)
    b, c = _omega_coefficients(params, model)
    omega = _nonnegative_root(b, c)
    return partition.zero.size * omega * omega, omega


def _omega_coefficients(params: FilterParams, model: SignalModel) -> tuple[float, float]:
    lam = params.forgetting
    beta = params.beta
    sx2 = model.input_variance
    a = params.alpha
    lp2 = one_minus_lambda_prime_sq(params, model)
    b = (4.0 * a * beta * (1.0 - lam) / (math.sqrt(2.0 * math.pi) * lp2 * sx2)
         * (lam + a * a * beta * (1.0 - lam) / sx2))
    c = -((1.0 - lam) ** 2 / lp2) * (a * a * beta * beta / sx2 ** 2
                                     + model.noise_variance / sx2)
    return b, c


def _nonnegative_root(b: float, c: float) -> float:
    # root (-b + sqrt(b^2 - 4c)) / 2 in the cancellation-free form;
    # b >= 0 and c <= 0 make the radicand and the root nonnegative
    den = b + math.sqrt(b * b - 4.0 * c)
    if den == 0.0:
        return 0.0
    return -2.0 * c / den


def msd_total(w0, params: FilterParams, model: SignalModel,
              sgn_estimate=None) -> TheoryPrediction:
    """Assemble the full steady-state prediction for a true system."""
    w0 = np.asarray(w0, dtype=float)
    if w0.size != params.num_taps:
        raise ValueError(f"w0 has {w0.size} taps, params expect {params.num_taps}")
    _require_stable(params, model)
    partition = classify_taps(w0, params.alpha)
    d_large = msd_large(partition, params, model)
    d_small = msd_small(w0, partition, params, model)
    d_zero, omega = msd_zero(partition, params, model)
    b, c = _omega_coefficients(params, model)
    g_sum = float(np.sum(g_vector(w0[partition.small], params.alpha) ** 2))
    return TheoryPrediction(
        mean_dev=mean_deviation_limit(w0, partition, params, model, sgn_estimate),
        zero_tap_mean_bound=zero_tap_mean_bound(params, model),
        lambda_prime=lambda_prime(params, model),
        beta_prime=beta_prime(params, model),
        g_s=g_sum,
        b_omega=b,
        c_omega=c,
        omega=omega,
        d_large=d_large,
        d_small=d_small,
        d_zero=d_zero,
        d_total=d_large + d_small + d_zero,
        stable=True,
        partition=partition,
    )


def price_moments(second_moment: float, alpha: float) -> PriceMoments:
    """Closed-form E[w g(w)] and E[g^2(w)] for zero-mean Gaussian w.

    With m2 = E[w^2]:

        E[w g(w)]  = alpha^2 m2 - sqrt(2/pi) alpha sqrt(m2)
        E[g^2(w)]  = alpha^4 m2 + alpha^2 - 2 sqrt(2/pi) alpha^3 sqrt(m2)

    These treat g as alpha^2 w - alpha sgn(w) on the whole line; the
    truncation of g outside (-1/alpha, 1/alpha) is ignored, which is
    accurate while sqrt(m2) stays well inside the attraction range.
    """
    if not np.isfinite(second_moment) or second_moment < 0.0:
        raise ValueError(f"second_moment must be nonnegative, got {second_moment!r}")
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    s = math.sqrt(second_moment)
    cross = alpha ** 2 * second_moment - SQRT_2_OVER_PI * alpha * s
    square = (alpha ** 4 * second_moment + alpha ** 2
              - 2.0 * SQRT_2_OVER_PI * alpha ** 3 * s)
    return PriceMoments(cross_moment=cross, square_moment=square)
