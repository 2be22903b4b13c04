"""Recursive least squares with optional zero-point attraction.

``rls_step`` implements the classical exponentially weighted RLS
recursion; ``l0_rls_step`` adds a sparsity-promoting attraction term
derived from a smooth exponential surrogate of the l0 norm.  State is
explicit and every step is a pure function: same state and samples in,
same state out, so runs are reproducible and trivially parallel across
filter instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FilterParams",
    "FilterState",
    "StepOutput",
    "NumericalBreakdownError",
    "g_scalar",
    "g_vector",
    "l0_norm_approx",
    "l0_rls_cost",
    "init_state",
    "rls_step",
    "l0_rls_step",
]


class NumericalBreakdownError(RuntimeError):
    """Gain denominator ``forgetting + x'Px`` stopped being positive.

    Signals loss of positive definiteness of the inverse correlation
    matrix.  The run must abort; clamping would silently corrupt every
    statistic computed downstream.
    """

    def __init__(self, denominator, iteration=None, run_index=None):
        self.denominator = denominator
        self.iteration = iteration
        self.run_index = run_index
        msg = f"gain denominator {denominator!r} is not positive"
        if iteration is not None:
            msg += f" at iteration {iteration}"
        if run_index is not None:
            msg += f" in run {run_index}"
        super().__init__(msg)


@dataclass(frozen=True)
class FilterParams:
    """Tunables of the recursion.

    ``beta``, the weight of the attraction term, is always derived as
    ``gamma * (1 - forgetting)`` and never stored separately, so it can
    not drift out of sync with the values it is defined by.

    ``init_scale`` sets P(0) = init_scale * I.  A large value (about
    100 / input variance) makes early adaptation fast; tiny values
    freeze the filter for many samples.
    """

    num_taps: int
    forgetting: float = 0.995
    gamma: float = 1e-4
    alpha: float = 50.0
    init_scale: float = 100.0

    def __post_init__(self):
        if not (isinstance(self.num_taps, (int, np.integer)) and self.num_taps >= 1):
            raise ValueError(f"num_taps must be a positive integer, got {self.num_taps!r}")
        if not (np.isfinite(self.forgetting) and 0.0 < self.forgetting < 1.0):
            raise ValueError(f"forgetting must lie in (0, 1), got {self.forgetting!r}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError(f"gamma must be finite and nonnegative, got {self.gamma!r}")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be finite and positive, got {self.alpha!r}")
        if not (np.isfinite(self.init_scale) and self.init_scale > 0.0):
            raise ValueError(f"init_scale must be positive, got {self.init_scale!r}")

    @property
    def beta(self) -> float:
        return self.gamma * (1.0 - self.forgetting)

    @property
    def attraction_halfwidth(self) -> float:
        """Half-width 1/alpha of the interval where the attraction acts."""
        return 1.0 / self.alpha


@dataclass
class FilterState:
    """Live filter: weight vector, inverse correlation matrix, step count."""

    w: np.ndarray
    P: np.ndarray
    n: int = 0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.w.ndim != 1:
            raise ValueError("w must be a vector")
        if self.P.shape != (self.w.size, self.w.size):
            raise ValueError(f"P must be {self.w.size}x{self.w.size}, got {self.P.shape}")

    def validate(self, rtol: float = 1e-9) -> None:
        """Check finiteness and symmetry of P (relative, per entry)."""
        if not np.isfinite(self.w).all() or not np.isfinite(self.P).all():
            raise ValueError("state contains non-finite entries")
        scale = np.abs(self.P).max()
        if scale > 0 and np.abs(self.P - self.P.T).max() > rtol * scale:
            raise ValueError("P is not symmetric within tolerance")


@dataclass(frozen=True)
class StepOutput:
    """Per-step byproducts: a priori error, filter output, gain vector.

    ``output`` is the a priori output w(n-1)'x(n), so
    ``error == desired - output`` exactly.
    """

    error: float
    output: float
    gain: np.ndarray


def g_scalar(t: float, alpha: float) -> float:
    """Zero-point attraction kernel.

    Piecewise: alpha^2 t - alpha * sgn(t) for |t| <= 1/alpha, else 0.
    sgn(0) is taken as 0 so an exactly-zero weight receives no kick and
    stays a fixed point; both branches meet at |t| = 1/alpha.
    """
    if not (np.isfinite(t) and np.isfinite(alpha)):
        raise ValueError(f"non-finite argument: t={t!r}, alpha={alpha!r}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if abs(t) <= 1.0 / alpha:
        sgn = 1.0 if t > 0.0 else (-1.0 if t < 0.0 else 0.0)
        return alpha * alpha * t - alpha * sgn
    return 0.0


def _g_core(w: np.ndarray, alpha: float) -> np.ndarray:
    # both branches are evaluated everywhere; out-of-range values are discarded
    return np.where(np.abs(w) <= 1.0 / alpha,
                    alpha * alpha * w - alpha * np.sign(w), 0.0)


def g_vector(w: np.ndarray, alpha: float) -> np.ndarray:
    """Elementwise ``g_scalar`` over a weight vector."""
    w = np.asarray(w, dtype=float)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    if not np.isfinite(w).all():
        raise ValueError("weight vector contains non-finite entries")
    return _g_core(w, alpha)


def l0_norm_approx(w: np.ndarray, alpha: float) -> float:
    """Smooth l0 surrogate: sum_i (1 - exp(-alpha |w_i|)), in [0, N)."""
    w = np.asarray(w, dtype=float)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be finite and positive, got {alpha!r}")
    if not np.isfinite(w).all():
        raise ValueError("weight vector contains non-finite entries")
    return float(np.sum(1.0 - np.exp(-alpha * np.abs(w))))


def l0_rls_cost(errors_history, w, params: FilterParams, n: int) -> float:
    """Exponentially weighted squared-error sum plus the sparsity penalty.

    Diagnostic only; the recursions never evaluate it.  Requires the
    full error history e(0..n).
    """
    e = np.asarray(errors_history, dtype=float)
    if e.shape != (n + 1,):
        raise ValueError(f"errors_history must have {n + 1} entries, got shape {e.shape}")
    powers = params.forgetting ** np.arange(n, -1, -1, dtype=float)
    return float(powers @ (e * e)) + params.gamma * l0_norm_approx(w, params.alpha)


def init_state(params: FilterParams) -> FilterState:
    """Fresh state: zero weights, P(0) = init_scale * I."""
    n = params.num_taps
    return FilterState(w=np.zeros(n), P=params.init_scale * np.eye(n), n=0)


def rls_step(state: FilterState, x, d: float, params: FilterParams):
    """One exponentially weighted RLS update.

    With P = P(n-1), w = w(n-1) and forgetting factor lam:

        err  = d - w'x
        k    = P x / (lam + x'Px)
        P(n) = (P - k x'P) / lam        (then re-symmetrized)
        w(n) = w + k err

    P is re-symmetrized as (P + P') / 2 after the rank-1 update because
    the recursion drifts asymmetric in floating point.  Returns the new
    state and a :class:`StepOutput`; inputs are not modified.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != state.w.shape:
        raise ValueError(f"regressor has shape {x.shape}, expected {state.w.shape}")
    lam = params.forgetting
    P = state.P
    Px = P.dot(x)
    den = lam + x.dot(Px)
    if not den > 0.0:
        raise NumericalBreakdownError(float(den), iteration=state.n)
    k = Px / den
    y = state.w.dot(x)
    err = d - y
    rank1 = np.multiply(k[:, None], Px)   # k x'P, using the symmetry of P
    np.subtract(P, rank1, out=rank1)
    P_new = rank1 + rank1.T               # exactly symmetric
    P_new *= 0.5 / lam
    w_new = state.w + err * k
    return (FilterState(w=w_new, P=P_new, n=state.n + 1),
            StepOutput(error=float(err), output=float(y), gain=k))


def l0_rls_step(state: FilterState, x, d: float, params: FilterParams):
    """One zero-attracting RLS update.

    Gain, error and P(n) are those of :func:`rls_step`; the weight
    update gains the attraction term beta * P(n) g(w(n-1)), evaluated
    with the freshly updated P(n) and the pre-update weights.  With
    gamma = 0 the trajectory equals plain RLS exactly.
    """
    new_state, out = rls_step(state, x, d, params)
    beta = params.beta
    if beta != 0.0:
        attraction = new_state.P.dot(_g_core(state.w, params.alpha))
        attraction *= beta
        new_state.w += attraction   # w_new is freshly allocated by rls_step
    return new_state, out
