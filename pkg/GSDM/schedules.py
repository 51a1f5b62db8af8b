"""
GSDM.schedules - Noise schedules for VP and VE diffusion

A ``NoiseSchedule`` is an immutable description of the diffusion coefficient
along t in [0, 1]. Six families share their endpoints so that every family of
a given kind starts and ends at the same signal-to-noise ratio:

- VP: beta(t) = beta_min + amplitude * ramp(t), with ramp(0) = 0, ramp(1) = 1 and
  the amplitude chosen so that the integral of beta over [0, 1] equals
  ``b_total`` (10.05 by default, the linear schedule with beta_max = 20).
- VE: sigma(t) = sigma_min * (sigma_max / sigma_min) ** c(t) for t > 0, with a
  strictly increasing family ramp c(0) = 0, c(1) = 1.

Example usage:
```python
from GSDM.schedules import NoiseSchedule, marginal, snr

schedule = NoiseSchedule(kind="vp", family="cosine")
stats = marginal(schedule, 0.5)
print(stats.mean_coef, stats.std, snr(schedule, 1.0))
```
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from GSDM.exceptions import PreconditionError

FAMILIES = ("linear", "quadratic", "sqrt", "cosine", "sigmoid", "two_level")
KINDS = ("vp", "ve")

# Steepness of the sigmoid family.
SIGMOID_K = 10.0

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class MarginalStats:
    """
    Coefficients of a Gaussian transition ``x_t = mean_coef * x_0 + std * eps``.

    Attributes:
        mean_coef (float or numpy.ndarray): Multiplier on the clean signal.
        std (float or numpy.ndarray): Standard deviation of the added noise.
    """

    mean_coef: ArrayLike
    std: ArrayLike


def _sigmoid_ramp(t):
    lo, hi = expit(-SIGMOID_K / 2), expit(SIGMOID_K / 2)
    return (expit(SIGMOID_K * (t - 0.5)) - lo) / (hi - lo)


def _sigmoid_ramp_integral(t):
    lo, hi = expit(-SIGMOID_K / 2), expit(SIGMOID_K / 2)
    softplus = (np.logaddexp(0.0, SIGMOID_K * (t - 0.5)) - np.logaddexp(0.0, -SIGMOID_K / 2)) / SIGMOID_K
    return (softplus - lo * t) / (hi - lo)


def _sigmoid_ramp_slope(t):
    lo, hi = expit(-SIGMOID_K / 2), expit(SIGMOID_K / 2)
    s = expit(SIGMOID_K * (t - 0.5))
    return SIGMOID_K * s * (1.0 - s) / (hi - lo)


# family -> (ramp r(t), integral of r over [0, t])
_VP_RAMPS = {
    "linear": (lambda t: t, lambda t: t * t / 2.0),
    "quadratic": (lambda t: t * t, lambda t: t ** 3 / 3.0),
    "sqrt": (np.sqrt, lambda t: 2.0 * t ** 1.5 / 3.0),
    "cosine": (lambda t: (1.0 - np.cos(np.pi * t)) / 2.0, lambda t: (t - np.sin(np.pi * t) / np.pi) / 2.0),
    "sigmoid": (_sigmoid_ramp, _sigmoid_ramp_integral),
    "two_level": (lambda t: (t >= 0.5).astype(np.float64), lambda t: np.maximum(t - 0.5, 0.0)),
}

# family -> (c(t), dc/dt); two_level grows log-sigma at two constant rates (1:3).
_VE_RAMPS = {
    "linear": (lambda t: t, lambda t: np.ones_like(t)),
    "quadratic": (lambda t: t * t, lambda t: 2.0 * t),
    "sqrt": (np.sqrt, lambda t: 0.5 / np.sqrt(np.maximum(t, 1e-300))),
    "cosine": (lambda t: (1.0 - np.cos(np.pi * t)) / 2.0, lambda t: np.pi * np.sin(np.pi * t) / 2.0),
    "sigmoid": (_sigmoid_ramp, _sigmoid_ramp_slope),
    "two_level": (
        lambda t: np.where(t < 0.5, 0.5 * t, 0.25 + 1.5 * (t - 0.5)),
        lambda t: np.where(t < 0.5, 0.5, 1.5),
    ),
}


def _as_time(t, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < low) or np.any(arr > high):
        raise PreconditionError(f"Time must lie in [{low}, {high}], got {t}")
    return arr


def _out(value: np.ndarray, like) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Time-indexed diffusion coefficient with closed-form integrals.

    Attributes:
        kind (str): "vp" (variance preserving) or "ve" (variance exploding).
        family (str): One of ``FAMILIES``.
        beta_min (float): VP coefficient at t = 0. Default 0.1.
        beta_max (float): VP linear-family coefficient at t = 1; sets the default
            ``b_total``. Default 20.0.
        b_total (float, optional): Integral of beta over [0, 1]. Defaults to
            ``beta_min + (beta_max - beta_min) / 2``.
        sigma_min (float): VE noise scale just after t = 0. Default 0.1.
        sigma_max (float): VE noise scale at t = 1 before dataset scaling. Default 10.0.
        scale (float): Per-dataset divisor applied to ``sigma_max``. Default 1.0.
    """

    kind: str = "vp"
    family: str = "linear"
    beta_min: float = 0.1
    beta_max: float = 20.0
    b_total: Optional[float] = None
    sigma_min: float = 0.1
    sigma_max: float = 10.0
    scale: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"Unknown schedule kind: {self.kind}")
        if self.family not in FAMILIES:
            raise PreconditionError(f"Unknown schedule family: {self.family}")
        if self.beta_min < 0 or self.total < self.beta_min:
            raise PreconditionError("VP schedule needs 0 <= beta_min <= b_total")
        if self.kind == "ve" and not 0 < self.sigma_min < self.sigma_top:
            raise PreconditionError("VE schedule needs 0 < sigma_min < sigma_max / scale")

    @property
    def total(self) -> float:
        """Integral of beta over [0, 1]."""
        if self.b_total is not None:
            return float(self.b_total)
        return self.beta_min + (self.beta_max - self.beta_min) / 2.0

    @property
    def sigma_top(self) -> float:
        return self.sigma_max / self.scale

    @property
    def amplitude(self) -> float:
        _, ramp_integral = _VP_RAMPS[self.family]
        return (self.total - self.beta_min) / float(ramp_integral(np.float64(1.0)))

    @property
    def prior_std(self) -> float:
        """Standard deviation of the terminal (prior) distribution."""
        return 1.0 if self.kind == "vp" else self.sigma_top

    # --- VP coefficients ---

    def beta(self, t: ArrayLike) -> ArrayLike:
        """beta(t) for a VP schedule."""
        if self.kind != "vp":
            raise PreconditionError("beta(t) is only defined for VP schedules")
        arr = _as_time(t)
        ramp, _ = _VP_RAMPS[self.family]
        return _out(self.beta_min + self.amplitude * ramp(arr), t)

    def integral_beta(self, t0: ArrayLike, t1: ArrayLike) -> ArrayLike:
        """Closed-form integral of beta over [t0, t1]."""
        if self.kind != "vp":
            raise PreconditionError("integral_beta is only defined for VP schedules")
        a, b = _as_time(t0), _as_time(t1)
        if np.any(a > b):
            raise PreconditionError(f"integral_beta needs t0 <= t1, got {t0} > {t1}")
        _, ramp_integral = _VP_RAMPS[self.family]
        value = self.beta_min * (b - a) + self.amplitude * (ramp_integral(b) - ramp_integral(a))
        return _out(np.maximum(value, 0.0), a + b)

    # --- VE coefficients ---

    def sigma(self, t: ArrayLike) -> ArrayLike:
        """sigma(t) for a VE schedule (sigma_min at t -> 0+, sigma_max/scale at t = 1)."""
        if self.kind != "ve":
            raise PreconditionError("sigma(t) is only defined for VE schedules")
        arr = _as_time(t)
        ramp, _ = _VE_RAMPS[self.family]
        return _out(self.sigma_min * (self.sigma_top / self.sigma_min) ** ramp(arr), t)

    # --- shared views ---

    def marginal(self, t: ArrayLike) -> MarginalStats:
        """Coefficients of p(x_t | x_0)."""
        arr = _as_time(t)
        if self.kind == "vp":
            integral = self.integral_beta(np.zeros_like(arr), arr)
            mean_coef = np.exp(-0.5 * integral)
            std = np.sqrt(-np.expm1(-integral))
        else:
            mean_coef = np.ones_like(arr)
            std = np.where(arr > 0.0, self.sigma(arr), 0.0)
        return MarginalStats(mean_coef=_out(mean_coef, t), std=_out(std, t))

    def transition(self, s: ArrayLike, t: ArrayLike) -> MarginalStats:
        """Coefficients of the forward transition p(x_t | x_s) for s <= t."""
        a, b = _as_time(s), _as_time(t)
        if np.any(a > b):
            raise PreconditionError(f"transition needs s <= t, got {s} > {t}")
        if self.kind == "vp":
            integral = self.integral_beta(a, b)
            mean_coef = np.exp(-0.5 * integral)
            std = np.sqrt(-np.expm1(-integral))
        else:
            var_a = np.where(a > 0.0, self.sigma(a), 0.0) ** 2
            var_b = np.where(b > 0.0, self.sigma(b), 0.0) ** 2
            mean_coef = np.ones_like(b)
            std = np.sqrt(np.maximum(var_b - var_a, 0.0))
        like = a + b
        return MarginalStats(mean_coef=_out(mean_coef, like), std=_out(std, like))

    def snr(self, t: ArrayLike) -> ArrayLike:
        """Signal-to-noise ratio mean_coef**2 / std**2 (+inf at t = 0)."""
        stats = self.marginal(t)
        mean_coef = np.asarray(stats.mean_coef)
        var = np.asarray(stats.std) ** 2
        with np.errstate(divide="ignore"):
            value = np.where(var > 0.0, mean_coef ** 2 / np.where(var > 0.0, var, 1.0), np.inf)
        return _out(value, t)

    def drift_coef(self, t: ArrayLike) -> ArrayLike:
        """Linear drift coefficient f(x, t) = drift_coef(t) * x (VP: -beta/2, VE: 0)."""
        arr = _as_time(t)
        if self.kind == "vp":
            return _out(-0.5 * np.asarray(self.beta(arr)), t)
        return _out(np.zeros_like(arr), t)

    def diffusion_sq(self, t: ArrayLike) -> ArrayLike:
        """Squared diffusion coefficient g(t)**2 (VP: beta, VE: d sigma**2 / dt)."""
        arr = _as_time(t)
        if self.kind == "vp":
            return _out(np.asarray(self.beta(arr)), t)
        _, slope = _VE_RAMPS[self.family]
        sigma = np.asarray(self.sigma(arr))
        return _out(2.0 * sigma ** 2 * math.log(self.sigma_top / self.sigma_min) * slope(arr), t)

    def reverse_step(self, t: float, dt: float) -> Tuple[float, float, float]:
        """
        Coefficients (a, b, c) of one reverse-diffusion predictor step from t to t - dt:
        ``x <- a * x + b * score + c * z``.

        VP uses the integrated per-step noise ``beta_d = 1 - exp(-int_{t-dt}^{t} beta)``,
        giving ``(2 - sqrt(1 - beta_d), beta_d, sqrt(beta_d))``. VE uses the variance
        increment ``d = sigma(t)^2 - sigma(t - dt)^2``, giving ``(1, d, sqrt(d))``.
        """
        start = max(t - dt, 0.0)
        if self.kind == "vp":
            beta_d = -math.expm1(-float(self.integral_beta(start, t)))
            return 2.0 - math.sqrt(1.0 - beta_d), beta_d, math.sqrt(beta_d)
        increment = float(self.transition(start, t).std) ** 2
        return 1.0, increment, math.sqrt(increment)


# --- module-level operations ---

def beta(schedule: NoiseSchedule, t: ArrayLike) -> ArrayLike:
    """beta(t) of a VP schedule; raises PreconditionError outside [0, 1]."""
    return schedule.beta(t)


def integral_beta(schedule: NoiseSchedule, t0: ArrayLike, t1: ArrayLike) -> ArrayLike:
    """Closed-form integral of beta over [t0, t1]; raises PreconditionError when t0 > t1."""
    return schedule.integral_beta(t0, t1)


def marginal(schedule: NoiseSchedule, t: ArrayLike) -> MarginalStats:
    """Marginal coefficients of p(x_t | x_0)."""
    return schedule.marginal(t)


def snr(schedule: NoiseSchedule, t: ArrayLike) -> ArrayLike:
    """Signal-to-noise ratio at time t."""
    return schedule.snr(t)


def transition(schedule: NoiseSchedule, s: ArrayLike, t: ArrayLike) -> MarginalStats:
    """Forward transition coefficients of p(x_t | x_s)."""
    return schedule.transition(s, t)
