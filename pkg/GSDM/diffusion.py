"""
GSDM.diffusion - Forward diffusion machinery

Closed-form perturbation kernels, conditional scores, an Euler-Maruyama
forward simulator used as a cross-check, and the low-rank Gaussian process
``M_t = U0 diag(W_t) U0^T`` that spectral diffusion induces on adjacency
matrices, together with its closed-form covariance kernel.

All functions are pure given an externally supplied ``numpy.random.Generator``.

Example usage:
```python
import numpy as np
from GSDM.schedules import NoiseSchedule
from GSDM.diffusion import perturb, conditional_score

rng = np.random.default_rng(0)
schedule = NoiseSchedule()
x0 = np.ones(5)
x_t, eps = perturb(x0, 0.5, schedule, rng)
score = conditional_score(x_t, x0, 0.5, schedule)
```
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from GSDM.exceptions import PreconditionError
from GSDM.schedules import NoiseSchedule


@dataclass(frozen=True)
class DiffusionState:
    """
    A corrupted graph at diffusion time ``t``.

    Attributes:
        X_t (numpy.ndarray): Noisy node features, shape (n, d).
        Lambda_t (numpy.ndarray): Noisy eigenvalues, length n.
        t (float): Diffusion time in [0, 1].
    """

    X_t: np.ndarray
    Lambda_t: np.ndarray
    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise PreconditionError(f"Diffusion time must lie in [0, 1], got {self.t}")
        if np.ndim(self.Lambda_t) != 1 or np.shape(self.X_t)[0] != np.shape(self.Lambda_t)[0]:
            raise PreconditionError("Feature rows and eigenvalue count disagree")


@dataclass(frozen=True)
class KernelIndex:
    """Entry (i, j) at time s and entry (k, l) at time t of the adjacency noise process."""

    i: int
    j: int
    k: int
    l: int
    s: float
    t: float


def _time_covariance(s: float, t: float) -> float:
    """Covariance of standard Brownian motion at times s and t."""
    return min(s, t)


def perturb(
    x0: np.ndarray,
    t: float,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw ``x_t ~ p(x_t | x_0)`` in closed form.

    Args:
        x0 (numpy.ndarray): Clean signal of any shape.
        t (float): Diffusion time in [0, 1].
        schedule (NoiseSchedule): Noise schedule.
        rng (numpy.random.Generator): Source of the standard-normal draws.

    Returns:
        tuple: ``(x_t, eps)`` with ``x_t = mean_coef(t) * x0 + std(t) * eps``.

    Raises:
        PreconditionError: If ``t`` lies outside [0, T] or ``x0`` is not finite.
    """
    if not 0.0 <= t <= schedule.T:
        raise PreconditionError(f"Diffusion time must lie in [0, {schedule.T}], got {t}")
    x0 = np.asarray(x0, dtype=np.float64)
    if not np.all(np.isfinite(x0)):
        raise PreconditionError("perturb needs a finite clean signal")
    stats = schedule.marginal(t)
    eps = rng.standard_normal(x0.shape)
    return stats.mean_coef * x0 + stats.std * eps, eps


def conditional_score(x_t: np.ndarray, x0: np.ndarray, t: float, schedule: NoiseSchedule) -> np.ndarray:
    """
    Score of the perturbation kernel, ``-(x_t - mean_coef * x0) / std**2``.

    Raises:
        PreconditionError: At t = 0 (the kernel is a point mass) or on shape mismatch.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x_t.shape != x0.shape:
        raise PreconditionError(f"Shape mismatch: {x_t.shape} vs {x0.shape}")
    stats = schedule.marginal(t)
    if stats.std <= 0.0:
        raise PreconditionError("The conditional score is undefined at t = 0")
    return -(x_t - stats.mean_coef * x0) / stats.std ** 2


def simulate_forward_em(
    x0: np.ndarray,
    schedule: NoiseSchedule,
    n_steps: int,
    rng: np.random.Generator,
    t_end: float = 1.0,
    stochastic: bool = True,
) -> np.ndarray:
    """
    Euler-Maruyama integration of ``dx = f(x, t) dt + g(t) dW`` from 0 to ``t_end``.

    ``x0`` may hold many independent trajectories; each entry receives its own
    Brownian increments.

    Args:
        x0 (numpy.ndarray): Initial state(s).
        schedule (NoiseSchedule): Noise schedule (drift -beta/2 * x for VP, 0 for VE).
        n_steps (int): Number of equal steps.
        rng (numpy.random.Generator): Source of the increments.
        t_end (float, optional): Final time. Default 1.0.
        stochastic (bool, optional): Drop the noise term when False. Default True.

    Returns:
        numpy.ndarray: State at ``t_end``.
    """
    if n_steps < 1:
        raise PreconditionError(f"n_steps must be >= 1, got {n_steps}")
    if not 0.0 < t_end <= 1.0:
        raise PreconditionError(f"t_end must lie in (0, 1], got {t_end}")
    x = np.array(x0, dtype=np.float64)
    dt = t_end / n_steps
    if stochastic and schedule.kind == "ve":
        # VE marginals start at sigma_min just after t = 0.
        x = x + schedule.sigma_min * rng.standard_normal(x.shape)
    for step in range(n_steps):
        t = step * dt
        x = x + schedule.drift_coef(t) * x * dt
        if stochastic:
            # VE g(t) diverges at t = 0 for some families; evaluate at the step midpoint.
            g_sq = schedule.diffusion_sq(t if schedule.kind == "vp" else t + dt / 2)
            x = x + np.sqrt(g_sq * dt) * rng.standard_normal(x.shape)
    return x


def covariance_kernel(U0: np.ndarray, idx: KernelIndex) -> float:
    """
    Closed-form covariance ``Cov(M_s[i, j], M_t[k, l])`` of the adjacency noise process.

    Equals ``min(s, t) * sum_h U0[i,h] U0[j,h] U0[k,h] U0[l,h]``.

    Raises:
        PreconditionError: If ``U0`` is not orthonormal within 1e-8, an index is
            out of range or a time is negative.
    """
    U0 = _check_orthonormal(U0)
    n = U0.shape[0]
    for name in ("i", "j", "k", "l"):
        value = getattr(idx, name)
        if not 0 <= value < n:
            raise PreconditionError(f"Index {name}={value} out of range for n={n}")
    if idx.s < 0 or idx.t < 0:
        raise PreconditionError("Kernel times must be non-negative")
    weights = U0[idx.i] * U0[idx.j] * U0[idx.k] * U0[idx.l]
    return float(_time_covariance(idx.s, idx.t) * np.sum(weights))


def sample_M(U0: np.ndarray, t: float, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """
    Draw ``M_t = U0 diag(g) U0^T`` with ``g ~ N(0, t I)``.

    Args:
        U0 (numpy.ndarray): Orthonormal (n, n) eigenvector matrix.
        t (float): Non-negative time.
        rng (numpy.random.Generator): Source of ``g``.
        size (int, optional): Number of independent draws; returns shape
            (size, n, n) when given, (n, n) otherwise.

    Returns:
        numpy.ndarray: Symmetric sample(s).
    """
    U0 = _check_orthonormal(U0)
    if t < 0:
        raise PreconditionError(f"t must be non-negative, got {t}")
    n = U0.shape[0]
    shape = (n,) if size is None else (size, n)
    g = np.sqrt(t) * rng.standard_normal(shape)
    M = np.einsum("ih,...h,jh->...ij", U0, g, U0)
    return (M + np.swapaxes(M, -1, -2)) / 2.0


def project_to_eigenbasis(M: np.ndarray, U0: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a symmetric matrix onto {U0 D U0^T : D diagonal}."""
    diag = np.einsum("ih,ij,jh->h", U0, M, U0)
    return (U0 * diag) @ U0.T


def _check_orthonormal(U0: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    U0 = np.asarray(U0, dtype=np.float64)
    if U0.ndim != 2 or U0.shape[0] != U0.shape[1]:
        raise PreconditionError(f"Eigenvector matrix must be square, got shape {U0.shape}")
    if np.max(np.abs(U0.T @ U0 - np.eye(U0.shape[0]))) > tol:
        raise PreconditionError(f"Eigenvector matrix is not orthonormal within {tol:g}")
    return U0
