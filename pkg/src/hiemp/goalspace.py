"""Uniform-box goal distributions and the fixed-variance Gaussian density.

The goal-space policy emits, for each goal dimension, a center and the log
of a half-width. Goals are drawn by the location-scale map
z_i = center_i + eps_i * exp(log_halfwidth_i) with eps uniform on [-1, 1].
Everything here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Raw log-half-width outputs are clamped here before exponentiation, which
# bounds half-widths to [e^-10, e^10] without a separate floor.
RAW_LOGW_MIN = -10.0
RAW_LOGW_MAX = 10.0

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class BoxParams:
    """Per-dimension center and log half-width of a uniform goal box."""

    center: np.ndarray
    log_halfwidth: np.ndarray

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def halfwidth(self) -> np.ndarray:
        return np.exp(self.log_halfwidth)

    def volume(self) -> float:
        return float(np.prod(2.0 * self.halfwidth))


def box_from_raw(raw) -> BoxParams:
    """Interpret a raw length-2d policy output as (centers, log half-widths)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.shape[0] % 2 != 0:
        raise ValueError(f"raw goal-space output must be a flat 2d vector, got {raw.shape}")
    d = raw.shape[0] // 2
    logw = np.clip(raw[d:], RAW_LOGW_MIN, RAW_LOGW_MAX)
    return BoxParams(raw[:d].copy(), logw)


def sample_eps(rng: np.random.Generator, d: int) -> np.ndarray:
    """Draw the exogenous noise vector, i.i.d. uniform on [-1, 1]^d."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return rng.uniform(-1.0, 1.0, size=d)


def reparam(eps, box: BoxParams) -> np.ndarray:
    """Location-scale transform of eps into a goal offset inside the box."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != box.center.shape:
        raise ValueError(f"eps shape {eps.shape} != box dim {box.center.shape}")
    return box.center + eps * box.halfwidth


def neg_log_prob(box: BoxParams) -> float:
    """-log density of the uniform box; equals its differential entropy.

    The density is constant on the support, so the value is independent of
    where it is evaluated: sum_i (log 2 + log_halfwidth_i).
    """
    return float(np.sum(np.log(2.0) + box.log_halfwidth))


def var_logpdf(target, achieved, sigma0: float) -> float:
    """Isotropic Gaussian log-density of `target` under mean `achieved`, std sigma0."""
    if sigma0 <= 0.0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    target = np.asarray(target, dtype=np.float64)
    achieved = np.asarray(achieved, dtype=np.float64)
    if target.shape != achieved.shape:
        raise ValueError(f"shape mismatch {target.shape} vs {achieved.shape}")
    d = target.shape[0]
    sq = float(np.sum((target - achieved) ** 2))
    return -d * (np.log(sigma0) + _HALF_LOG_2PI) - sq / (2.0 * sigma0 * sigma0)


def gaussian_peak(d: int, sigma0: float) -> float:
    """Maximum attainable var_logpdf value for dimension d."""
    if sigma0 <= 0.0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    return -d * (np.log(sigma0) + _HALF_LOG_2PI)
