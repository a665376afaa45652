"""Soft thresholding, l1-ball projection and the threshold/radius bridge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractViolation


@dataclass(frozen=True)
class ThresholdRadiusPair:
    threshold: float
    radius: float
    source_vector_l1: float


def soft_threshold(a, alpha):
    """Componentwise shrinkage ``sign(a) * max(|a| - alpha, 0)``."""
    if alpha < 0:
        raise ContractViolation("threshold must be nonnegative")
    a = np.asarray(a, dtype=np.float64)
    if alpha == 0:
        return a.copy()
    return np.sign(a) * np.maximum(np.abs(a) - alpha, 0.0)


def threshold_l1_norm(a, alpha):
    """``||S_alpha(a)||_1`` without forming the thresholded vector."""
    if alpha < 0:
        raise ContractViolation("threshold must be nonnegative")
    return float(np.maximum(np.abs(np.asarray(a, dtype=np.float64)) - alpha, 0.0).sum())


def find_threshold_for_radius(a, R) -> ThresholdRadiusPair:
    """Exact threshold ``alpha`` with ``||S_alpha(a)||_1 = R``.

    Sort ``|a|`` in decreasing order ``u_1 >= u_2 >= ...``. On the segment
    where exactly ``k`` entries survive, ``||S_alpha(a)||_1 = c_k - k*alpha``
    with ``c_k`` the k-th cumulative sum. The active ``k`` is the largest one
    with ``u_k > (c_k - R)/k``.
    """
    if not R > 0:
        raise ContractViolation("radius must be positive")
    absa = np.abs(np.asarray(a, dtype=np.float64))
    l1 = float(absa.sum())
    if l1 <= R:
        return ThresholdRadiusPair(0.0, float(R), l1)
    u = np.sort(absa)[::-1]
    csum = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    active = np.nonzero(u * k > csum - R)[0]
    idx = active[-1]
    alpha = (csum[idx] - R) / (idx + 1)
    return ThresholdRadiusPair(float(max(alpha, 0.0)), float(R), l1)


def project_l1_ball(a, R):
    """Euclidean projection of ``a`` onto ``{x : ||x||_1 <= R}``."""
    a = np.asarray(a, dtype=np.float64)
    pair = find_threshold_for_radius(a, R)
    if pair.threshold == 0.0:
        return a.copy()
    return soft_threshold(a, pair.threshold)
