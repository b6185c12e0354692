"""Convex regularizers with closed-form proximal maps.

The catalogue is deliberately small: structured penalties such as the
graph-guided fused lasso are expressed by moving the linear map into the
equality constraint and penalising the split variable with ``l1``.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidStep

KINDS = ("zero", "l1", "l2-norm", "squared-l2")


@dataclass(frozen=True)
class Regularizer:
    """Weighted convex penalty ``weight * r(y)``.

    Parameters
    ----------
    kind : {"zero", "l1", "l2-norm", "squared-l2"}
    weight : float
        Nonnegative multiplier.
    """

    kind: str = "zero"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"regularizer weight must be finite and >= 0, got {self.weight}")
        object.__setattr__(self, "weight", float(self.weight))

    def __call__(self, y):
        return eval_reg(self, y)


def eval_reg(reg, y):
    """Value of ``reg`` at ``y``."""
    y = np.asarray(y, dtype=float)
    lam = reg.weight
    if reg.kind == "zero" or lam == 0.0:
        return 0.0
    if reg.kind == "l1":
        return lam * float(np.sum(np.abs(y)))
    if reg.kind == "l2-norm":
        return lam * float(np.linalg.norm(y))
    return lam * float(y @ y)


def soft_threshold(v, thresh):
    # |v| == thresh maps to exactly 0
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def prox(reg, step, v):
    """Proximal map ``argmin_u reg(u) + ||u - v||^2 / (2 step)``."""
    if not step > 0:
        raise InvalidStep(f"prox step must be positive, got {step}")
    v = np.asarray(v, dtype=float)
    thresh = step * reg.weight
    if reg.kind == "zero" or thresh == 0.0:
        return v.copy()
    if reg.kind == "l1":
        return soft_threshold(v, thresh)
    if reg.kind == "l2-norm":
        nrm = np.linalg.norm(v)
        if nrm <= thresh:
            return np.zeros_like(v)
        return (1.0 - thresh / nrm) * v
    return v / (1.0 + 2.0 * thresh)


def subgradient(reg, y):
    """A deterministic element of the subdifferential of ``reg`` at ``y``."""
    y = np.asarray(y, dtype=float)
    lam = reg.weight
    if reg.kind == "zero":
        return np.zeros_like(y)
    if reg.kind == "l1":
        return lam * np.sign(y)
    if reg.kind == "l2-norm":
        nrm = np.linalg.norm(y)
        return np.zeros_like(y) if nrm == 0.0 else lam * y / nrm
    return 2.0 * lam * y


def subdiff_distance(reg, y, g):
    """Euclidean distance from ``g`` to the subdifferential of ``reg`` at ``y``."""
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    lam = reg.weight
    if reg.kind == "zero":
        return float(np.linalg.norm(g))
    if reg.kind == "l1":
        nz = y != 0.0
        gap = np.where(nz, g - lam * np.sign(y), np.maximum(np.abs(g) - lam, 0.0))
        return float(np.linalg.norm(gap))
    if reg.kind == "l2-norm":
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return max(0.0, float(np.linalg.norm(g)) - lam)
        return float(np.linalg.norm(g - lam * y / nrm))
    return float(np.linalg.norm(g - 2.0 * lam * y))
