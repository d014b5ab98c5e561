"""Convex approximations f_delta of the Euclidean norm.

Both shipped kinds are radial, vanish at the origin, are nonnegative and
1-Lipschitz, and converge to ``|w|`` uniformly as ``delta -> 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("huber", "hyperbola_shifted")


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str
    delta: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {KINDS}")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"regularizer delta must lie in (0, 1], got {self.delta}")


def radial(spec: RegularizerSpec, r):
    """f_delta as a function of ``r = |w| >= 0``."""
    r = np.asarray(r, dtype=float)
    d = spec.delta
    if spec.kind == "huber":
        return np.where(r <= d, 0.5 * r * r / d, r - 0.5 * d)
    # sqrt(r^2 + d^2) - d written to avoid cancellation for small r
    return r * r / (np.sqrt(r * r + d * d) + d)


def radial_derivative(spec: RegularizerSpec, r):
    r = np.asarray(r, dtype=float)
    d = spec.delta
    if spec.kind == "huber":
        return np.minimum(r / d, 1.0)
    return r / np.sqrt(r * r + d * d)


def curvature_bound(spec: RegularizerSpec) -> float:
    """Upper bound on the second derivative of f_delta (Lipschitz constant of its gradient)."""
    return 1.0 / spec.delta


def eval_f(spec: RegularizerSpec, omega):
    """Evaluate f_delta on vectors stored along the last axis of ``omega``."""
    omega = np.asarray(omega, dtype=float)
    return radial(spec, np.linalg.norm(omega, axis=-1))


def grad_f(spec: RegularizerSpec, omega):
    omega = np.asarray(omega, dtype=float)
    r = np.linalg.norm(omega, axis=-1, keepdims=True)
    # ratio f'(r)/r is bounded as r -> 0 for both kinds
    if spec.kind == "huber":
        ratio = np.where(r <= spec.delta, 1.0 / spec.delta, 1.0 / np.maximum(r, spec.delta))
    else:
        ratio = 1.0 / np.sqrt(r * r + spec.delta ** 2)
    return omega * ratio


def uniform_gap(spec: RegularizerSpec) -> float:
    """sup over w of | f_delta(w) - |w| |."""
    if spec.kind == "huber":
        return 0.5 * spec.delta
    return spec.delta
