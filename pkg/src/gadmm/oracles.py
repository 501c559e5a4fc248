"""Smooth-term and proximal oracles.

A smooth convex term carries its value, gradient, and the pair of
self-adjoint PSD operators sandwiching its curvature:

    0.5 ||x - x'||_lower^2  <=  f(x) - f(x') - <x - x', grad f(x')>
                            <=  0.5 ||x - x'||_upper^2.

Nonsmooth terms are represented by their weighted proximal maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linops import SelfAdjointOp


@dataclass
class SmoothTerm:
    """Smooth convex function with curvature bounds.

    ``upper_op`` is the quadratic majorant curvature and ``lower_op`` the
    minorant; ``upper_op - lower_op`` must be PSD.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    upper_op: SelfAdjointOp
    lower_op: SelfAdjointOp

    @classmethod
    def zero(cls, dim: int) -> "SmoothTerm":
        z = SelfAdjointOp.zero(dim)
        return cls(dim, value=lambda x: 0.0,
                   gradient=lambda x: np.zeros(dim),
                   upper_op=z, lower_op=z)

    @classmethod
    def quadratic(cls, hess: np.ndarray,
                  lin: Optional[np.ndarray] = None) -> "SmoothTerm":
        """0.5 <x, P x> + <p, x> with exact curvature bounds (both equal P)."""
        hess = np.asarray(hess, dtype=float)
        dim = hess.shape[0]
        lin = np.zeros(dim) if lin is None else np.asarray(lin, dtype=float)
        op = SelfAdjointOp(hess)
        return cls(dim,
                   value=lambda x: 0.5 * float(x @ (hess @ x)) + float(lin @ x),
                   gradient=lambda x: hess @ x + lin,
                   upper_op=op, lower_op=op)


class ProxOracle:
    """Closed proper convex function given through its weighted prox.

    ``prox(v, w)`` returns argmin_x g(x) + 0.5 * sum_i w_i (x_i - v_i)^2
    for strictly positive per-coordinate weights ``w``.
    """

    def __init__(self, value: Callable[[np.ndarray], float],
                 prox: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.value = value
        self._prox = prox

    def prox(self, v: np.ndarray, weights: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != v.shape:
            raise ValueError("weights must match the input vector shape")
        if np.any(weights <= 0):
            raise ValueError("prox weights must be strictly positive")
        return self._prox(v, weights)

    @classmethod
    def l1(cls, mu: float) -> "ProxOracle":
        if mu < 0:
            raise ValueError("l1 coefficient must be nonnegative")
        return cls(value=lambda x: mu * float(np.abs(x).sum()),
                   prox=lambda v, w: prox_l1(v, mu, w))

    @classmethod
    def nonneg(cls) -> "ProxOracle":
        """Indicator of the nonnegative orthant; its prox is the projection.

        The objective is separable, so positive diagonal weights do not move
        the per-coordinate minimizer.
        """
        def value(x: np.ndarray) -> float:
            return 0.0 if np.all(np.asarray(x) >= 0) else np.inf

        return cls(value=value, prox=lambda v, w: project_nonneg(v))


def prox_l1(v: np.ndarray, mu: float, weights: np.ndarray) -> np.ndarray:
    """Weighted soft threshold: argmin_y mu*||y||_1 + 0.5*sum w_i (y_i-v_i)^2.

    Componentwise sign(v_i) * max(|v_i| - mu/w_i, 0).
    """
    v = np.asarray(v, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if weights.shape != v.shape or np.any(weights <= 0):
        raise ValueError("weights must be strictly positive and match v")
    return np.sign(v) * np.maximum(np.abs(v) - mu / weights, 0.0)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    """Componentwise max(v, 0): the Euclidean projection onto the orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


@dataclass
class QuadraticMajorant:
    """Quadratic model of a smooth term, tight at its anchor."""

    anchor: np.ndarray
    constant: float
    slope: np.ndarray
    curvature: SelfAdjointOp

    def evaluate(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.anchor
        return self.constant + float(self.slope @ d) + 0.5 * self.curvature.quadform(d)


def quadratic_majorant(term: SmoothTerm, anchor: np.ndarray) -> QuadraticMajorant:
    """Upper quadratic model of ``term`` anchored at ``anchor``."""
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != (term.dim,):
        raise ValueError(f"anchor must have length {term.dim}")
    return QuadraticMajorant(anchor=anchor.copy(),
                             constant=float(term.value(anchor)),
                             slope=np.asarray(term.gradient(anchor), dtype=float),
                             curvature=term.upper_op)
