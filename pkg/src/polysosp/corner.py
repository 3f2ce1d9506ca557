"""Escaping a quadratic saddle sitting at the apex of a polyhedral cone.

The objective is ``x.M x / 2`` over the cone ``{x : A x <= 0}``. Every
subset of the constraints is enforced with equality in turn, largest subsets
first, and projected power iteration looks for negative curvature inside the
resulting linear subspace.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .linalg import iteration_count, projected_power_iteration
from .polyhedron import (ACTIVE_TOL, AffineSubspace, Polyhedron, RankDeficientError,
                         affine_subspace, contains)

DEFAULT_EPS = 0.5


@dataclass(frozen=True, eq=False)
class QcspInstance:
    """Quadratic ``x.M x / 2`` over the cone ``{A x <= 0}``, probed within
    radius ``r`` for a decrease of ``delta``.
    """

    M: np.ndarray
    cone: Polyhedron
    delta: float
    r: float
    L: float

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != self.cone.d:
            raise ValueError("M must be d x d with d matching the cone")
        if not np.array_equal(M, M.T):
            raise ValueError("M must be exactly symmetric")
        if np.any(self.cone.b != 0.0):
            raise ValueError("the cone must have b = 0")
        if not (self.delta > 0 and self.r > 0 and self.L > 0):
            raise ValueError("delta, r and L must be positive")
        object.__setattr__(self, "M", M)

    @property
    def d(self) -> int:
        return self.cone.d

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.M @ x))

    def gradient(self, x) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=float)


def subsets_largest_first(indices) -> Iterator[tuple]:
    """All subsets of ``indices``, by decreasing size then lexicographically."""
    indices = tuple(sorted(indices))
    for size in range(len(indices), -1, -1):
        yield from itertools.combinations(indices, size)


def find_inside_corner(inst: QcspInstance, subspace: AffineSubspace, eps: float,
                       fail_prob: float = 0.01, rng_seed=0,
                       gradient: Optional[Callable] = None) -> np.ndarray:
    """Point ``+-r e`` on the subspace, ``e`` a power-iteration direction.

    Of the two signs the feasible one is returned, ``+`` first; when both
    are feasible the one with the smaller objective wins (a tie keeps ``+``).
    When neither is feasible ``+r e`` is returned and the caller rejects it.
    """
    if subspace.dim == 0:
        raise ValueError("zero-dimensional subspace")
    grad = inst.gradient if gradient is None else gradient
    origin = np.zeros(inst.d)
    T = iteration_count(inst.L, inst.r, inst.delta, eps, inst.d, fail_prob)
    e = projected_power_iteration(grad, origin, subspace, inst.L, T, rng_seed)
    plus, minus = inst.r * e, -inst.r * e
    ok_plus = contains(inst.cone, plus, ACTIVE_TOL)
    ok_minus = contains(inst.cone, minus, ACTIVE_TOL)
    if ok_plus and ok_minus:
        return minus if inst.value(minus) < inst.value(plus) else plus
    if ok_minus:
        return minus
    return plus


def escape_corner(inst: QcspInstance, eps: float = DEFAULT_EPS, fail_prob: float = 0.01,
                  rng_seed=0, gradient: Optional[Callable] = None) -> Optional[np.ndarray]:
    """Search for ``y`` in the cone with ``||y|| = r`` and
    ``f(y) < -(1 - eps) delta``.

    Constraint subsets are visited largest first, lexicographically within
    a size; each power iteration runs long enough for accuracy ``eps / k``.
    Returns ``None`` when no subset produces such a point.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    k = inst.cone.k
    eps_subset = eps / k if k else eps
    threshold = -(1.0 - eps) * inst.delta
    origin = np.zeros(inst.d)
    for subset in subsets_largest_first(range(k)):
        try:
            sub = affine_subspace(inst.cone, origin, subset)
        except RankDeficientError:
            continue
        if sub.dim == 0:
            continue
        y = find_inside_corner(inst, sub, eps_subset, fail_prob, (rng_seed, "corner", subset),
                               gradient=gradient)
        if contains(inst.cone, y, ACTIVE_TOL) and inst.value(y) < threshold:
            return y
    return None
