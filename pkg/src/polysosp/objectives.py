"""Built-in smooth test objectives packaged as oracle bundles."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .oracle import OracleBundle


def spectral_norm(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (M + M.T)))))


def quadratic(M, v=None, c: float = 0.0, *, rho: float, L: Optional[float] = None,
              sigma: float = 0.0) -> OracleBundle:
    """``f(x) = x.M x / 2 + v.x + c``.

    A quadratic has a constant Hessian, so ``rho`` only fixes the trust
    radius ``(delta / rho) ** (1/3)`` used by the escape step.
    """
    M = np.array(M, dtype=float)
    M = 0.5 * (M + M.T)
    d = M.shape[0]
    v = np.zeros(d) if v is None else np.array(v, dtype=float).reshape(d)
    c = float(c)
    if L is None:
        L = max(spectral_norm(M), 1e-12)

    def value(x):
        return float(0.5 * x @ (M @ x) + v @ x + c)

    def gradient(x):
        return M @ x + v

    return OracleBundle(value, gradient, L=L, rho=rho, sigma=sigma)


def graph_partition(adjacency, *, rho: float, L: Optional[float] = None,
                    sigma: float = 0.0) -> OracleBundle:
    """Relaxed graph-partition objective ``x.A x / 2``."""
    return quadratic(adjacency, None, 0.0, rho=rho, L=L, sigma=sigma)


def rotation_pairs_matrix(d: int, angle: float = math.pi / 6) -> np.ndarray:
    """Hessian of the rotated saddle: coordinate pairs rotated by ``angle``.

    On each pair ``(x, y)`` the objective is ``u^2 - w^2`` with
    ``u = cos(a) x + sin(a) y`` and ``w = -sin(a) x + cos(a) y``. A leftover
    coordinate in odd dimension contributes ``x^2``.
    """
    if d < 1:
        raise ValueError("d must be positive")
    H = np.zeros((d, d))
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, s], [-s, c]])
    block = 2.0 * R.T @ np.diag([1.0, -1.0]) @ R
    for j in range(0, d - 1, 2):
        H[j:j + 2, j:j + 2] = block
    if d % 2:
        H[-1, -1] = 2.0
    return H


def rotated_saddle(d: int = 2, *, rho: float, sigma: float = 0.0) -> OracleBundle:
    """Quadratic saddle ``(sqrt3/2 x + y/2)^2 - (-x/2 + sqrt3/2 y)^2`` on each
    coordinate pair. Along ``x = 0`` it reads ``-y^2 / 2``.
    """
    return quadratic(rotation_pairs_matrix(d), rho=rho, L=2.0, sigma=sigma)


def cubic_mix(d: int = 2, quad=None, *, rho: float = 1.0, sigma: float = 0.0) -> OracleBundle:
    """``sum_i x_i^3 / 6 + x.Q x / 2`` with ``Q`` the rotated-saddle Hessian by
    default. The cubic part has a 1-Lipschitz Hessian ``diag(x)``.

    The gradient Lipschitz constant grows with ``|x|``; the value reported is
    valid on the unit box scaled by 2.
    """
    Q = rotation_pairs_matrix(d) if quad is None else np.array(quad, dtype=float)
    Q = 0.5 * (Q + Q.T)
    if rho < 1.0:
        raise ValueError("rho must be at least 1 for the cubic part")

    def value(x):
        return float(np.sum(x ** 3) / 6.0 + 0.5 * x @ (Q @ x))

    def gradient(x):
        return 0.5 * x * x + Q @ x

    return OracleBundle(value, gradient, L=spectral_norm(Q) + 2.0, rho=rho, sigma=sigma)


def cos_sum(W, *, sigma: float = 0.0) -> OracleBundle:
    """``sum_j cos(w_j . x)`` for the rows ``w_j`` of ``W``."""
    W = np.array(W, dtype=float)
    norms = np.linalg.norm(W, axis=1)

    def value(x):
        return float(np.sum(np.cos(W @ x)))

    def gradient(x):
        return -W.T @ np.sin(W @ x)

    return OracleBundle(value, gradient, L=float(np.sum(norms ** 2)),
                        rho=float(np.sum(norms ** 3)), sigma=sigma)


BUILTIN = ("quadratic", "graph_partition", "rotated_saddle", "cubic_mix")
