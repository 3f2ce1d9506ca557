"""Numerical kernels used by the escape routines.

Projected power iteration for negative curvature, cyclic Jacobi
diagonalization, a bracketing solver for the trust-region secular equation
and the coordinate-wise median.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._rng import stream
from .polyhedron import AffineSubspace

_EPS = np.finfo(float).eps


def iteration_count(L: float, r: float, delta: float, eps: float, d: int,
                    fail_prob: float, C: float = 8.0) -> int:
    """Number of power-iteration steps that expose a direction of value
    at most ``-(1 - eps) * delta`` on the sphere of radius ``r``.

    ``ceil(C * (L r^2 / (eps delta)) * log(L r d / (fail_prob eps delta)))``,
    floored at ``10 log d`` and at one step.
    """
    for name, val in (("L", L), ("r", r), ("delta", delta), ("eps", eps),
                      ("d", d), ("fail_prob", fail_prob)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    if not eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    ratio = L * r * r / (eps * delta)
    log_term = math.log(L * r * d / (fail_prob * eps * delta))
    T = math.ceil(C * ratio * log_term)
    return max(T, math.ceil(10 * math.log(d)), 1)


def projected_power_iteration(grad_at: Callable[[np.ndarray], np.ndarray], saddle,
                              subspace: AffineSubspace, L: float, T: int, rng_seed=0,
                              callback: Optional[Callable[[np.ndarray], None]] = None,
                              grad_saddle=None) -> np.ndarray:
    """Power iteration on ``I - P M P / L`` through gradient differences.

    Iterates ``x <- proj(x - (grad(x) - grad(saddle)) / L)`` from a projected
    Gaussian start and returns the unit direction ``(x_T - saddle) /
    ||x_T - saddle||``. The gradient is assumed to be that of a quadratic, so
    the displacement from the saddle is rescaled to unit length after every
    step; this only changes the iterates by a positive factor and keeps them
    from overflowing.

    Parameters
    ----------
    grad_at : callable
        Gradient oracle.
    saddle : array_like
        Point of the subspace at which curvature is probed.
    subspace : AffineSubspace
    L : float
        Upper bound on the spectral norm of the Hessian.
    T : int
        Number of iterations.
    rng_seed : int
        Seed for the Gaussian start.
    callback : callable, optional
        Called with every iterate (including the start).
    grad_saddle : array_like, optional
        Precomputed gradient at the saddle.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if subspace.dim == 0:
        raise ValueError("power iteration needs a subspace of positive dimension")
    if L <= 0:
        raise ValueError("L must be positive")
    saddle = np.asarray(saddle, dtype=float)
    O = subspace.basis
    g0 = np.asarray(grad_at(saddle) if grad_saddle is None else grad_saddle, dtype=float)
    rng = stream(rng_seed, "power-iteration")

    def onto(z):
        return O @ (O.T @ z)

    # work with displacements from the saddle; the saddle lies on the subspace
    y = onto(rng.standard_normal(saddle.shape[0]))
    n = np.linalg.norm(y)
    while n == 0.0:  # pragma: no cover - measure zero
        y = onto(rng.standard_normal(saddle.shape[0]))
        n = np.linalg.norm(y)
    y /= n
    if callback is not None:
        callback(saddle + y)
    eta = 1.0 / L
    for _ in range(T):
        nxt = onto(y - eta * (np.asarray(grad_at(saddle + y), dtype=float) - g0))
        n = np.linalg.norm(nxt)
        if n == 0.0:
            # the step annihilated the iterate: it spans an eigendirection
            # with eigenvalue exactly L, keep it
            break
        y = nxt / n
        if callback is not None:
            callback(saddle + y)
    return y


@dataclass(frozen=True)
class Diagonalization:
    """``M ~ Q.T @ diag(lambdas) @ Q``; rows of ``Q`` are eigenvectors."""

    Q: np.ndarray
    lambdas: np.ndarray
    residual: float
    sweeps: int


def _off_norm(A) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def _round_robin(m: int) -> list:
    """Rounds of disjoint index pairs covering every pair exactly once."""
    players = list(range(m)) + ([None] if m % 2 else [])
    n = len(players)
    rounds = []
    for _ in range(n - 1):
        pairs = []
        for i in range(n // 2):
            a, b = players[i], players[n - 1 - i]
            if a is not None and b is not None:
                pairs.append((min(a, b), max(a, b)))
        rounds.append((np.array([p for p, _ in pairs], dtype=int),
                       np.array([q for _, q in pairs], dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_diagonalize(M, tol: float, max_sweeps: int = 100) -> Diagonalization:
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Sweeps run until the Frobenius norm of the off-diagonal part is at most
    ``tol`` (which bounds the spectral reconstruction error). Each sweep
    visits all pairs in round-robin order; the rotations of one round act
    on disjoint index pairs, so they commute and are applied together.

    The returned ``residual`` is the Frobenius norm of
    ``Q.T @ diag(lambdas) @ Q - M``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    M = 0.5 * (M + M.T)
    m = M.shape[0]
    A = M.copy()
    V = np.eye(m)
    sweeps = 0
    # stop when rounding noise, not the tolerance, limits progress
    floor = 4 * m * _EPS * max(np.linalg.norm(M), 1e-300)
    rounds = _round_robin(m) if m > 1 else []
    while _off_norm(A) > max(tol, floor) and sweeps < max_sweeps:
        sweeps += 1
        for ps, qs in rounds:
            apq = A[ps, qs]
            nz = np.abs(apq) > 0
            if not np.any(nz):
                continue
            ps_, qs_, apq = ps[nz], qs[nz], apq[nz]
            theta = (A[qs_, qs_] - A[ps_, ps_]) / (2.0 * apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # columns: p <- c p - s q, q <- s p + c q
            Cp, Cq = A[:, ps_].copy(), A[:, qs_].copy()
            A[:, ps_] = c * Cp - s * Cq
            A[:, qs_] = s * Cp + c * Cq
            Rp, Rq = A[ps_, :].copy(), A[qs_, :].copy()
            A[ps_, :] = c[:, None] * Rp - s[:, None] * Rq
            A[qs_, :] = s[:, None] * Rp + c[:, None] * Rq
            A[ps_, qs_] = 0.0
            A[qs_, ps_] = 0.0
            Vp, Vq = V[:, ps_].copy(), V[:, qs_].copy()
            V[:, ps_] = c * Vp - s * Vq
            V[:, qs_] = s * Vp + c * Vq
    lambdas = np.diag(A).copy()
    Q = V.T.copy()
    residual = float(np.linalg.norm(Q.T @ (lambdas[:, None] * Q) - M))
    return Diagonalization(Q=Q, lambdas=lambdas, residual=residual, sweeps=sweeps)


# ---------------------------------------------------------------------------
# secular equation  w(mu) = sum v_i^2 / (mu - lambda_i)^2 = r^2

def _merge_poles(lambdas, v_tilde):
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    v = np.asarray(v_tilde, dtype=float).reshape(-1)
    if lam.shape != v.shape:
        raise ValueError("lambdas and v_tilde must have equal length")
    keep = v != 0.0
    lam, w2 = lam[keep], v[keep] ** 2
    if lam.size == 0:
        return lam, w2, 1.0
    order = np.argsort(lam, kind="stable")
    lam, w2 = lam[order], w2[order]
    spread = float(lam[-1] - lam[0] + 1.0)
    merged_l, merged_w = [lam[0]], [w2[0]]
    for l, w in zip(lam[1:], w2[1:]):
        if l - merged_l[-1] < 1e-12 * spread:
            # weighted position keeps the merged pole inside the cluster
            tot = merged_w[-1] + w
            merged_l[-1] = (merged_l[-1] * merged_w[-1] + l * w) / tot
            merged_w[-1] = tot
        else:
            merged_l.append(l)
            merged_w.append(w)
    return np.array(merged_l), np.array(merged_w), spread


def secular_function(mu, lambdas, v_tilde):
    """``w(mu) = sum_i v_i^2 / (mu - lambda_i)^2`` (vectorized in ``mu``)."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    v2 = np.asarray(v_tilde, dtype=float) ** 2
    out = np.zeros_like(mu)
    for l, w in zip(lam, v2):
        if w != 0.0:
            out = out + w / (mu - l) ** 2
    return out


def secular_derivative(mu, lambdas, v_tilde):
    """``w'(mu) = -2 sum_i v_i^2 / (mu - lambda_i)^3``."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    v2 = np.asarray(v_tilde, dtype=float) ** 2
    out = np.zeros_like(mu)
    for l, w in zip(lam, v2):
        if w != 0.0:
            out = out - 2.0 * w / (mu - l) ** 3
    return out


def _bracketed_root(fn, dfn, lo, hi, tol, increasing: bool):
    """Root of a monotone function on ``[lo, hi]`` by Newton steps safeguarded
    with bisection. ``increasing`` tells the sign pattern at the ends.
    """
    sgn = 1.0 if increasing else -1.0
    x = 0.5 * (lo + hi)
    for _ in range(400):
        if hi - lo <= tol:
            break
        f = sgn * fn(x)
        if f == 0.0:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        df = sgn * dfn(x)
        x_new = x - f / df if df > 0 else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
    return x


def secular_solve(lambdas, v_tilde, r: float, root_tol: float) -> list:
    """All real roots of ``sum_i v_i^2 / (mu - lambda_i)^2 = r^2``.

    Components with ``v_i = 0`` are dropped and poles closer than
    ``1e-12 * spread`` are merged. Each of the two unbounded intervals holds
    exactly one root. Between two neighbouring poles ``w`` is convex and
    tends to infinity at both ends, so the interval holds zero, one or two
    roots depending on the value of ``w`` at its interior minimum, which is
    located first. Roots are refined to ``root_tol`` by safeguarded Newton.

    Returns the roots in increasing order.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    lam, w2, _ = _merge_poles(lambdas, v_tilde)
    if lam.size == 0:
        return []
    vabs = np.sqrt(w2)
    r2 = r * r
    vnorm = float(np.sqrt(w2.sum()))

    def g(mu):
        return float(np.sum(w2 / (mu - lam) ** 2)) - r2

    def dg(mu):
        return float(-2.0 * np.sum(w2 / (mu - lam) ** 3))

    def ddg(mu):
        return float(6.0 * np.sum(w2 / (mu - lam) ** 4))

    def tol_at(a, b):
        # refine past root_tol down to rounding level: near a pole the
        # candidate's accuracy is relative to the pole distance
        scale = max(abs(a), abs(b), 1e-300)
        return min(root_tol, 4 * _EPS * scale)

    roots = []
    # left of every pole: w increases from 0 to infinity
    a = lam[0] - 2.0 * vnorm / r
    b = lam[0] - vabs[0] / r
    if b > a:
        roots.append(_bracketed_root(g, dg, a, b, tol_at(a, b), increasing=True))
    else:  # pragma: no cover - only for vnorm == 0
        roots.append(b)
    for j in range(lam.size - 1):
        lo = lam[j] + vabs[j] / r
        hi = lam[j + 1] - vabs[j + 1] / r
        if not lo < hi:
            continue  # w >= r^2 across the whole interval
        mu_star = _bracketed_root(dg, ddg, lo, hi, tol_at(lo, hi), increasing=True)
        g_star = g(mu_star)
        if g_star > 0:
            continue
        if g_star == 0.0:
            roots.append(mu_star)
            continue
        if mu_star > lo:
            roots.append(_bracketed_root(g, dg, lo, mu_star, tol_at(lo, mu_star), increasing=False))
        if hi > mu_star:
            roots.append(_bracketed_root(g, dg, mu_star, hi, tol_at(mu_star, hi), increasing=True))
    # right of every pole: w decreases from infinity to 0
    a = lam[-1] + vabs[-1] / r
    b = lam[-1] + 2.0 * vnorm / r
    if b > a:
        roots.append(_bracketed_root(g, dg, a, b, tol_at(a, b), increasing=False))
    else:  # pragma: no cover
        roots.append(a)
    return roots


def candidate_point(lambdas, v_tilde, mu: float, r: float,
                    root_tol: float = 0.0) -> Optional[np.ndarray]:
    """Boundary candidate ``y_i = v_i / (mu - lambda_i)``.

    Returns ``None`` when ``mu`` sits closer to a pole than
    ``|v_i| / r - root_tol`` (up to rounding), since the candidate would then
    be dominated by round-off. Components with ``v_i = 0`` are zero.
    """
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    v = np.asarray(v_tilde, dtype=float).reshape(-1)
    y = np.zeros_like(v)
    nz = v != 0.0
    if not np.any(nz):
        return y
    gap = np.abs(mu - lam[nz])
    slack = root_tol + 8 * _EPS * np.maximum(abs(mu), np.abs(lam[nz]))
    if np.any(gap < np.abs(v[nz]) / r - slack) or np.any(gap == 0.0):
        return None
    y[nz] = v[nz] / (mu - lam[nz])
    return y


def coordinate_median(vectors: Sequence) -> np.ndarray:
    """Per-coordinate median; the lower median when the count is even."""
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[0] == 0:
        raise ValueError("coordinate_median needs at least one vector")
    srt = np.sort(arr, axis=0)
    return srt[(arr.shape[0] - 1) // 2].copy()
