"""Shared helpers for the test suite: a library of smooth objectives,
samplers and brute-force grid oracles.
"""
import itertools

import numpy as np
from scipy.optimize import minimize
from scipy.stats import ortho_group

from polysosp.objectives import cos_sum, cubic_mix, quadratic, rotated_saddle
from polysosp.polyhedron import Polyhedron, contains


def objective_library(d, seed, sigma=0.0):
    """Four smooth objectives in dimension ``d`` keyed by name."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    W = rng.standard_normal((3, d)) * 0.5
    return {
        "quadratic": quadratic(G + G.T, rng.standard_normal(d), rho=1.0, sigma=sigma),
        "rotated_saddle": rotated_saddle(d, rho=1.0, sigma=sigma),
        "cubic_mix": cubic_mix(d, rho=1.0, sigma=sigma),
        "cos_sum": cos_sum(W, sigma=sigma),
    }


def sample_ball(rng, d, r, n):
    """``n`` points uniform in the ball of radius ``r`` around the origin."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (r * rng.uniform(0, 1, (n, 1)) ** (1.0 / d))


def ball_grid(d, r, step):
    """Grid points of spacing ``step`` inside the ball of radius ``r``."""
    axis = np.arange(-r, r + step / 2, step)
    pts = np.array(list(itertools.product(axis, repeat=d))) if d <= 2 else \
        np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
    return pts[np.linalg.norm(pts, axis=1) <= r]


def sphere_grid(d, r, n_per_angle):
    """Points on the sphere of radius ``r`` in ``d <= 3`` dimensions."""
    if d == 1:
        return np.array([[-r], [r]])
    if d == 2:
        t = np.linspace(0, 2 * np.pi, n_per_angle, endpoint=False)
        return r * np.stack([np.cos(t), np.sin(t)], 1)
    if d == 3:
        t = np.linspace(0, 2 * np.pi, n_per_angle, endpoint=False)
        z = np.linspace(-1, 1, n_per_angle // 2 + 1)
        T, Z = np.meshgrid(t, z)
        s = np.sqrt(1 - Z ** 2)
        return r * np.stack([s * np.cos(T), s * np.sin(T), Z], -1).reshape(-1, 3)
    raise ValueError("d must be at most 3")


def min_quadratic_on_set(M, v, c, pts):
    """Minimum of ``x.M x / 2 + v.x + c`` over the rows of ``pts``."""
    vals = 0.5 * np.einsum("ij,jk,ik->i", pts, M, pts) + pts @ v + c
    return float(vals.min()) if vals.size else np.inf


def cone_min_on_sphere(M, cone, r, n=1257):
    """Grid minimum of ``x.M x / 2`` over the cone and the sphere (``d <= 3``)."""
    pts = sphere_grid(cone.d, r, n)
    pts = pts[np.all(pts @ cone.A.T <= 0, axis=1)]
    if not pts.size:
        return np.inf
    return float((0.5 * np.einsum("ij,jk,ik->i", pts, M, pts)).min())


def cone_boundary_min(M, cone, r, n=1257):
    """Grid minimum of ``x.M x / 2`` over the faces of a cone in 3 dimensions
    intersected with the ball (0 is always on the boundary).
    """
    best = 0.0
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    for i in range(cone.k):
        a = cone.A[i] / np.linalg.norm(cone.A[i])
        basis = np.linalg.svd(a[None, :])[2][1:]
        pts = r * (np.cos(t)[:, None] * basis[0] + np.sin(t)[:, None] * basis[1])
        others = np.delete(np.arange(cone.k), i)
        pts = pts[np.all(pts @ cone.A[others].T <= 0, axis=1)]
        if pts.size:
            best = min(best, float((0.5 * np.einsum("ij,jk,ik->i", pts, M, pts)).min()))
    return best


def random_cone_instance(seed, d=3, k=3):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    M = G + G.T
    M /= np.abs(np.linalg.eigvalsh(M)).max()
    return M, Polyhedron(rng.standard_normal((k, d)), np.zeros(k))


def dichotomy_instance(seed):
    """Cone around the most negative eigenvector whose faces stay above
    ``-delta``; returns ``(M, cone, delta)`` or ``None`` if the draw misses.
    """
    rng = np.random.default_rng(seed)
    Q = ortho_group.rvs(3, random_state=rng)
    lam = np.array([-1.0, *rng.uniform(-0.5, 1.0, 2)])
    M = Q @ np.diag(lam) @ Q.T
    M = 0.5 * (M + M.T)
    e = Q[:, 0]
    width = rng.uniform(0.3, 2.0)
    U = rng.standard_normal((3, 3))
    U -= np.outer(U @ e, e)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    cone = Polyhedron(U - width * e, np.zeros(3))
    bmin = cone_boundary_min(M, cone, 1.0)
    delta = max(-bmin / 0.95, 0.01)
    if delta >= 0.4:
        return None
    return M, cone, delta


def dichotomy_instances(n):
    """The first ``n`` draws of ``dichotomy_instance`` that meet the hypotheses."""
    out, seed = [], 0
    while len(out) < n:
        inst = dichotomy_instance(seed)
        if inst is not None:
            out.append((seed, *inst))
        seed += 1
    return out


def quadratic_min_witness(M, v, P, x0, r, step, polish=5):
    """Upper bound on ``min q(x) - q(x0)`` over ``P`` and ``B(x0, r)`` for
    ``q(x) = x.M x / 2 + v.x``, with the feasible point attaining it.

    The bound comes from a grid of spacing ``step`` around ``x0``; the best
    grid points are then polished with SLSQP and kept only if the polished
    point is still feasible.
    """
    M, v, x0 = np.asarray(M, float), np.asarray(v, float), np.asarray(x0, float)

    def q(x):
        return 0.5 * x @ M @ x + v @ x

    pts = x0 + ball_grid(x0.shape[0], r, step)
    if P.k:
        pts = pts[np.all(pts @ P.A.T <= P.b, axis=1)]
    pts = np.vstack([x0[None, :], pts])
    vals = 0.5 * np.einsum("ij,jk,ik->i", pts, M, pts) + pts @ v
    order = np.argsort(vals)
    best_x, best = pts[order[0]], float(vals[order[0]])
    cons = [{"type": "ineq", "fun": lambda x: r * r - (x - x0) @ (x - x0),
             "jac": lambda x: -2 * (x - x0)}]
    if P.k:
        cons.append({"type": "ineq", "fun": lambda x: P.b - P.A @ x, "jac": lambda x: -P.A})
    for i in order[:polish]:
        res = minimize(q, pts[i], jac=lambda x: M @ x + v, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 200})
        y = res.x
        if contains(P, y, 0.0) and np.linalg.norm(y - x0) <= r and q(y) < best:
            best_x, best = y, float(q(y))
    return best - q(x0), best_x


def random_escape_instance(seed):
    """Quadratic with a few constraints near the origin, ``r = 1``.

    Returns ``(M, v, P, delta)``; the origin is feasible.
    """
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    G = rng.standard_normal((d, d))
    M = G + G.T
    M /= max(np.abs(np.linalg.eigvalsh(M)).max(), 1e-12)
    v = rng.standard_normal(d) * rng.choice([0.0, 0.05, 0.3])
    A = rng.standard_normal((k, d))
    b = np.where(rng.random(k) < 0.5, 0.0, rng.uniform(0, 1, k))
    delta = float(rng.uniform(0.05, 0.3))
    return M, v, Polyhedron(A, b), delta
