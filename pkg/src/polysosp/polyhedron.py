"""Polyhedral feasible sets ``{x : A x <= b}``.

Membership and activity tests, affine subspaces obtained by enforcing a
subset of the constraints with equality, and Euclidean projection onto the
intersection of a polyhedron with an optional ball.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

ACTIVE_TOL = 1e-9
PROJECTION_TOL = 1e-10
RANK_TOL = 1e-12


class RankDeficientError(ValueError):
    """Raised when the selected constraint rows are linearly dependent."""


class InfeasiblePointError(ValueError):
    """Raised when an operation requires a feasible point and gets none."""


class ProjectionError(RuntimeError):
    """Raised when alternating projections fail to converge.

    This usually means the intersection being projected onto is empty.
    """


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set ``{x : A x <= b}`` with ``k`` rows in ``d`` dimensions.

    Parameters
    ----------
    A : array_like, shape (k, d)
        Constraint normals, one per row. Zero rows are rejected.
    b : array_like, shape (k,)
        Right-hand sides.
    d : int, optional
        Ambient dimension. Only needed when ``k = 0``.
    """

    A: np.ndarray
    b: np.ndarray
    row_norms: np.ndarray = field(init=False, repr=False)

    def __init__(self, A, b, d: Optional[int] = None):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.size == 0:
            if d is None:
                d = A.shape[1] if A.ndim == 2 else None
            if d is None or d < 1:
                raise ValueError("empty constraint matrix needs an explicit dimension d >= 1")
            A = np.zeros((0, int(d)))
        if A.ndim != 2:
            raise ValueError(f"A must be a matrix, got shape {A.shape}")
        if d is not None and A.shape[1] != d:
            raise ValueError(f"A has {A.shape[1]} columns, expected d={d}")
        if A.shape[1] < 1:
            raise ValueError("dimension d must be at least 1")
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has {b.shape[0]} entries, expected k={A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must have finite entries")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0.0):
            bad = np.flatnonzero(norms == 0.0).tolist()
            raise ValueError(f"constraint rows {bad} have zero norm")
        A.setflags(write=False)
        b.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "row_norms", norms)

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @classmethod
    def box(cls, n: int, lower: float = -1.0, upper: float = 1.0) -> "Polyhedron":
        """Box ``lower <= x_i <= upper`` as ``2n`` rows (upper bounds first)."""
        eye = np.eye(n)
        A = np.vstack([eye, -eye])
        b = np.concatenate([np.full(n, upper), np.full(n, -lower)])
        return cls(A, b)

    def __repr__(self) -> str:
        return f"Polyhedron(k={self.k}, d={self.d})"


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    """Affine set ``anchor + span(basis)`` where the constraints in
    ``indices`` hold with equality.
    """

    indices: tuple
    anchor: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of ``x`` onto the subspace."""
        x = np.asarray(x, dtype=float)
        return self.anchor + self.basis @ (self.basis.T @ (x - self.anchor))


def _check_point(P: Polyhedron, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != P.d:
        raise ValueError(f"point has dimension {x.shape[0]}, polyhedron has d={P.d}")
    return x


def slack(P: Polyhedron, x) -> np.ndarray:
    """Normalized slack ``(b_i - A_i x) / ||A_i||`` of every row."""
    x = _check_point(P, x)
    return (P.b - P.A @ x) / P.row_norms


def contains(P: Polyhedron, x, tol: float = 0.0) -> bool:
    """True iff ``A_i x <= b_i + tol ||A_i||`` for every row."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.all(slack(P, x) >= -tol))


def active_set(P: Polyhedron, x, tol: float = ACTIVE_TOL) -> tuple:
    """Indices of rows with ``|A_i x - b_i| <= tol ||A_i||``."""
    s = slack(P, x)
    if np.any(s < -tol):
        raise InfeasiblePointError("active_set needs a feasible point")
    return tuple(np.flatnonzero(np.abs(s) <= tol).tolist())


def reachable_constraints(P: Polyhedron, x, r: float) -> tuple:
    """Indices of rows whose boundary hyperplane meets the ball ``B(x, r)``.

    Any affine subspace enforcing a row outside this set lies farther than
    ``r`` from ``x``, so escape searches can ignore it.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    return tuple(np.flatnonzero(slack(P, x) <= r).tolist())


def affine_subspace(P: Polyhedron, x, indices: Sequence[int]) -> AffineSubspace:
    """Affine subspace on which the rows in ``indices`` hold with equality.

    The anchor is the orthogonal projection of ``x`` onto that subspace and
    the basis spans the null space of the selected rows. Both come from a
    column-pivoted QR factorization of the transposed rows.

    Raises
    ------
    RankDeficientError
        If a pivot falls below ``1e-12`` times the leading pivot.
    """
    x = _check_point(P, x)
    idx = tuple(sorted(int(i) for i in indices))
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate constraint indices")
    d = P.d
    if not idx:
        return AffineSubspace(idx, x.copy(), np.eye(d))
    if len(idx) > d:
        raise RankDeficientError(f"{len(idx)} rows cannot be independent in d={d}")
    rows = P.A[list(idx)]
    Q, R, _ = scipy.linalg.qr(rows.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[-1] < RANK_TOL * diag[0]:
        raise RankDeficientError(f"constraint rows {list(idx)} are linearly dependent")
    m = len(idx)
    residual = rows @ x - P.b[list(idx)]
    # minimum-norm correction that puts x on every selected hyperplane
    step = np.linalg.lstsq(rows, residual, rcond=None)[0]
    anchor = x - step
    basis = np.ascontiguousarray(Q[:, m:])
    return AffineSubspace(idx, anchor, basis)


def _ball_project(z, center, radius):
    diff = z - center
    n = np.linalg.norm(diff)
    if n <= radius:
        return z
    return center + diff * (radius / n)


def _cap_project(z, a, beta, center, radius):
    """Projection onto ``{a.y <= beta} & B(center, radius)`` for unit ``a``."""
    zb = _ball_project(z, center, radius)
    if a @ zb <= beta:
        return zb
    zh = z - (a @ z - beta) * a
    diff = zh - center
    if diff @ diff <= radius * radius:
        return zh
    # the answer lies on the circle where the hyperplane cuts the sphere
    off = beta - a @ center
    if off < -radius:
        raise ProjectionError("halfspace misses the ball")
    c0 = center + off * a
    rad = np.sqrt(max(radius * radius - off * off, 0.0))
    u = zh - c0
    n = np.linalg.norm(u)
    if n == 0.0:
        return zh
    return c0 + u * (rad / n)


def _polish(x, z, unit, offs, center, radius, tol):
    """Exact projection for the active set suggested by the iterate ``z``.

    Returns ``None`` unless the candidate is feasible and satisfies the
    optimality conditions with nonnegative multipliers, in which case it is
    the exact projection of ``x``.
    """
    d = x.shape[0]
    slk = offs - unit @ z
    scale = 1.0 + float(np.linalg.norm(x))
    for tau in (1e-8, 1e-5, 1e-3):
        J = np.flatnonzero(slk <= tau * scale)
        if J.size > d:
            continue
        AJ, bJ = unit[J], offs[J]
        if J.size:
            G = AJ @ AJ.T
            if np.linalg.cond(G) > 1e12:
                continue
            y = x - AJ.T @ np.linalg.solve(G, AJ @ x - bJ)
        else:
            y = x.copy()
        cols = [AJ.T]
        if center is not None and np.linalg.norm(y - center) > radius:
            c0 = center - AJ.T @ np.linalg.solve(G, AJ @ center - bJ) if J.size else center
            off2 = float((center - c0) @ (center - c0))
            if off2 > radius * radius:
                continue
            u = y - c0
            nu = np.linalg.norm(u)
            if nu == 0.0:
                continue
            y = c0 + u * (np.sqrt(radius * radius - off2) / nu)
            cols.append((y - center)[:, None])
        if np.max(unit @ y - offs) > tol:
            continue
        if center is not None and np.linalg.norm(y - center) > radius + tol:
            continue
        B = np.hstack(cols)
        if B.shape[1] == 0:
            return y
        mult, *_ = np.linalg.lstsq(B, x - y, rcond=None)
        res = np.linalg.norm(B @ mult - (x - y))
        if res <= 1e-9 * scale and np.all(mult >= -1e-12 * scale):
            return y
    return None


def project(P: Polyhedron, ball, x, tol: float = PROJECTION_TOL,
            max_iter: Optional[int] = None) -> np.ndarray:
    """Euclidean projection onto ``P``, or onto ``P`` intersected with a ball.

    Uses Dykstra's alternating projections. Without a ball the sets are the
    halfspaces. With a ball every set is one halfspace intersected with the
    ball; these caps have closed-form projections and the same intersection,
    and they avoid the slow zig-zag of Dykstra between a sphere and a nearly
    tangent hyperplane. Rows whose halfspace contains the whole ball are
    dropped first since they cannot change the result.

    Parameters
    ----------
    P : Polyhedron
    ball : tuple (center, radius) or None
    x : array_like
        Point to project.
    tol : float
        Stop once the maximal constraint violation, the change of the
        iterate over one full sweep and the change of every correction term
        are all below ``tol``.
    max_iter : int, optional
        Maximal number of sweeps. Defaults to ``100 * k * d``.

    Raises
    ------
    ProjectionError
        When ``max_iter`` sweeps pass without convergence.
    """
    x = _check_point(P, x)
    A, b, norms = P.A, P.b, P.row_norms
    center = radius = None
    if ball is not None:
        center = _check_point(P, ball[0])
        radius = float(ball[1])
        if radius < 0:
            raise ValueError("ball radius must be nonnegative")
        keep = (b - A @ center) / norms < radius + tol
        A, b, norms = A[keep], b[keep], norms[keep]
    k = A.shape[0]
    if max_iter is None:
        max_iter = 100 * max(k + (ball is not None), 1) * P.d

    def violation(z):
        v = 0.0
        if k:
            v = max(v, float(np.max((A @ z - b) / norms)))
        if ball is not None:
            v = max(v, float(np.linalg.norm(z - center) - radius))
        return v

    if k == 0:
        return x.copy() if ball is None else _ball_project(x, center, radius)
    if violation(x) <= 0.0:
        return x.copy()

    unit = A / norms[:, None]
    offs = b / norms
    if k == 1:
        if ball is None:
            return x - max(0.0, unit[0] @ x - offs[0]) * unit[0]
        return _cap_project(x, unit[0], offs[0], center, radius)

    incr = np.zeros((k, x.shape[0]))
    z = x.copy()
    next_polish = 4
    for sweep in range(max_iter):
        if sweep == next_polish:
            next_polish *= 2
            y = _polish(x, z, unit, offs, center, radius, tol)
            if y is not None:
                return y
        start = z.copy()
        shift = 0.0
        for i in range(k):
            w = z + incr[i]
            if ball is None:
                excess = unit[i] @ w - offs[i]
                z = w - excess * unit[i] if excess > 0 else w
            else:
                z = _cap_project(w, unit[i], offs[i], center, radius)
            shift = max(shift, float(np.linalg.norm(incr[i] - (w - z))))
            incr[i] = w - z
        # the iterate can stall for a sweep while the corrections still move
        if np.linalg.norm(z - start) <= tol and shift <= tol and violation(z) <= tol:
            return z
    raise ProjectionError(
        f"alternating projections did not converge in {max_iter} sweeps "
        "(the intersection may be empty)")


def linear_min_over_ball_polytope(P_sub: Polyhedron, r: float, v, tol: float = 1e-9,
                                  max_iter: int = 10_000) -> np.ndarray:
    """Minimize ``y . v`` over ``{A y <= b, ||y|| <= r}``.

    Without rows the answer is ``-r v / ||v||``. Otherwise projected
    gradient descent with step ``r / ||v||`` is run from the projection of
    the origin; on a linear objective each step is a proximal-point step, so
    the iteration converges to a minimizer.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if r <= 0:
        raise ValueError("r must be positive")
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(v)
    if P_sub.k == 0:
        return -r * v / nv
    origin = np.zeros_like(v)
    ball = (origin, r)
    step = r / nv
    y = project(P_sub, ball, origin)
    for _ in range(max_iter):
        y_new = project(P_sub, ball, y - step * v)
        gain = v @ (y - y_new)
        moved = np.linalg.norm(y_new - y)
        y = y_new
        if gain <= tol * nv * r and moved <= tol * r:
            break
    return y
