"""General escape step for smooth objectives over polyhedra.

A perturbed quadratic model is built around the current point. For every
subset of nearby constraints (largest first) the model is restricted to the
affine subspace where that subset holds with equality, and three candidate
minimizers of the restricted model inside the trust ball are tried: a pure
linear step, the interior critical point and the boundary critical points
from the secular equation. A candidate is accepted only if the true
objective drops by more than ``delta / 3``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .corner import subsets_largest_first
from .linalg import candidate_point, jacobi_diagonalize, secular_solve
from .oracle import DEFAULT_FAIL_PROB, DEFAULT_XI, OracleBundle, QuadraticModel, build_model
from .polyhedron import (ACTIVE_TOL, PROJECTION_TOL, InfeasiblePointError, Polyhedron,
                         ProjectionError, RankDeficientError, affine_subspace, contains,
                         linear_min_over_ball_polytope, project, reachable_constraints)

logger = logging.getLogger(__name__)

CASE2_RESIDUAL = 1e-8


class OutcomeKind(str, Enum):
    ESCAPED = "Escaped"
    SOSP = "Sosp"


class CaseLabel(str, Enum):
    LARGE_GRADIENT = "LargeGradient"
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"


@dataclass(frozen=True, eq=False)
class SubspaceProblem:
    """The model restricted to ``{p + O y}`` and the ball ``||y|| <= r_bar``.

    ``S_bar`` holds the remaining constraints in ``y`` coordinates; it is
    ``None`` when the subspace is a single point.
    """

    indices: tuple
    M_bar: np.ndarray
    v_bar: np.ndarray
    C: float
    r_bar: float
    S_bar: Optional[Polyhedron]
    O: np.ndarray
    p: np.ndarray

    @property
    def dim(self) -> int:
        return self.O.shape[1]

    def model_value(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self.C + self.v_bar @ y + 0.5 * y @ (self.M_bar @ y))

    def ambient(self, y) -> np.ndarray:
        return self.p + self.O @ np.asarray(y, dtype=float)


@dataclass(frozen=True, eq=False)
class Candidate:
    point: np.ndarray
    value: float
    case_label: CaseLabel


@dataclass(frozen=True, eq=False)
class EscapeOutcome:
    """Result of one escape attempt.

    ``complete`` is False when the subset budget ran out before every subset
    was examined, in which case a ``Sosp`` outcome is not a certificate.
    """

    kind: OutcomeKind
    base: np.ndarray
    base_value: float
    point: Optional[np.ndarray] = None
    value: Optional[float] = None
    subset: Optional[tuple] = None
    case_label: Optional[CaseLabel] = None
    subsets_examined: int = 0
    complete: bool = True

    @property
    def escaped(self) -> bool:
        return self.kind is OutcomeKind.ESCAPED

    @property
    def decrease(self) -> Optional[float]:
        return None if self.value is None else self.base_value - self.value


def reduce_to_subspace(model: QuadraticModel, P: Polyhedron, indices,
                       tol: float = ACTIVE_TOL) -> Optional[SubspaceProblem]:
    """Restrict ``model`` to the subspace where the rows ``indices`` are tight.

    Returns ``None`` when the rows are linearly dependent, when the subspace
    misses the trust ball, or when a remaining row is constant and violated
    on the whole subspace.
    """
    try:
        sub = affine_subspace(P, model.base, indices)
    except RankDeficientError:
        return None
    p, O = sub.anchor, sub.basis
    h = p - model.base
    dist2 = float(h @ h)
    if dist2 > model.r * model.r:
        return None
    r_bar = math.sqrt(max(model.r * model.r - dist2, 0.0))
    m = O.shape[1]
    rest = np.setdiff1d(np.arange(P.k), np.asarray(sub.indices, dtype=int))
    S_bar = None
    if m > 0:
        rows = P.A[rest] @ O
        rhs = P.b[rest] - P.A[rest] @ p
        norms = np.linalg.norm(rows, axis=1)
        flat = norms <= 1e-12 * P.row_norms[rest]
        if np.any(rhs[flat] < -tol * P.row_norms[rest][flat]):
            return None
        S_bar = Polyhedron(rows[~flat], rhs[~flat], d=m)
    elif rest.size and np.any(P.b[rest] - P.A[rest] @ p < -tol * P.row_norms[rest]):
        return None
    M_bar = O.T @ model.M @ O
    M_bar = 0.5 * (M_bar + M_bar.T)
    v_bar = O.T @ (model.v + model.M @ h)
    return SubspaceProblem(indices=sub.indices, M_bar=M_bar, v_bar=v_bar, C=model.value_at(p),
                           r_bar=r_bar, S_bar=S_bar, O=O, p=p)


def large_gradient_threshold(sp: SubspaceProblem, model: QuadraticModel, L: float) -> float:
    """Size of ``v_bar`` above which the linear step alone is guaranteed to
    beat the curvature within the ball. Used only for diagnostics.
    """
    d = model.base.shape[0]
    c_rel = abs(sp.C - model.base_value)
    if sp.r_bar == 0:
        return math.inf
    return 4.0 * (L * d * sp.r_bar + (c_rel + model.delta) * d / sp.r_bar)


def default_root_tol(sp: SubspaceProblem, model: QuadraticModel, L: float, lambdas) -> float:
    """Secular root precision: ``min(1e-12 spread, delta guard / (40 sqrt d (...)))``."""
    d = model.base.shape[0]
    delta, r_bar = model.delta, sp.r_bar
    spread = float(np.max(lambdas) - np.min(lambdas) + 1.0)
    guard = model.xi * delta / (d * d * model.r)
    c_rel = abs(sp.C - model.base_value)
    denom = 40.0 * math.sqrt(d) * (L * (d + 2) * r_bar ** 3 + (c_rel + delta) * d * r_bar)
    return min(1e-12 * spread, delta * guard / denom)


def find_inside(sp: SubspaceProblem, model: QuadraticModel, bundle: OracleBundle, delta: float,
                rng_seed=0, *, feas_tol: float = ACTIVE_TOL,
                projection_tol: float = PROJECTION_TOL,
                root_tol: Optional[float] = None) -> Optional[Candidate]:
    """First candidate ``p + O y`` inside the trust ball and the polyhedron
    whose true value is below ``f(base) - delta / 3``.

    Candidates are tried in this order: the minimizer of the linear term,
    the interior critical point of the restricted model, then the boundary
    critical points sorted by model value. The search is deterministic, so
    ``rng_seed`` is accepted only for interface symmetry.
    """
    threshold = model.base_value - delta / 3.0
    r_bar = sp.r_bar
    ball_tol = feas_tol * max(1.0, r_bar)

    def accept(y, label):
        if np.linalg.norm(y) > r_bar + ball_tol:
            return None
        if sp.S_bar is not None and not contains(sp.S_bar, y, feas_tol):
            return None
        u = sp.ambient(y)
        fu = float(bundle.value(u))
        if fu < threshold:
            return Candidate(u, fu, label)
        return None

    m = sp.dim
    if m == 0 or r_bar == 0.0:
        return accept(np.zeros(m), CaseLabel.LARGE_GRADIENT)

    # linear step
    S_bar = sp.S_bar
    try:
        y1 = linear_min_over_ball_polytope(S_bar, r_bar, sp.v_bar, tol=1e-9)
    except ProjectionError:
        # the remaining constraints do not meet the ball
        return None
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("subset %s: |v_bar|=%.3e, large-gradient threshold %.3e", sp.indices,
                     np.linalg.norm(sp.v_bar), large_gradient_threshold(sp, model, bundle.L))
    found = accept(y1, CaseLabel.LARGE_GRADIENT)
    if found is not None:
        return found

    # interior critical point
    try:
        y2 = np.linalg.solve(sp.M_bar, -sp.v_bar)
    except np.linalg.LinAlgError:
        y2 = None
    if y2 is not None and np.all(np.isfinite(y2)):
        res = np.linalg.norm(sp.M_bar @ y2 + sp.v_bar)
        if res <= CASE2_RESIDUAL * np.linalg.norm(sp.v_bar):
            found = accept(y2, CaseLabel.INTERIOR)
            if found is not None:
                return found

    # boundary critical points
    diag = jacobi_diagonalize(sp.M_bar, delta / (10.0 * r_bar * r_bar))
    lam, Q = diag.lambdas, diag.Q
    vt = Q @ sp.v_bar
    tol_mu = default_root_tol(sp, model, bundle.L, lam) if root_tol is None else root_tol
    cands = []
    for mu in secular_solve(lam, vt, r_bar, tol_mu):
        yt = candidate_point(lam, vt, mu, r_bar, tol_mu)
        if yt is None:
            continue
        y = Q.T @ yt
        cands.append((sp.model_value(y), len(cands), y))
    cands.sort(key=lambda t: (t[0], t[1]))
    for _, _, y in cands:
        try:
            y = project(S_bar, (np.zeros(m), r_bar), y, tol=projection_tol)
        except ProjectionError:
            break
        found = accept(y, CaseLabel.BOUNDARY)
        if found is not None:
            return found
    return None


def houdini_escape(bundle: OracleBundle, P: Polyhedron, x, delta: float, xi: float = DEFAULT_XI,
                   rng_seed=0, *, fail_prob: float = DEFAULT_FAIL_PROB,
                   max_subsets: Optional[int] = None, feas_tol: float = ACTIVE_TOL,
                   projection_tol: float = PROJECTION_TOL,
                   root_tol: Optional[float] = None) -> EscapeOutcome:
    """Look for a feasible point within ``r = (delta / rho) ** (1/3)`` of ``x``
    that lowers ``f`` by more than ``delta / 3``.

    Subsets of the constraints whose hyperplanes meet the trust ball are
    visited largest first. A ``Sosp`` outcome with ``complete=True`` means no
    subset produced such a point. ``max_subsets`` caps the number of subsets
    examined; hitting the cap yields ``Sosp`` with ``complete=False``.
    """
    x = np.asarray(x, dtype=float)
    if not contains(P, x, feas_tol):
        raise InfeasiblePointError("escape needs a feasible point")
    model = build_model(bundle, x, delta, xi, rng_seed, fail_prob)
    reach = reachable_constraints(P, x, model.r)
    examined = 0
    for subset in subsets_largest_first(reach):
        if max_subsets is not None and examined >= max_subsets:
            return EscapeOutcome(OutcomeKind.SOSP, x, model.base_value,
                                 subsets_examined=examined, complete=False)
        examined += 1
        sp = reduce_to_subspace(model, P, subset, feas_tol)
        if sp is None:
            continue
        cand = find_inside(sp, model, bundle, delta, (rng_seed, subset), feas_tol=feas_tol,
                           projection_tol=projection_tol, root_tol=root_tol)
        if cand is None:
            continue
        if not contains(P, cand.point, feas_tol):  # pragma: no cover - guarded by S_bar
            continue
        return EscapeOutcome(OutcomeKind.ESCAPED, x, model.base_value, point=cand.point,
                             value=cand.value, subset=sp.indices, case_label=cand.case_label,
                             subsets_examined=examined)
    return EscapeOutcome(OutcomeKind.SOSP, x, model.base_value, subsets_examined=examined)
