"""Outer loop: repeat the escape step until no escape exists."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .escape import houdini_escape
from .oracle import DEFAULT_FAIL_PROB, DEFAULT_XI, OracleBundle
from .polyhedron import (ACTIVE_TOL, PROJECTION_TOL, InfeasiblePointError, Polyhedron,
                         contains, project)

DEFAULT_MAX_OUTER = 100_000


@dataclass
class RunConfig:
    """Settings of one run.

    ``max_outer_iters`` defaults to ``ceil(10 (f(x0) - f_lower_hint) / delta)``
    when a lower bound hint is given and to 100000 otherwise.
    ``max_subsets`` caps the constraint subsets examined per escape step; a
    run that stops on the cap reports ``certified=False``.
    """

    delta: float
    xi: float = DEFAULT_XI
    seed: int = 0
    max_outer_iters: Optional[int] = None
    f_lower_hint: Optional[float] = None
    fail_prob: float = DEFAULT_FAIL_PROB
    active_tol: float = ACTIVE_TOL
    projection_tol: float = PROJECTION_TOL
    root_tol: Optional[float] = None
    max_subsets: Optional[int] = None

    def __post_init__(self):
        if not (self.delta > 0 and self.xi > 0):
            raise ValueError("delta and xi must be positive")
        if self.max_outer_iters is not None and self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")

    def outer_limit(self, f0: float) -> int:
        if self.max_outer_iters is not None:
            return self.max_outer_iters
        if self.f_lower_hint is not None:
            return max(1, math.ceil(10.0 * (f0 - self.f_lower_hint) / self.delta))
        return DEFAULT_MAX_OUTER


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    iter: int
    x: np.ndarray
    f_value: float
    escaped: bool
    case_label: Optional[str]
    subset_size: Optional[int]
    grad_calls: int
    wall_ms: float


class SospResult(NamedTuple):
    x: np.ndarray
    records: List[TrajectoryRecord]
    certified: bool


def find_sosp(bundle: OracleBundle, P: Polyhedron, x0, config: RunConfig,
              callback: Optional[Callable[[TrajectoryRecord], None]] = None) -> SospResult:
    """Escape repeatedly from ``x0`` until a point admits no escape.

    Record 0 describes ``x0``; each escape appends a record of the new point,
    and a final non-escaped record marks the point where the search stopped.
    ``grad_calls`` counts oracle calls since the start of the run.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not contains(P, x, 0.0):
        if not contains(P, x, config.active_tol):
            raise InfeasiblePointError("starting point is infeasible")
        x = project(P, None, x, tol=config.projection_tol)
    calls0 = bundle.grad_calls
    start = time.perf_counter()

    def record(it, fx, escaped, label=None, size=None):
        rec = TrajectoryRecord(it, x.copy(), fx, escaped, label, size, bundle.grad_calls - calls0,
                               (time.perf_counter() - start) * 1e3)
        records.append(rec)
        if callback is not None:
            callback(rec)

    records: List[TrajectoryRecord] = []
    fx = float(bundle.value(x))
    record(0, fx, False)
    limit = config.outer_limit(fx)
    for it in range(1, limit + 1):
        out = houdini_escape(bundle, P, x, config.delta, config.xi, (config.seed, it),
                             fail_prob=config.fail_prob, max_subsets=config.max_subsets,
                             feas_tol=config.active_tol, projection_tol=config.projection_tol,
                             root_tol=config.root_tol)
        if not out.escaped:
            record(it, fx, False)
            return SospResult(x, records, out.complete)
        x = out.point
        fx = out.value
        record(it, fx, True, out.case_label.value, len(out.subset))
    return SospResult(x, records, False)
