"""Graph-partition benchmark: ``x.A x / 2`` over the box ``[-1, 1]^n`` for
the adjacency matrix ``A`` of an Erdos-Renyi graph, started at the origin.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._rng import stream
from .driver import RunConfig, TrajectoryRecord, find_sosp
from .objectives import graph_partition
from .oracle import OracleBundle
from .polyhedron import ACTIVE_TOL, Polyhedron

CSV_HEADER = ("iter", "f_value", "integral_fraction", "escaped", "case_label", "subset_size",
              "grad_calls", "wall_ms")
DEFAULT_MAX_SUBSETS = 2000


@dataclass(frozen=True)
class ErConfig:
    n: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")


@dataclass(frozen=True)
class ExperimentSummary:
    final_objective: float
    integral_fraction: float
    iterations: int
    grad_calls: int
    wall_time_s: float
    certified: bool


def erdos_renyi(cfg: ErConfig) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix with zero diagonal; each unordered
    pair is an edge independently with probability ``p``.
    """
    rng = stream(cfg.seed, "erdos-renyi")
    draws = rng.random((cfg.n, cfg.n))
    upper = np.triu(draws < cfg.p, k=1)
    return (upper | upper.T).astype(float)


def spectral_radius_estimate(A, iters: int = 500, seed: int = 0) -> float:
    """Largest ``|eigenvalue|`` of a symmetric matrix by power iteration on
    ``A @ A`` (which avoids oscillation between ``+lam`` and ``-lam``).
    """
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    x = stream(seed, "spectral-radius").standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    lam2 = 0.0
    for _ in range(iters):
        y = A @ (A @ x)
        n = np.linalg.norm(y)
        if n == 0.0:
            return 0.0
        lam2 = float(x @ y)
        x = y / n
    return float(np.sqrt(max(lam2, 0.0)))


def partition_problem(A, *, delta: float, r: float):
    """Oracle bundle and box polyhedron of the partition relaxation.

    ``L`` is 1.05 times a power-iteration estimate of the spectral radius.
    A quadratic has no Hessian variation, so ``rho`` is set to
    ``delta / r^3``, which makes the trust radius equal to ``r``.
    """
    A = np.asarray(A, dtype=float)
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency matrix must be symmetric")
    L = max(1.05 * spectral_radius_estimate(A), 1e-12)
    bundle = graph_partition(A, rho=delta / r ** 3, L=L)
    return bundle, Polyhedron.box(A.shape[0])


def integral_fraction(x, active_tol: float = ACTIVE_TOL) -> float:
    x = np.asarray(x)
    return float(np.mean(np.abs(x) >= 1.0 - 10.0 * active_tol))


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_rows(records: Sequence[TrajectoryRecord], active_tol: float = ACTIVE_TOL):
    for rec in records:
        yield [str(rec.iter), _fmt(rec.f_value), _fmt(integral_fraction(rec.x, active_tol)),
               "1" if rec.escaped else "0", rec.case_label or "",
               "" if rec.subset_size is None else str(rec.subset_size), str(rec.grad_calls),
               f"{rec.wall_ms:.3f}"]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ErConfig, delta: float, r: float, seed: int,
                   out_path=None, *, max_subsets: Optional[int] = DEFAULT_MAX_SUBSETS,
                   max_outer_iters: Optional[int] = None, xi: float = 1e-8) -> ExperimentSummary:
    """Run the escape loop from ``x = 0`` and optionally write the trajectory.

    ``max_subsets`` bounds the constraint subsets examined per escape step.
    Near the end of a run most box constraints are tight and enumerating all
    their subsets is exponential; with the cap the final point is reported
    as not certified.
    """
    A = erdos_renyi(cfg)
    bundle, P = partition_problem(A, delta=delta, r=r)
    config = RunConfig(delta=delta, xi=xi, seed=seed, max_subsets=max_subsets,
                       max_outer_iters=max_outer_iters)
    t0 = time.perf_counter()
    res = find_sosp(bundle, P, np.zeros(cfg.n), config)
    wall = time.perf_counter() - t0
    if out_path is not None:
        write_csv(Path(out_path), CSV_HEADER, trajectory_rows(res.records, config.active_tol))
    last = res.records[-1]
    return ExperimentSummary(final_objective=last.f_value,
                             integral_fraction=integral_fraction(res.x, config.active_tol),
                             iterations=len(res.records) - 1, grad_calls=last.grad_calls,
                             wall_time_s=wall, certified=res.certified)
