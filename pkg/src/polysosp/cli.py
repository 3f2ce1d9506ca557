"""Command-line interface.

Subcommands::

    solve          --problem FILE [--delta D] [--r R] [--xi X] [--seed N]
                   [--max-iters N] [--max-subsets N] [--out traj.csv]
    corner-escape  --problem FILE [--delta D] [--r R] [--seed N]
    bench er       --n N --p P --delta D --r R --seed S --out traj.csv
                   [--max-subsets N]
    gen er         --n N --p P --seed S --out problem.json [--delta D] [--r R]

Exit status: 0 on success, 1 when ``corner-escape`` finds no escape, 2 on
invalid input. Values given on the command line override the problem file.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .bench import (CSV_HEADER, DEFAULT_MAX_SUBSETS, ErConfig, erdos_renyi, integral_fraction,
                    run_experiment, spectral_radius_estimate, write_csv)
from .corner import QcspInstance, escape_corner
from .driver import RunConfig, find_sosp
from .objectives import cubic_mix, quadratic, rotation_pairs_matrix, spectral_norm
from .oracle import DEFAULT_XI, OracleBundle
from .polyhedron import ACTIVE_TOL, Polyhedron, active_set

OBJECTIVE_TYPES = ("quadratic", "graph_partition", "rotated_saddle", "cubic_mix")
SOLVE_HEADER = ("iter", "f_value", "escaped", "case_label", "subset_size", "grad_calls",
                "wall_ms")


class ProblemError(ValueError):
    """Invalid problem description; the message starts with the field path."""


@dataclass
class ProblemFile:
    """Validated contents of a problem file."""

    d: int
    objective: dict
    A: np.ndarray
    b: np.ndarray
    L: Optional[float]
    rho: Optional[float]
    sigma: float
    delta: float
    r: Optional[float]
    xi: float
    seed: int
    x0: np.ndarray
    max_outer_iters: Optional[int] = None
    max_subsets: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def polyhedron(self) -> Polyhedron:
        return Polyhedron(self.A, self.b, d=self.d)

    def rho_value(self) -> float:
        """``rho`` implied by the run radius when given, else the stated one."""
        if self.r is not None:
            return self.delta / self.r ** 3
        if self.rho is None:
            raise ProblemError("smoothness.rho: missing field (or give run.r)")
        return self.rho

    def hessian(self) -> Optional[np.ndarray]:
        """Constant Hessian of quadratic objectives, else ``None``."""
        obj = self.objective
        kind = obj["type"]
        if kind == "quadratic":
            return obj["M"]
        if kind == "graph_partition":
            return obj["adjacency"]
        if kind == "rotated_saddle":
            return rotation_pairs_matrix(self.d)
        return None

    def bundle(self) -> OracleBundle:
        rho = self.rho_value()
        obj = self.objective
        kind = obj["type"]
        if kind == "cubic_mix":
            b = cubic_mix(self.d, obj.get("Q"), rho=max(rho, 1.0), sigma=self.sigma)
            if self.L is not None:
                b.L = self.L
            return b
        H = self.hessian()
        if self.L is not None:
            L = self.L
        elif kind == "graph_partition":
            L = max(1.05 * spectral_radius_estimate(H), 1e-12)
        else:
            L = max(spectral_norm(H), 1e-12)
        v = obj.get("v") if kind == "quadratic" else None
        c = obj.get("c", 0.0) if kind == "quadratic" else 0.0
        return quadratic(H, v, c, rho=rho, L=L, sigma=self.sigma)


# ---------------------------------------------------------------------------
# validation helpers

def _get(obj: dict, key: str, path: str, required: bool = True, default=None):
    if not isinstance(obj, dict):
        raise ProblemError(f"{path}: expected an object")
    if key not in obj:
        if required:
            raise ProblemError(f"{path + '.' if path else ''}{key}: missing field")
        return default
    return obj[key]


def _number(val, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ProblemError(f"{path}: expected a number, got {type(val).__name__}")
    val = float(val)
    if not math.isfinite(val):
        raise ProblemError(f"{path}: non-finite number {val}")
    if positive and not val > 0:
        raise ProblemError(f"{path}: must be positive, got {val}")
    if nonneg and val < 0:
        raise ProblemError(f"{path}: must be nonnegative, got {val}")
    return val


def _integer(val, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        if isinstance(val, float) and val.is_integer():
            val = int(val)
        else:
            raise ProblemError(f"{path}: expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ProblemError(f"{path}: must be at least {minimum}, got {val}")
    return val


def _vector(val, path: str, length: Optional[int] = None, what: str = "d") -> np.ndarray:
    if not isinstance(val, list):
        raise ProblemError(f"{path}: expected an array")
    if length is not None and len(val) != length:
        raise ProblemError(f"{path}: expected {what}={length} entries, got {len(val)}")
    return np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(val)], dtype=float)


def _matrix(val, path: str, rows: Optional[int] = None, cols: Optional[int] = None,
            what: str = "d") -> np.ndarray:
    if not isinstance(val, list) or any(not isinstance(r, list) for r in val):
        raise ProblemError(f"{path}: expected an array of arrays (row-major)")
    if rows is not None and len(val) != rows:
        raise ProblemError(f"{path}: expected {what}={rows} rows, got {len(val)}")
    out = []
    width = cols
    for i, row in enumerate(val):
        if width is None:
            width = len(row)
        if len(row) != width:
            raise ProblemError(f"{path}[{i}]: expected {width} entries, got {len(row)}")
        out.append([_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    if not out:
        return np.zeros((0, width or 0))
    return np.array(out, dtype=float)


def _symmetric(M: np.ndarray, path: str) -> np.ndarray:
    if M.shape[0] != M.shape[1]:
        raise ProblemError(f"{path}: expected a square matrix, got {M.shape[0]}x{M.shape[1]}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise ProblemError(f"{path}: matrix is not symmetric")
    return 0.5 * (M + M.T)


def _parse_objective(obj, path="objective"):
    kind = _get(obj, "type", path)
    if kind not in OBJECTIVE_TYPES:
        raise ProblemError(f"{path}.type: unknown objective {kind!r}; "
                           f"expected one of {', '.join(OBJECTIVE_TYPES)}")
    out: dict[str, Any] = {"type": kind}
    dim = None
    if kind == "quadratic":
        M = _symmetric(_matrix(_get(obj, "M", path), f"{path}.M"), f"{path}.M")
        dim = M.shape[0]
        out["M"] = M
        if "v" in obj:
            out["v"] = _vector(obj["v"], f"{path}.v", dim)
        out["c"] = _number(obj.get("c", 0.0), f"{path}.c")
    elif kind == "graph_partition":
        if "adjacency" in obj:
            A = _symmetric(_matrix(obj["adjacency"], f"{path}.adjacency"), f"{path}.adjacency")
            if np.any(np.diag(A) != 0):
                raise ProblemError(f"{path}.adjacency: diagonal must be zero")
        elif "er" in obj:
            er = obj["er"]
            cfg = ErConfig(_integer(_get(er, "n", f"{path}.er"), f"{path}.er.n", 1),
                           _number(_get(er, "p", f"{path}.er"), f"{path}.er.p"),
                           _integer(er.get("seed", 0), f"{path}.er.seed"))
            A = erdos_renyi(cfg)
        else:
            raise ProblemError(f"{path}.adjacency: missing field (or give {path}.er)")
        out["adjacency"] = A
        dim = A.shape[0]
    elif kind == "cubic_mix" and "Q" in obj:
        out["Q"] = _symmetric(_matrix(obj["Q"], f"{path}.Q"), f"{path}.Q")
        dim = out["Q"].shape[0]
    return out, dim


def _check_dim(found: dict, path: str, value: int):
    for other, d in found.items():
        if d != value:
            raise ProblemError(f"{path}: dimension {value} disagrees with {other} ({d})")
    found[path] = value


def problem_from_dict(data: Any) -> ProblemFile:
    """Validate a parsed problem description."""
    if not isinstance(data, dict):
        raise ProblemError("<root>: expected an object")
    dims: dict[str, int] = {}
    if "dimension" in data:
        _check_dim(dims, "dimension", _integer(data["dimension"], "dimension", 1))
    objective, odim = _parse_objective(_get(data, "objective", ""))
    if odim is not None:
        _check_dim(dims, "objective", odim)

    cons = data.get("constraints")
    A = b = None
    if cons is None:
        if objective["type"] != "graph_partition":
            raise ProblemError("constraints: missing field")
    else:
        A = _matrix(_get(cons, "A", "constraints"), "constraints.A")
        if A.shape[0]:
            _check_dim(dims, "constraints.A", A.shape[1])
        b = _vector(_get(cons, "b", "constraints"), "constraints.b", A.shape[0], "k")

    run = _get(data, "run", "")
    x0 = None
    if "x0" in run:
        x0 = _vector(run["x0"], "run.x0", dims.get(next(iter(dims))) if dims else None)
        _check_dim(dims, "run.x0", x0.shape[0])
    if not dims:
        raise ProblemError("dimension: cannot infer the dimension; add a dimension field")
    d = next(iter(dims.values()))
    if A is None:
        box = Polyhedron.box(d)
        A, b = np.array(box.A), np.array(box.b)
    elif A.shape[0] == 0:
        A = np.zeros((0, d))
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        raise ProblemError(f"constraints.A[{int(np.flatnonzero(norms == 0)[0])}]: zero row")

    smooth = data.get("smoothness", {})
    L = rho = None
    if "L" in smooth:
        L = _number(smooth["L"], "smoothness.L", positive=True)
    if "rho" in smooth:
        rho = _number(smooth["rho"], "smoothness.rho", positive=True)
    sigma = _number(data.get("noise", {}).get("sigma", 0.0), "noise.sigma", nonneg=True)

    delta = _number(_get(run, "delta", "run"), "run.delta", positive=True)
    r = _number(run["r"], "run.r", positive=True) if run.get("r") is not None else None
    xi = _number(run.get("xi", DEFAULT_XI), "run.xi", positive=True)
    seed = _integer(run.get("seed", 0), "run.seed")
    max_iters = (_integer(run["max_outer_iters"], "run.max_outer_iters", 1)
                 if run.get("max_outer_iters") is not None else None)
    max_subsets = (_integer(run["max_subsets"], "run.max_subsets", 1)
                   if run.get("max_subsets") is not None else None)
    if r is None and rho is None:
        raise ProblemError("smoothness.rho: missing field (or give run.r)")
    return ProblemFile(d=d, objective=objective, A=A, b=b, L=L, rho=rho, sigma=sigma,
                       delta=delta, r=r, xi=xi, seed=seed,
                       x0=np.zeros(d) if x0 is None else x0, max_outer_iters=max_iters,
                       max_subsets=max_subsets)


def parse_problem(path) -> ProblemFile:
    """Read and validate a JSON problem file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ProblemError(f"{path}: cannot read file ({exc.strerror or exc})") from exc
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                           f"{exc.msg}") from exc
    return problem_from_dict(data)


def problem_to_dict(prob: ProblemFile) -> dict:
    """Inverse of :func:`problem_from_dict` for writing files."""
    obj: dict[str, Any] = {"type": prob.objective["type"]}
    for key, val in prob.objective.items():
        if key != "type":
            obj[key] = val.tolist() if isinstance(val, np.ndarray) else val
    run: dict[str, Any] = {"delta": prob.delta, "xi": prob.xi, "seed": prob.seed,
                           "x0": prob.x0.tolist()}
    if prob.r is not None:
        run["r"] = prob.r
    out: dict[str, Any] = {"dimension": prob.d, "objective": obj,
                           "constraints": {"A": prob.A.tolist(), "b": prob.b.tolist()},
                           "noise": {"sigma": prob.sigma}, "run": run}
    smooth = {}
    if prob.L is not None:
        smooth["L"] = prob.L
    if prob.rho is not None:
        smooth["rho"] = prob.rho
    out["smoothness"] = smooth
    return out


# ---------------------------------------------------------------------------
# subcommands

def _apply_overrides(prob: ProblemFile, args) -> ProblemFile:
    for name in ("delta", "r", "xi", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(prob, name, val)
    if getattr(args, "max_iters", None) is not None:
        prob.max_outer_iters = args.max_iters
    if getattr(args, "max_subsets", None) is not None:
        prob.max_subsets = args.max_subsets
    return prob


def _cmd_solve(args) -> int:
    prob = _apply_overrides(parse_problem(args.problem), args)
    bundle = prob.bundle()
    config = RunConfig(delta=prob.delta, xi=prob.xi, seed=prob.seed,
                       max_outer_iters=prob.max_outer_iters, max_subsets=prob.max_subsets)
    res = find_sosp(bundle, prob.polyhedron(), prob.x0, config)
    if args.out:
        rows = ([str(r.iter), repr(float(r.f_value)), "1" if r.escaped else "0",
                 r.case_label or "", "" if r.subset_size is None else str(r.subset_size),
                 str(r.grad_calls), f"{r.wall_ms:.3f}"] + [repr(float(v)) for v in r.x]
                for r in res.records)
        header = SOLVE_HEADER + tuple(f"x{i}" for i in range(prob.d))
        write_csv(args.out, header, rows)
    escapes = sum(r.escaped for r in res.records)
    summary = {"status": "sosp" if res.certified else "stopped", "certified": res.certified,
               "escapes": escapes, "f_value": res.records[-1].f_value,
               "grad_calls": res.records[-1].grad_calls, "x": res.x.tolist()}
    print(json.dumps(summary))
    return 0


def _cmd_corner(args) -> int:
    prob = _apply_overrides(parse_problem(args.problem), args)
    H = prob.hessian()
    if H is None:
        raise ProblemError("objective.type: corner-escape needs a quadratic objective")
    bundle = prob.bundle()
    P = prob.polyhedron()
    x0 = prob.x0
    g = bundle.gradient(x0)
    if np.linalg.norm(g) > 1e-9 * max(1.0, float(np.max(np.abs(H)))):
        raise ProblemError("run.x0: corner-escape needs a zero gradient at the corner")
    try:
        act = active_set(P, x0, ACTIVE_TOL)
    except ValueError as exc:
        raise ProblemError(f"run.x0: {exc}") from exc
    if len(act) != P.k:
        raise ProblemError("constraints: corner-escape needs every constraint tight at run.x0")
    cone = Polyhedron(P.A, np.zeros(P.k), d=P.d)
    r = prob.r if prob.r is not None else float(np.cbrt(prob.delta / prob.rho_value()))
    inst = QcspInstance(np.array(H), cone, prob.delta, r, bundle.L)
    y = escape_corner(inst, rng_seed=prob.seed)
    if y is None:
        print(json.dumps({"status": "no-escape"}))
        return 1
    point = x0 + y
    print(json.dumps({"status": "escaped", "point": point.tolist(),
                      "f_value": float(bundle.value(point)),
                      "f_base": float(bundle.value(x0))}))
    return 0


def _cmd_bench(args) -> int:
    cfg = ErConfig(args.n, args.p, args.seed)
    s = run_experiment(cfg, args.delta, args.r, args.seed, args.out,
                       max_subsets=args.max_subsets)
    print(json.dumps({"final_objective": s.final_objective,
                      "integral_fraction": s.integral_fraction, "iterations": s.iterations,
                      "grad_calls": s.grad_calls, "wall_time_s": round(s.wall_time_s, 3),
                      "certified": s.certified}))
    return 0


def _cmd_gen(args) -> int:
    A = erdos_renyi(ErConfig(args.n, args.p, args.seed))
    data = {"dimension": args.n,
            "objective": {"type": "graph_partition",
                          "adjacency": A.astype(int).tolist()},
            "run": {"delta": args.delta, "r": args.r, "seed": args.seed}}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
        fh.write("\n")
    return 0


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return val


def _positive_float(text):
    val = float(text)
    if not (math.isfinite(val) and val > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return val


def _probability(text):
    val = float(text)
    if not 0.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a probability in [0, 1], got {text}")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polysosp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the escape loop on a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--delta", type=_positive_float)
    p.add_argument("--r", type=_positive_float)
    p.add_argument("--xi", type=_positive_float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=_positive_int)
    p.add_argument("--max-subsets", type=_positive_int)
    p.add_argument("--out", help="trajectory CSV")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("corner-escape", help="escape a quadratic saddle at a cone apex")
    p.add_argument("--problem", required=True)
    p.add_argument("--delta", type=_positive_float)
    p.add_argument("--r", type=_positive_float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_corner)

    p = sub.add_parser("bench", help="graph-partition benchmark")
    bsub = p.add_subparsers(dest="family", required=True)
    q = bsub.add_parser("er", help="Erdos-Renyi graph")
    q.add_argument("--n", type=_positive_int, required=True)
    q.add_argument("--p", type=_probability, required=True)
    q.add_argument("--delta", type=_positive_float, required=True)
    q.add_argument("--r", type=_positive_float, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--max-subsets", type=_positive_int, default=DEFAULT_MAX_SUBSETS)
    q.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gen", help="write a problem file")
    gsub = p.add_subparsers(dest="family", required=True)
    q = gsub.add_parser("er", help="graph-partition problem on an Erdos-Renyi graph")
    q.add_argument("--n", type=_positive_int, required=True)
    q.add_argument("--p", type=_probability, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--delta", type=_positive_float, default=1e-2)
    q.add_argument("--r", type=_positive_float, default=1e-1)
    q.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
