"""Command-line front end: ``entropic-bridge <supply|strategy|simulate|verify> problem.json``.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 conditioning
guard, 4 Monte Carlo estimate outside its confidence band.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bridge, matfun, montecarlo, strategy, verification
from .bridge import BridgeProblem
from .errors import BridgeError, ConditioningError, ConfigError, PositivityViolation, SolverError, StepSizeError
from .nominal import GaussianState, SystemModel

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_CONDITIONING, EXIT_STATISTICAL = 0, 1, 2, 3, 4

DEFAULT_STEPS = strategy.DEFAULT_STEPS
DEFAULT_PATHS = 10_000
DEFAULT_SEED = 42

REQUIRED_KEYS = ("A", "B", "mu", "T", "alpha0", "Pi0", "alphaT", "PiT")


class InputError(BridgeError, ValueError):
    """Problem file is missing a key or has a malformed value."""


@dataclass
class ProblemFile:
    problem: BridgeProblem
    sim: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)


def _matrix(doc: dict, key: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    try:
        M = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f'"{key}" is not a numeric matrix: {exc}') from None
    if M.ndim != 2:
        raise InputError(f'"{key}" must be a list of rows, got {M.ndim}-d data')
    if rows is not None and M.shape[0] != rows:
        raise InputError(f'"{key}" must have {rows} rows, got {M.shape[0]}')
    if cols is not None and M.shape[1] != cols:
        raise InputError(f'"{key}" must have {cols} columns, got {M.shape[1]}')
    if not np.all(np.isfinite(M)):
        raise InputError(f'"{key}" has non-finite entries')
    return M


def _vector(doc: dict, key: str, n: int) -> np.ndarray:
    try:
        v = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f'"{key}" is not a numeric array: {exc}') from None
    if v.shape != (n,):
        raise InputError(f'"{key}" must be an array of length {n}, got shape {v.shape}')
    if not np.all(np.isfinite(v)):
        raise InputError(f'"{key}" has non-finite entries')
    return v


def _covariance(doc: dict, key: str, n: int) -> np.ndarray:
    P = _matrix(doc, key, n, n)
    try:
        return matfun.as_spd(P, key)
    except BridgeError as exc:
        raise InputError(str(exc)) from None


def parse_problem(doc) -> ProblemFile:
    """Validate a decoded JSON document; errors name the offending key."""
    if not isinstance(doc, dict):
        raise InputError("problem file must contain a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise InputError(f"missing key(s): {', '.join(missing)}")
    A = _matrix(doc, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise InputError(f'"A" must be square, got {A.shape}')
    B = _matrix(doc, "B", rows=n)
    mu = _vector(doc, "mu", n)
    try:
        T = float(doc["T"])
    except (TypeError, ValueError):
        raise InputError('"T" must be a number') from None
    if not (T > 0 and math.isfinite(T)):
        raise InputError(f'"T" must be positive and finite, got {doc["T"]}')
    alpha0, alphaT = _vector(doc, "alpha0", n), _vector(doc, "alphaT", n)
    Pi0, PiT = _covariance(doc, "Pi0", n), _covariance(doc, "PiT", n)
    try:
        model = SystemModel(A, B, mu)
    except ConditioningError:
        raise
    except BridgeError as exc:
        raise InputError(f'"A"/"B": {exc}') from None
    problem = BridgeProblem(model, T, GaussianState(alpha0, Pi0), GaussianState(alphaT, PiT))

    sections = {}
    for name, allowed in (("sim", {"paths", "dt", "seed"}), ("grid", {"steps", "eps_term"})):
        sec = doc.get(name, {}) or {}
        if not isinstance(sec, dict):
            raise InputError(f'"{name}" must be an object')
        extra = set(sec) - allowed
        if extra:
            raise InputError(f'"{name}" has unknown key(s): {", ".join(sorted(extra))}')
        sections[name] = dict(sec)
    return ProblemFile(problem, sections["sim"], sections["grid"])


def load_problem(path: str | os.PathLike) -> ProblemFile:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    return parse_problem(doc)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    """Write rows atomically: a temp file in the target directory, then ``os.replace``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent if str(target.parent) else ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def strategy_header(n: int, m: int) -> list[str]:
    r = range(1, n + 1)
    return (
        ["t"]
        + [f"alpha_{i}" for i in r]
        + [f"Pi_{i}{j}" for i in r for j in r]
        + [f"beta_{i}" for i in range(1, m + 1)]
        + [f"K_{i}{j}" for i in range(1, m + 1) for j in r]
        + ["cum_mean_cost", "cum_cov_cost"]
    )


def strategy_rows(path: strategy.StrategyPath):
    for k in range(len(path)):
        yield np.concatenate(
            [
                [path.times[k]],
                path.alpha[k],
                path.Pi[k].ravel(),
                path.beta[k],
                path.K[k].ravel(),
                [path.cum_mean_cost[k], path.cum_cov_cost[k]],
            ]
        )


def _grid_settings(pf: ProblemFile, args) -> tuple[int, float | None]:
    steps = args.steps if getattr(args, "steps", None) is not None else pf.grid.get("steps", DEFAULT_STEPS)
    eps = args.eps_term if getattr(args, "eps_term", None) is not None else pf.grid.get("eps_term")
    try:
        steps = int(steps)
        eps = None if eps is None else float(eps)
    except (TypeError, ValueError):
        raise ConfigError("grid settings must be numeric") from None
    return steps, eps


def cmd_supply(args) -> int:
    pf = load_problem(args.file)
    s = bridge.total_supply(pf.problem)
    print(f"mean_part={_fmt(s.mean_part)}")
    print(f"cov_part={_fmt(s.cov_part)}")
    print(f"total={_fmt(s.total)}")
    if args.out:
        write_csv(args.out, ["mean_part", "cov_part", "total"], [[s.mean_part, s.cov_part, s.total]])
    return EXIT_OK


def cmd_strategy(args) -> int:
    pf = load_problem(args.file)
    steps, eps = _grid_settings(pf, args)
    path = strategy.integrate_bridge(pf.problem, steps, eps)
    p = pf.problem
    print(f"nodes={len(path)}")
    print(f"mean_cost={_fmt(path.mean_cost)}")
    print(f"cov_cost={_fmt(path.cov_cost)}")
    print(f"terminal_cov_error={_fmt(path.terminal_cov_error)}")
    print(f"terminal_mean_error={_fmt(path.terminal_mean_error)}")
    if args.out:
        write_csv(args.out, strategy_header(p.n, p.model.m), strategy_rows(path))
    return EXIT_OK


def cmd_simulate(args) -> int:
    pf = load_problem(args.file)
    p = pf.problem
    sim = dict(pf.sim)
    for key in ("paths", "dt", "seed"):
        if getattr(args, key) is not None:
            sim[key] = getattr(args, key)
    try:
        config = montecarlo.SimConfig(
            paths=int(sim.get("paths", DEFAULT_PATHS)),
            dt=None if sim.get("dt") is None else float(sim["dt"]),
            seed=int(sim.get("seed", DEFAULT_SEED)),
        )
    except (TypeError, ValueError):
        raise ConfigError("sim settings must be numeric") from None
    config.validate(p.T, p.n)
    steps, eps = _grid_settings(pf, args)
    path = strategy.integrate_bridge(p, steps, eps)
    res = montecarlo.simulate(p, path, config)
    J = bridge.total_supply(p).total
    mean_err = float(np.linalg.norm(res.mean_hat - p.theta.alpha))
    cov_err = float(np.linalg.norm(res.cov_hat - p.theta.Pi))
    row = [res.supply_hat, res.supply_stderr, mean_err, cov_err, J]
    for name, value in zip(("supply_hat", "supply_stderr", "mean_err_norm", "cov_err_fro", "J_closed_form"), row):
        print(f"{name}={_fmt(value)}")
    if args.out:
        write_csv(args.out, ["supply_hat", "supply_stderr", "mean_err_norm", "cov_err_fro", "J_closed_form"], [row])
    if abs(res.supply_hat - J) > montecarlo.CI_SIGMAS * res.supply_stderr:
        print(f"supply estimate {res.supply_hat:.6g} is more than 3 stderr from {J:.6g}", file=sys.stderr)
        return EXIT_STATISTICAL
    return EXIT_OK


def cmd_verify(args) -> int:
    pf = load_problem(args.file)
    checks = verification.run_checks(pf.problem, args.which)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entropic-bridge", description="Minimum relative-entropy noise supply between Gaussian laws.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("supply", help="closed-form supply")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_supply)

    p = sub.add_parser("strategy", help="integrate the optimal closed loop")
    p.add_argument("file")
    p.add_argument("--steps", type=int)
    p.add_argument("--eps-term", type=float, dest="eps_term")
    p.add_argument("--out")
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("simulate", help="Monte Carlo check of the supply")
    p.add_argument("file")
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--eps-term", type=float, dest="eps_term")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run numerical checks")
    p.add_argument("file")
    p.add_argument("which", nargs="?", default="all", choices=[*verification.CHECKS, "all"])
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConditioningError as exc:
        print(f"error: ill-conditioned problem: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except (PositivityViolation, SolverError, StepSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (BridgeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
