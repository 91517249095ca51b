"""Command-line front end.

Subcommands: list-problems, check-cq, solve, verify, pareto.  Exit
codes: 0 success, 1 solver non-convergence, 2 constraint-qualification
failure, 3 first-order verification failure, 64 usage error, 74 I/O
error.  Identical configuration (including the seed) produces
byte-identical CSV/JSON outputs in single-threaded mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParocError
from .kkt import KKTTolerances, reconstruct_multipliers, verify_kkt
from .model import Grid, Trajectory
from .problems import get_problem, param_specs, problem_names
from .cq import evaluate_cqs
from .solve import SolveOptions, pareto_sweep, solve_scalarized
from . import report as report_mod

EXIT_OK = 0
EXIT_NOCONV = 1
EXIT_CQ = 2
EXIT_KKT = 3
EXIT_USAGE = 64
EXIT_IO = 74


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str = ""
    overrides: dict = field(default_factory=dict)
    grid_n: int = 1000
    weights: list[float] | None = None
    weight_count: int | None = None
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    output_dir: str = "paroc-out"
    traj_file: str | None = None
    figures: bool = True
    bundles: bool = False

    def validate(self) -> None:
        if self.grid_n < 10:
            raise UsageError("grid_n must be at least 10")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
                raise UsageError("weights must be nonnegative and sum to 1")

    def echo(self) -> dict:
        return {
            "problem": self.problem,
            "overrides": dict(self.overrides),
            "grid_n": self.grid_n,
            "weights": self.weights,
            "weight_count": self.weight_count,
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
            "jobs": self.jobs,
            "output_dir": self.output_dir,
        }


def _parse_set(pairs: list[str]) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key.strip()] = float(val)
        except ValueError as exc:
            raise UsageError(f"--set {key}: {val!r} is not a number") from exc
    return out


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        for key, val in loaded.items():
            if not hasattr(cfg, key):
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, val)
    if getattr(args, "problem", None):
        cfg.problem = args.problem
    cfg.overrides.update(_parse_set(getattr(args, "set", None)))
    if getattr(args, "grid_n", None) is not None:
        cfg.grid_n = args.grid_n
    if getattr(args, "weights", None):
        try:
            cfg.weights = [float(v) for v in args.weights.split(",")]
        except ValueError as exc:
            raise UsageError("--weights expects a comma-separated number list") from exc
    if getattr(args, "weight_count", None) is not None:
        cfg.weight_count = args.weight_count
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "traj", None):
        cfg.traj_file = args.traj
    if getattr(args, "no_figures", False):
        cfg.figures = False
    if getattr(args, "bundles", False):
        cfg.bundles = True
    cfg.validate()
    return cfg


def _tolerances(cfg: RunConfig) -> KKTTolerances:
    known = {f for f in KKTTolerances.__dataclass_fields__}
    bad = set(cfg.tolerances) - known
    if bad:
        raise UsageError(f"unknown tolerance keys: {sorted(bad)}")
    values = dict(cfg.tolerances)
    values.setdefault("direction_seed", cfg.seed)
    return KKTTolerances(**values)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    return out


def _report_envelope(cfg: RunConfig, tol: KKTTolerances, payload: dict) -> dict:
    return {
        "version": __version__,
        "config": cfg.echo(),
        "grid_n": cfg.grid_n,
        "tolerances": tol.to_dict(),
        **payload,
    }


def _load_trajectory(path: str) -> tuple[str, dict, Trajectory, list[float] | None]:
    data = json.loads(Path(path).read_text())
    grid = Grid(int(data["grid_n"]))
    traj = Trajectory(grid=grid, x=np.asarray(data["x"], dtype=float),
                      u=np.asarray(data["u"], dtype=float))
    return data["problem"], dict(data.get("overrides", {})), traj, data.get("weights")


def _solve_weights(cfg: RunConfig, k: int) -> np.ndarray:
    if cfg.weights is not None:
        if len(cfg.weights) != k:
            raise UsageError(f"expected {k} weights, got {len(cfg.weights)}")
        return np.asarray(cfg.weights, dtype=float)
    if k == 1:
        return np.ones(1)
    raise UsageError(f"this problem has {k} objectives; pass --weights")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_list_problems(_: argparse.Namespace) -> int:
    for name in problem_names():
        problem = get_problem(name)
        print(f"{name} (n={problem.n}, m={problem.m}, k={problem.k}, r={problem.r})")
        for key, spec in sorted(param_specs(name).items()):
            print(f"    {key} = {spec.default} in [{spec.lo}, {spec.hi}]  # {spec.doc}")
    return EXIT_OK


def _candidate_trajectory(cfg: RunConfig, problem) -> Trajectory:
    if cfg.traj_file:
        _, _, traj, _ = _load_trajectory(cfg.traj_file)
        return traj
    weights = cfg.weights
    if weights is None:
        weights = (np.ones(problem.k) / problem.k).tolist()
    res = solve_scalarized(problem, np.asarray(weights, dtype=float), None,
                           Grid(cfg.grid_n), SolveOptions())
    return res.traj


def cmd_check_cq(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if not cfg.problem:
        raise UsageError("check-cq needs --problem")
    tol = _tolerances(cfg)
    problem = get_problem(cfg.problem, cfg.overrides)
    traj = _candidate_trajectory(cfg, problem)
    rep = evaluate_cqs(problem, traj)
    out = _out_dir(cfg)
    report_mod.write_json(out / "cq_report.json",
                          _report_envelope(cfg, tol, {"cq": rep.to_dict()}))
    print(f"cq: route={rep.decisive_route} ok={rep.overall_ok} "
          f"(h2={rep.h2_ok}, h3={rep.h3_ok})")
    return EXIT_OK if rep.overall_ok else EXIT_CQ


def _write_solution(cfg: RunConfig, out: Path, problem, traj, mult, report, tol) -> None:
    report_mod.write_json(out / "trajectory.json",
                          report_mod.trajectory_payload(problem.name, cfg.overrides,
                                                        traj, cfg.weights))
    report_mod.write_json(out / "kkt_report.json",
                          _report_envelope(cfg, tol, {"kkt": report.to_dict()}))
    report_mod.write_json(out / "multipliers.json", _report_envelope(cfg, tol, {
        "lambda": mult.lam.tolist(),
        "l": mult.l.tolist(),
        "p": mult.p.tolist(),
        "theta": mult.theta.tolist(),
        "status": mult.status,
    }))
    if cfg.figures:
        report_mod.solution_figure(out / "solution.png", traj, mult)


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if not cfg.problem:
        raise UsageError("solve needs --problem")
    tol = _tolerances(cfg)
    problem = get_problem(cfg.problem, cfg.overrides)
    weights = _solve_weights(cfg, problem.k)
    cfg.weights = weights.tolist()
    res = solve_scalarized(problem, weights, None, Grid(cfg.grid_n), SolveOptions())
    lam = weights / float(np.linalg.norm(weights))
    mult = reconstruct_multipliers(problem, res.traj, lam, tol)
    report = verify_kkt(problem, res.traj, lam, tol, mult=mult)
    out = _out_dir(cfg)
    _write_solution(cfg, out, problem, res.traj, mult, report, tol)
    print(f"solve: converged={res.converged} kkt={report.passed} "
          f"objective={res.objective:.6g}")
    if not res.converged:
        return EXIT_NOCONV
    return EXIT_OK if report.passed else EXIT_KKT


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if not cfg.traj_file:
        raise UsageError("verify needs --traj FILE")
    tol = _tolerances(cfg)
    name, overrides, traj, saved_weights = _load_trajectory(cfg.traj_file)
    if cfg.problem and cfg.problem != name:
        raise UsageError(f"--problem {cfg.problem} does not match file ({name})")
    cfg.problem = name
    overrides.update(cfg.overrides)
    cfg.overrides = overrides
    cfg.grid_n = traj.grid.n_intervals
    problem = get_problem(name, overrides)
    weights = np.asarray(cfg.weights if cfg.weights is not None else saved_weights,
                         dtype=float) if (cfg.weights is not None or saved_weights) else None
    if weights is None:
        weights = _solve_weights(cfg, problem.k)
    lam = weights / float(np.linalg.norm(weights))
    mult = reconstruct_multipliers(problem, traj, lam, tol)
    report = verify_kkt(problem, traj, lam, tol, mult=mult)
    out = _out_dir(cfg)
    _write_solution(cfg, out, problem, traj, mult, report, tol)
    print(f"verify: kkt={report.passed} stationarity={report.stationarity_resid:.3e} "
          f"primal={report.primal_feas:.3e}")
    return EXIT_OK if report.passed else EXIT_KKT


def cmd_pareto(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if not cfg.problem:
        raise UsageError("pareto needs --problem")
    count = cfg.weight_count if cfg.weight_count is not None else 11
    if count < 1:
        raise UsageError("weight-count must be at least 1")
    tol = _tolerances(cfg)
    problem = get_problem(cfg.problem, cfg.overrides)
    sweep = pareto_sweep(problem, count, Grid(cfg.grid_n), SolveOptions(), tol,
                         jobs=cfg.jobs)
    out = _out_dir(cfg)
    rows = [{"weights": pt.weights, "J": pt.J, "converged": True,
             "kkt_pass": pt.kkt_pass} for pt in sweep.points]
    (out / "front.csv").write_text(report_mod.front_csv_text(problem.k, rows))
    report_mod.write_json(out / "sweep_report.json", _report_envelope(cfg, tol, {
        "attempted": sweep.attempted,
        "converged": len(sweep.points) + 0,
        "kept": len(sweep.points),
        "kkt_pass_count": sum(1 for pt in sweep.points if pt.kkt_pass),
        "failures": sweep.failures,
    }))
    if cfg.bundles:
        for idx, pt in enumerate(sweep.points):
            bundle = out / f"point_{idx:03d}"
            bundle.mkdir(exist_ok=True)
            report_mod.write_json(bundle / "trajectory.json",
                                  report_mod.trajectory_payload(
                                      problem.name, cfg.overrides, pt.traj,
                                      pt.weights.tolist()))
            report_mod.write_json(bundle / "kkt_report.json",
                                  _report_envelope(cfg, tol, {"kkt": pt.kkt.to_dict()}))
    if cfg.figures and sweep.points:
        report_mod.front_figure(out / "front.png", np.array([pt.J for pt in sweep.points]))
    print(f"pareto: attempted={sweep.attempted} kept={len(sweep.points)} "
          f"kkt_pass={sum(1 for pt in sweep.points if pt.kkt_pass)} "
          f"failures={len(sweep.failures)}")
    return EXIT_OK if sweep.points else EXIT_NOCONV


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--problem", help="registry problem name")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="parameter override (repeatable)")
    sub.add_argument("--grid-n", dest="grid_n", type=int, help="grid intervals (default 1000)")
    sub.add_argument("--weights", help="comma-separated simplex weights")
    sub.add_argument("--weight-count", dest="weight_count", type=int,
                     help="number of sweep weights")
    sub.add_argument("--seed", type=int, help="RNG seed")
    sub.add_argument("--jobs", type=int, help="parallel solves (cold starts)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--traj", help="saved trajectory JSON file")
    sub.add_argument("--no-figures", dest="no_figures", action="store_true",
                     help="skip figure rendering")
    sub.add_argument("--bundles", action="store_true",
                     help="write per-point JSON bundles (pareto)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paroc",
                                     description="solve, sweep and verify "
                                                 "constrained optimal control problems")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command")
    for name, fn in (("list-problems", cmd_list_problems), ("check-cq", cmd_check_cq),
                     ("solve", cmd_solve), ("verify", cmd_verify), ("pareto", cmd_pareto)):
        sub = subs.add_parser(name)
        if name != "list-problems":
            _add_common(sub)
        sub.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, ValueError, ParocError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
