"""Command line front end.

Subcommands: ``solve`` (closed-form schedule for one configuration),
``verify`` (cross-check the schedule against the discrete-time oracle),
``sweep`` (schedule and outcome metrics across a parameter grid),
``simulate`` (Monte Carlo of a solved schedule), ``trajectory``
(occupancy curves of a solved schedule).

Exit codes: 0 success, 1 unreadable input, 2 invalid configuration or
grid, 3 solver or verification failure, 4 output write failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dp import CoarseGridError, Grid, dp_no_feedback, dp_reduced, \
    dp_two_stage, extract_schedule
from .model import (
    ModelParams,
    ModelValidationError,
    progress_model_from_dict,
)
from .nofeedback import NoFeedbackModel
from .outcomes import (
    SimConfig,
    conversion_rate,
    route_probabilities,
    simulate,
    sweep,
    trajectory_probabilities,
)
from .policy import SearchCeilingError
from .solver import SolverError, belief_thresholds, solve, \
    solve_infinite_horizon

_AGENT_KEYS = {"p_bar", "lambda", "mu", "c", "B", "T"}


class _WriteFailure(Exception):
    """Wrapper marking an OSError raised while writing results."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.12g" % value
    return str(value)


def _normalize(obj):
    """Round floats to 12 significant digits so serialization is a fixed
    point under parse/dump cycles."""
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, float):
        return float("%.12g" % obj)
    return obj


@dataclass
class RunConfig:
    """Parsed run configuration: agent parameters, progress model, and
    optional solver / oracle / simulation / sweep blocks."""

    params: ModelParams
    model_spec: dict
    solver: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if "agent" not in data or "model" not in data:
            raise ValueError("config must contain 'agent' and 'model' blocks")
        agent = dict(data["agent"])
        unknown = set(agent) - _AGENT_KEYS
        if unknown:
            raise ValueError(f"unknown agent keys: {sorted(unknown)}")
        missing = _AGENT_KEYS - set(agent)
        if missing:
            raise ValueError(f"missing agent keys: {sorted(missing)}")
        params = ModelParams(p_bar=float(agent["p_bar"]),
                             lam=float(agent["lambda"]),
                             mu=float(agent["mu"]), c=float(agent["c"]),
                             B=float(agent["B"]), T=float(agent["T"]))
        model_spec = dict(data["model"])
        progress_model_from_dict(model_spec)  # fail fast on bad spec
        return cls(params=params, model_spec=model_spec,
                   solver=dict(data.get("solver", {})),
                   oracle=dict(data.get("oracle", {})),
                   sim=dict(data.get("sim", {})),
                   sweep=dict(data.get("sweep", {})))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def build_model(self):
        return progress_model_from_dict(self.model_spec)

    def to_dict(self) -> dict:
        agent = {"p_bar": self.params.p_bar, "lambda": self.params.lam,
                 "mu": self.params.mu, "c": self.params.c,
                 "B": self.params.B, "T": self.params.T}
        out = {"agent": agent, "model": dict(self.model_spec)}
        for name in ("solver", "oracle", "sim", "sweep"):
            block = getattr(self, name)
            if block:
                out[name] = dict(block)
        return _normalize(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _parse_grid(text: str) -> list:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0.0:
        raise ValueError(f"grid step must be positive, got {step}")
    values = np.arange(start, stop + 0.5 * step, step)
    return [float(v) for v in values if v <= stop + 1e-12]


def _grid_from_config(spec) -> list:
    if isinstance(spec, str):
        return _parse_grid(spec)
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    raise ValueError(f"unusable grid spec: {spec!r}")


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as err:
        raise _WriteFailure(f"cannot write {path}: {err}") from err


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in header))
    _write_text(path, "\n".join(lines) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    if not out.is_dir():
        raise _WriteFailure(f"output directory {out} does not exist")
    return out


def _solve_from_config(cfg: RunConfig):
    model = cfg.build_model()
    kwargs = {}
    if "n_grid" in cfg.solver:
        kwargs["n_grid"] = int(cfg.solver["n_grid"])
    if "tau_tol" in cfg.solver:
        kwargs["tau_tol"] = float(cfg.solver["tau_tol"])
    return model, solve(cfg.params, model, **kwargs)


def cmd_solve(args) -> int:
    cfg = RunConfig.from_file(args.config)
    model, sched = _solve_from_config(cfg)
    plan = solve_infinite_horizon(cfg.params, model)
    payload = {
        "tau1": sched.tau1, "tau2": sched.tau2, "tau3": sched.tau3,
        "structure": sched.structure, "q_at_switch": sched.q_at_switch,
        "terminal_belief": sched.terminal_belief,
        "no_shirk_ok": sched.no_shirk_ok,
        "infinite_horizon": {"p_hat": plan.p_hat,
                             "switch_time": plan.switch_time,
                             "structure": plan.structure},
    }
    try:
        th = belief_thresholds(cfg.params, model)
        payload["thresholds"] = {"p_hat": th.p_hat, "p_tilde": th.p_tilde,
                                 "p_check": th.p_check, "T1": th.T1}
    except (SolverError, SearchCeilingError, ValueError):
        payload["thresholds"] = None
    out = _out_dir(args) / "schedule.json"
    _write_text(out, json.dumps(_normalize(payload), indent=2,
                                sort_keys=True) + "\n")
    print(f"structure {sched.structure}: do {_fmt(sched.tau1)}, "
          f"think {_fmt(sched.tau2)}, do {_fmt(sched.tau3)} "
          f"(T={_fmt(cfg.params.T)})")
    print(f"wrote {out}")
    return 0


def _oracle_taus(intervals) -> tuple:
    """Collapse oracle intervals to (tau1, tau2, tau3): leading doing,
    total thinking, trailing doing."""
    tau1 = tau2 = tau3 = 0.0
    seen_think = False
    for start, end, label in intervals:
        span = end - start
        if label == "THINK":
            tau2 += span
            seen_think = True
        elif not seen_think:
            tau1 += span
        else:
            tau3 += span
    return tau1, tau2, tau3


def cmd_verify(args) -> int:
    cfg = RunConfig.from_file(args.config)
    dt = float(args.dt if args.dt is not None else cfg.oracle.get("dt", 1e-3))
    kind = cfg.oracle.get("kind", "reduced")
    model = cfg.build_model()
    grid = Grid.from_horizon(cfg.params.T, dt)
    if kind == "reduced":
        dp = dp_reduced(cfg.params, model, grid, keep_values=False)
    elif kind == "two_stage":
        dp = dp_two_stage(cfg.params, model, grid)
    elif kind == "no_feedback":
        nu = conversion_rate(model, cfg.oracle.get("nu"))
        nf = NoFeedbackModel(mu=cfg.params.mu, nu=nu, B=cfg.params.B,
                             c=cfg.params.c, p_bar=cfg.params.p_bar,
                             lam=cfg.params.lam,
                             limit_mode=abs(cfg.params.mu - nu) < 1e-12)
        dp = dp_no_feedback(nf, cfg.params.T, grid)
    else:
        raise ValueError(f"unknown oracle kind {kind!r}")
    intervals = extract_schedule(dp)
    report = {"kind": kind, "dt": dt,
              "oracle_intervals": [[a, b, lab] for a, b, lab in intervals]}

    if kind == "no_feedback":
        # structural check only: thinking, once started, never stops early
        labels = [lab for _, _, lab in intervals]
        ok = "DO" not in labels[labels.index("THINK") + 1:] \
            if "THINK" in labels else True
        report["check"] = "no return to doing after thinking"
        report["pass"] = bool(ok)
    else:
        sched = solve(cfg.params, model)
        o1, o2, o3 = _oracle_taus(intervals)
        tol = 5.0 * dt
        ok = (abs(o1 - sched.tau1) <= tol and abs(o2 - sched.tau2) <= tol
              and abs(o3 - sched.tau3) <= tol)
        report.update({
            "solver": [sched.tau1, sched.tau2, sched.tau3],
            "oracle": [o1, o2, o3], "tolerance": tol, "pass": bool(ok),
        })
    out = _out_dir(args) / "verify.json"
    _write_text(out, json.dumps(_normalize(report), indent=2,
                                sort_keys=True) + "\n")
    status = "PASS" if report["pass"] else "FAIL"
    print(f"verify[{kind}] dt={_fmt(dt)}: {status}")
    print(f"wrote {out}")
    if not report["pass"]:
        raise SolverError("oracle disagrees with closed-form schedule")
    return 0


_SWEEP_HEADER = ("grid_value", "tau1", "tau2", "tau3", "structure",
                 "p_total", "p_do_initial", "p_think", "p_hailmary",
                 "p_total_backloaded", "expected_work")


def cmd_sweep(args) -> int:
    cfg = RunConfig.from_file(args.config)
    model = cfg.build_model()
    variable = args.variable or cfg.sweep.get("variable")
    if variable is None:
        raise ValueError("no sweep variable: use --variable or the config")
    grid_spec = args.grid if args.grid is not None else cfg.sweep.get("grid")
    if grid_spec is None:
        raise ValueError("no sweep grid: use --grid or the config")
    values = _grid_from_config(grid_spec)
    nu = cfg.sweep.get("nu")
    rows = sweep(cfg.params, model, variable, values, nu=nu)
    out = _out_dir(args) / "sweep.csv"
    _write_csv(out, _SWEEP_HEADER, rows)
    n_err = sum(1 for r in rows if str(r["structure"]).startswith("ERROR"))
    print(f"swept {variable} over {len(values)} points "
          f"({n_err} failed); wrote {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = RunConfig.from_file(args.config)
    model, sched = _solve_from_config(cfg)
    nu = conversion_rate(model, cfg.sim.get("nu"))
    reps = int(args.reps if args.reps is not None
               else cfg.sim.get("reps", 100_000))
    seed = int(args.seed if args.seed is not None else cfg.sim.get("seed", 0))
    result = simulate(sched, cfg.params, nu, SimConfig(reps=reps, seed=seed))
    out = _out_dir(args) / "simulate.csv"
    row = {"estimate": result.success_rate, "std_err": result.success_se,
           "reps": result.reps, "seed": result.seed}
    _write_csv(out, ("estimate", "std_err", "reps", "seed"), [row])
    exact = route_probabilities(sched, cfg.params, nu).p_total
    print(f"success rate {_fmt(result.success_rate)} "
          f"+/- {_fmt(result.success_se)} (closed form {_fmt(exact)})")
    print(f"wrote {out}")
    return 0


def cmd_trajectory(args) -> int:
    cfg = RunConfig.from_file(args.config)
    model, sched = _solve_from_config(cfg)
    nu = conversion_rate(model, cfg.sim.get("nu"))
    curves = trajectory_probabilities(sched, cfg.params, nu)
    rows = [
        {"t": t, "p_progress": pp, "p_solution": ps, "p_neither": pn}
        for t, pp, ps, pn in zip(curves["t"], curves["p_progress"],
                                 curves["p_solution"], curves["p_neither"])
    ]
    out = _out_dir(args) / "trajectory.csv"
    _write_csv(out, ("t", "p_progress", "p_solution", "p_neither"), rows)
    print(f"wrote {out} ({len(rows)} points)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dblab",
        description="Schedule doing against thinking under a deadline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="JSON run configuration")
        p.add_argument("--out", default=".",
                       help="directory for result files")

    p_solve = sub.add_parser("solve", help="closed-form schedule")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify",
                              help="cross-check against the grid oracle")
    common(p_verify)
    p_verify.add_argument("--dt", type=float, default=None,
                          help="oracle step size")
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="metrics across a parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--grid", default=None,
                         help="grid as start:stop:step")
    p_sweep.add_argument("--variable", choices=("T", "p_bar"), default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="Monte Carlo of the schedule")
    common(p_sim)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_traj = sub.add_parser("trajectory", help="occupancy curves over time")
    common(p_traj)
    p_traj.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, json.JSONDecodeError,
            UnicodeDecodeError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return 1
    except (ModelValidationError, CoarseGridError, ValueError, KeyError,
            TypeError) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 2
    except (SolverError, SearchCeilingError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3
    except _WriteFailure as err:
        print(f"output error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
