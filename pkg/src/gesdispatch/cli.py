"""Command-line interface.

Subcommands:

* ``solve``    — run the day-ahead dispatch on a scenario directory;
* ``evaluate`` — Monte-Carlo ex-post evaluation of a saved strategy;
* ``bounds``   — print the worst-case tail-factor catalog;
* ``sweep``    — compare model modes / gammas on one scenario;
* ``reserve``  — reserve-backed dispatch over a gamma sweep.

Every run writes a ``manifest.yaml`` (configuration echo and seeds, no
timestamps) sufficient to reproduce its outputs byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cantelli import ShapeClass, cantelli_bound, parse_shape
from .errors import GesDispatchError, InfeasibleBounds, ValidationError
from .ges import UnitSchedule
from .optimizer import (
    DispatchStrategy,
    SolveMetadata,
    iterative_solve_r2,
    robust_solve_r1,
    solve_cco_diu,
    solve_deterministic_m1,
)
from .reliability import evaluate_reliability
from .reserve import solve_with_reserve
from .scenario import ReserveSpec, ScenarioBundle
from .scenario_io import fmt, load_scenario


@dataclass
class RunConfig:
    """Validated run options; mirrors the solve-family CLI flags."""

    model_mode: str = "M3"
    reformulation: str = "R1"
    shape: str = "unimodal"
    shape_nu: float | None = None
    gamma: float | None = None
    gamma_balance: float | None = None
    delta: float = 1e-3
    max_iter: int = 25
    mcs_n: int = 10_000
    seed: int = 0
    window: str | None = None
    discomfort_variant: str | None = None
    a1: bool = False
    a2: bool = False
    a3: bool = False
    reserve: str = "none"
    out: str = "out"

    def validate(self) -> None:
        issues = []
        if self.model_mode not in ("M1", "M2", "M3"):
            issues.append(f"unknown model mode {self.model_mode!r}")
        if self.reformulation not in ("R1", "R2"):
            issues.append(f"unknown reformulation {self.reformulation!r}")
        if self.reformulation == "R2" and self.model_mode != "M3":
            issues.append("R2 requires model mode M3")
        if self.a3 and self.reformulation == "R2":
            issues.append("A3 (robust fallback) forces R1; drop --reform R2")
        if self.reserve not in ("none", "S1", "S2"):
            issues.append(f"unknown reserve mode {self.reserve!r}")
        if issues:
            raise ValidationError(issues)

    def effective_max_iter(self) -> int:
        return 2 if self.a2 else self.max_iter


def _parse_window(text: str, horizon: int) -> np.ndarray:
    mask = np.zeros(horizon, dtype=bool)
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            mask[int(a): int(b) + 1] = True
        elif part:
            mask[int(part)] = True
    return mask


def _apply_config(scn: ScenarioBundle, cfg: RunConfig) -> ScenarioBundle:
    kw = {"model_mode": cfg.model_mode}
    if cfg.gamma is not None:
        kw["gamma"] = cfg.gamma
        kw["gamma_balance"] = cfg.gamma_balance if cfg.gamma_balance is not None else cfg.gamma
    elif cfg.gamma_balance is not None:
        kw["gamma_balance"] = cfg.gamma_balance
    if cfg.shape:
        kw["shape_class"] = parse_shape(cfg.shape, cfg.shape_nu)
    if cfg.window:
        kw["dispatch_window"] = _parse_window(cfg.window, scn.horizon)
    scn = replace(scn, **kw)
    if cfg.discomfort_variant:
        scn = replace(scn, units=[
            replace(u, ddu=replace(u.ddu, discomfort_variant=cfg.discomfort_variant))
            for u in scn.units
        ])
    return scn


def _dispatch(scn: ScenarioBundle, cfg: RunConfig) -> DispatchStrategy:
    if cfg.a1:
        from .optimizer import aggregate_scenario

        scn = aggregate_scenario(scn)
    if cfg.reserve != "none":
        spec = scn.reserve or ReserveSpec()
        return solve_with_reserve(scn, replace(spec, mode=cfg.reserve))
    if cfg.model_mode == "M1":
        return solve_deterministic_m1(scn)
    if cfg.model_mode == "M2":
        return solve_cco_diu(scn)
    if cfg.reformulation == "R1" or cfg.a3:
        return robust_solve_r1(scn)
    return iterative_solve_r2(
        scn, delta=cfg.delta, max_iter=cfg.effective_max_iter(), seed=cfg.seed,
        on_max_iter="return" if cfg.a2 else "raise",
    )


# ---------------------------------------------------------------------------
# Artifacts


def write_manifest(out: Path, cfg: RunConfig, scenario_path: str) -> None:
    cfg_echo = asdict(cfg)
    cfg_echo.pop("out", None)  # numeric artifacts must not depend on the output path
    doc = {"version": __version__, "scenario": str(scenario_path), "config": cfg_echo}
    (out / "manifest.yaml").write_text(yaml.safe_dump(doc, sort_keys=True))


def write_strategy(out: Path, strategy: DispatchStrategy) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "strategy_units.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "t", "p_c", "p_d", "soc_next", "rd", "reserve"])
        for uid in sorted(strategy.schedules):
            s = strategy.schedules[uid]
            rs = (strategy.reserve_schedule or {}).get(uid)
            for t in range(s.p_c.shape[0]):
                w.writerow([uid, t, fmt(s.p_c[t]), fmt(s.p_d[t]), fmt(s.soc[t + 1]),
                            fmt(strategy.rd[uid][t]), fmt(rs[t]) if rs is not None else ""])
    with open(out / "strategy_system.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "grid_import"])
        for t, g in enumerate(strategy.grid_import):
            w.writerow([t, fmt(g)])
    meta = strategy.metadata
    doc = {
        "objective": fmt(strategy.objective_value),
        "mode": meta.mode,
        "reformulation": meta.reformulation,
        "iterations": meta.iterations,
        "converged": meta.converged,
        "gamma": fmt(meta.gamma),
    }
    if strategy.reserve_diag:
        doc["reserve"] = {k: (v if isinstance(v, str) else fmt(v))
                          for k, v in strategy.reserve_diag.items()}
    (out / "summary.yaml").write_text(yaml.safe_dump(doc, sort_keys=True))
    if meta.trace:
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "max_delta_f_inv"])
            for k, (obj, d) in enumerate(meta.trace):
                w.writerow([k, fmt(obj), fmt(d)])


def read_strategy(path: Path, scn: ScenarioBundle) -> DispatchStrategy:
    """Reload a strategy written by write_strategy."""
    per_unit: dict[str, dict[int, tuple]] = {}
    with open(path / "strategy_units.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            per_unit.setdefault(row["unit_id"], {})[int(row["t"])] = row
    schedules = {}
    rd = {}
    for u in scn.units:
        rows = per_unit[u.unit_id]
        horizon = len(rows)
        p_c = np.array([float(rows[t]["p_c"]) for t in range(horizon)])
        p_d = np.array([float(rows[t]["p_d"]) for t in range(horizon)])
        soc = np.empty(horizon + 1)
        soc[0] = u.params.soc_init
        soc[1:] = [float(rows[t]["soc_next"]) for t in range(horizon)]
        schedules[u.unit_id] = UnitSchedule(p_c=p_c, p_d=p_d, soc=soc)
        rd[u.unit_id] = np.array([float(rows[t]["rd"]) for t in range(horizon)])
    with open(path / "strategy_system.csv", newline="") as fh:
        grid = np.array([float(r["grid_import"]) for r in csv.DictReader(fh)])
    summary = yaml.safe_load((path / "summary.yaml").read_text())
    meta = SolveMetadata(
        mode=summary["mode"], reformulation=summary.get("reformulation"),
        iterations=int(summary.get("iterations", 0)),
        converged=bool(summary.get("converged", True)),
        gamma=float(summary["gamma"]),
    )
    return DispatchStrategy(schedules=schedules, grid_import=grid, rd=rd,
                            objective_value=float(summary["objective"]), metadata=meta)


def write_report(out: Path, report) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "lorp": fmt(report.lorp),
        "erns_total_signed_kwh": fmt(report.erns_total_signed),
        "erns_total_abs_kwh": fmt(report.erns_total_abs),
        "cost_da": fmt(report.cost_da),
        "cost_rt": fmt(report.cost_rt),
        "cost_tc": fmt(report.cost_tc),
        "crossings": report.crossings,
        "gamma": fmt(report.gamma),
        "draws": report.draws,
        "seed": report.seed,
    }
    (out / "report.yaml").write_text(yaml.safe_dump(doc, sort_keys=True))
    with open(out / "erns.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "erns_kwh"])
        for t, v in enumerate(report.erns):
            w.writerow([t, fmt(v)])
    with open(out / "violation_freq.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "t", "freq"])
        for uid in sorted(report.violation_freq):
            for t, v in enumerate(report.violation_freq[uid]):
                w.writerow([uid, t, fmt(v)])


# ---------------------------------------------------------------------------
# Subcommands


def _cfg_from_args(args) -> RunConfig:
    cfg = RunConfig(
        model_mode=args.mode, reformulation=args.reform, shape=args.shape,
        shape_nu=args.nu, gamma=args.gamma, gamma_balance=args.gamma_balance,
        delta=args.delta, max_iter=args.max_iter, seed=args.seed,
        window=args.window, discomfort_variant=args.variant,
        a1=args.a1, a2=args.a2, a3=args.a3, reserve=args.reserve,
        out=args.out,
    )
    cfg.validate()
    return cfg


def cmd_solve(args) -> int:
    cfg = _cfg_from_args(args)
    scn = _apply_config(load_scenario(args.scenario), cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        strategy = _dispatch(scn, cfg)
    except InfeasibleBounds as exc:
        (out / "infeasible.yaml").write_text(yaml.safe_dump(
            {"empty_intervals": [
                {"unit": u, "t": int(t), "lower": fmt(lo), "upper": fmt(hi)}
                for u, t, lo, hi in exc.entries]}, sort_keys=True))
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    write_strategy(out, strategy)
    write_manifest(out, cfg, args.scenario)
    print(f"objective {strategy.objective_value:.6f} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    scn = load_scenario(args.scenario)
    if args.gamma is not None:
        scn = replace(scn, gamma=args.gamma, gamma_balance=args.gamma)
    strategy = read_strategy(Path(args.strategy), scn)
    report = evaluate_reliability(strategy, scn, args.draws, args.seed)
    out = Path(args.out)
    write_report(out, report)
    print(f"LORP {report.lorp:.4f}  cost_rt {report.cost_rt:.4f} -> {out}")
    return 0


def cmd_bounds(args) -> int:
    gammas = [float(g) for g in args.gammas.split(",")]
    shapes = [
        ShapeClass("no_assumption"), ShapeClass("symmetric"), ShapeClass("unimodal"),
        ShapeClass("symmetric_unimodal"), ShapeClass("student_t", nu=args.nu),
        ShapeClass("normal"),
    ]
    rows = [["shape"] + [fmt(g) for g in gammas]]
    for s in shapes:
        label = s.kind if s.nu is None else f"{s.kind}({fmt(s.nu)})"
        rows.append([label] + [fmt(cantelli_bound(s, g)) for g in gammas])
    text = "\n".join(",".join(r) for r in rows) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    gammas = [float(g) for g in args.gammas.split(",")]
    modes = args.modes.split(",")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for gamma in gammas:
        for mode in modes:
            cfg = RunConfig(model_mode=mode, reformulation=args.reform, shape=args.shape,
                            gamma=gamma, seed=args.seed)
            cfg.validate()
            scn = _apply_config(base, cfg)
            strategy = _dispatch(scn, cfg)
            report = evaluate_reliability(strategy, scn, args.draws, args.seed)
            rows.append([fmt(gamma), mode, fmt(strategy.objective_value),
                         fmt(report.lorp), fmt(report.cost_rt), fmt(report.cost_tc)])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "mode", "cost_da", "lorp", "cost_rt", "cost_tc"])
        w.writerows(rows)
    print(f"{len(rows)} rows -> {out / 'sweep.csv'}")
    return 0


def cmd_reserve(args) -> int:
    base = load_scenario(args.scenario)
    gammas = [float(g) for g in args.gammas.split(",")]
    modes = args.modes.split(",")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for gamma in gammas:
        scn = replace(base, gamma=gamma, gamma_balance=gamma)
        for mode in modes:
            spec = replace(scn.reserve or ReserveSpec(), mode=mode)
            strategy = solve_with_reserve(scn, spec)
            d = strategy.reserve_diag
            rows.append([fmt(gamma), mode, fmt(strategy.objective_value),
                         fmt(d["ges_energy_kwh"]), fmt(d["reserve_energy_kwh"]),
                         fmt(d["reserve_cost"])])
    with open(out / "reserve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "mode", "cost_da", "ges_energy_kwh",
                    "reserve_energy_kwh", "reserve_cost"])
        w.writerows(rows)
    print(f"{len(rows)} rows -> {out / 'reserve.csv'}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ges-dispatch",
                                     description="Day-ahead storage-fleet dispatch under uncertainty")
    default_out = os.environ.get("GES_DISPATCH_OUT", "out")
    sub = parser.add_subparsers(dest="command", required=True)

    def solve_flags(p):
        p.add_argument("--scenario", required=True)
        p.add_argument("--mode", default="M3", choices=["M1", "M2", "M3"])
        p.add_argument("--reform", default="R1", choices=["R1", "R2"])
        p.add_argument("--shape", default="unimodal")
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--gamma-balance", dest="gamma_balance", type=float, default=None)
        p.add_argument("--delta", type=float, default=1e-3)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=25)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--window", default=None, help="dispatch steps, e.g. 19-22 or 3,4,5")
        p.add_argument("--variant", default=None, choices=["F1", "F2", "F3"])
        p.add_argument("--a1", action="store_true", help="aggregate the fleet before solving")
        p.add_argument("--a2", action="store_true", help="cap the fixed-point loop at 2 iterations")
        p.add_argument("--a3", action="store_true", help="fall back to the one-shot robust solve")
        p.add_argument("--reserve", default="none", choices=["none", "S1", "S2"])
        p.add_argument("--out", default=default_out)

    p = sub.add_parser("solve", help="solve the day-ahead dispatch")
    solve_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="Monte-Carlo evaluation of a saved strategy")
    p.add_argument("--scenario", required=True)
    p.add_argument("--strategy", required=True, help="directory written by `solve`")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bounds", help="worst-case tail-factor table")
    p.add_argument("--gammas", default="0.05,0.25,0.45")
    p.add_argument("--nu", type=float, default=5.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="compare modes and gammas")
    p.add_argument("--scenario", required=True)
    p.add_argument("--gammas", default="0.05")
    p.add_argument("--modes", default="M1,M2,M3")
    p.add_argument("--reform", default="R1", choices=["R1", "R2"])
    p.add_argument("--shape", default="unimodal")
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reserve", help="reserve-backed dispatch sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--gammas", default="0.05,0.30,0.55,0.80")
    p.add_argument("--modes", default="S1,S2")
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_reserve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except GesDispatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
