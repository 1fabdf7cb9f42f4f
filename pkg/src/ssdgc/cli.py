"""Command-line front end: ``ssdgc <command> [--config FILE] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import analysis
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ConvergenceTimeout, InconclusiveRun, InvalidArgument, SimulationAborted
from .meanfield import OdeConfig, integrate_to_steady_state, write_trajectory_csv
from .model import (
    SsdGeometry,
    TransitionModel,
    binomial_fixed_point,
    general_fixed_point,
    uniform_transition_model,
)
from .ssdsim import GcPolicy, SimConfig, SimReport, compare_durability, simulate, write_snapshots_csv
from .workloads import (
    Arrival,
    SyntheticSpec,
    align_to_pages,
    generate,
    parse_trace,
    replay,
    sequential_ratio,
)

log = logging.getLogger("ssdgc")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


class ExperimentFailed(Exception):
    pass


def _f(x) -> str:
    return repr(float(x))


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- fixed-point


def load_transition_file(path: str, lam: float = 1.0) -> TransitionModel:
    """CSV with header ``i,up,down`` and one row per type."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["i", "up", "down"]:
            raise ConfigError(f"{path}: expected header i,up,down")
        for row in reader:
            try:
                rows.append((int(row["i"]), float(row["up"]), float(row["down"])))
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: malformed row {row}") from None
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ConfigError(f"{path}: states must be 0..k without gaps")
    try:
        return TransitionModel(lam, [r[1] for r in rows], [r[2] for r in rows])
    except InvalidArgument as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_fixed_point(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    m = cfg.model
    if m.p_file:
        model = load_transition_file(m.p_file, m.lam)
        closed = general_fixed_point(model)
        label = "general"
    else:
        model = uniform_transition_model(m.k, m.lam)
        closed = binomial_fixed_point(m.k)
        label = "uniform"
    s0 = np.zeros(model.k + 1)
    s0[0] = 1.0
    ode = OdeConfig(step_size=m.step_size, max_time=m.max_time, convergence_eps=m.convergence_eps)
    try:
        res = integrate_to_steady_state(s0, model, ode)
        pi, t, residual, traj = res.pi, res.time, res.residual, res.trajectory
        failed = None
    except ConvergenceTimeout as exc:
        pi, t, residual, traj = exc.last_state, exc.time, exc.residual, []
        failed = exc
    fh, w = _writer(os.path.join(out, "fixed_point.csv"))
    with fh:
        w.writerow(["state", "closed_form", "ode", "abs_diff"])
        for i in range(model.k + 1):
            w.writerow([i, _f(closed[i]), _f(pi[i]), _f(abs(closed[i] - pi[i]))])
    l1 = float(np.abs(np.asarray(closed) - np.asarray(pi)).sum())
    fh, w = _writer(os.path.join(out, "fixed_point_summary.csv"))
    with fh:
        w.writerow(["model", "k", "l1", "ode_time", "residual"])
        w.writerow([label, model.k, _f(l1), _f(t), _f(residual)])
    if traj:
        write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj)
    print(f"fixed-point model={label} k={model.k} l1={l1:.3e} ode_time={t:g}")
    if failed is not None:
        raise ExperimentFailed(str(failed))
    return EXIT_OK


# ---------------------------------------------------------------- validate


def _validate_cell(args) -> dict:
    cfg, pattern, arrival = args
    va = cfg.validate
    geometry = replace(cfg.geometry, blocks_per_package=va.blocks, pages_per_block=va.pages_per_block, packages=1)
    spec = replace(cfg.workload, pattern=pattern, arrival=arrival, request_count=va.requests,
                   request_size=geometry.page_size, write_ratio=1.0)
    sim = SimConfig(geometry=geometry, timing=cfg.timing, policy=GcPolicy.parse(va.policy),
                    initial_state=cfg.initial_state, seed=cfg.seed,
                    warmup_requests=int(cfg.warmup * va.requests), observe=True)
    name = f"{pattern}+{arrival}"
    try:
        rep = simulate(generate(spec, geometry.logical_sectors), sim)
    except SimulationAborted as exc:
        return {"cell": name, "error": str(exc), "report": exc.report}
    model = rep.transition_model()
    try:
        pi = general_fixed_point(model)
    except Exception as exc:  # reducible estimate: report it as a failed cell
        return {"cell": name, "error": str(exc), "report": rep}
    return {
        "cell": name, "pattern": pattern, "arrival": arrival, "simulated": rep.occupancy,
        "final": rep.final_occupancy, "model": pi, "cost": rep.cleaning_cost, "unobserved": model.unobserved,
    }


def cmd_validate(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    cells = cfg.validate.cells
    if not cells or cfg.validate.requests <= 0:
        raise ConfigError("validation needs at least one cell and a positive request count")
    results = _map(_validate_cell, [(cfg, p, a) for p, a in cells], jobs)
    fh, w = _writer(os.path.join(out, "validate.csv"))
    with fh:
        w.writerow(["cell", "state", "simulated", "model"])
        for r in results:
            if "error" in r:
                continue
            for i, (s, m) in enumerate(zip(r["simulated"], r["model"])):
                w.writerow([r["cell"], i, _f(s), _f(m)])
    errors = []
    fh, w = _writer(os.path.join(out, "validate_summary.csv"))
    with fh:
        w.writerow(["cell", "l1", "l1_final", "cleaning_cost", "unobserved", "error"])
        for r in results:
            if "error" in r:
                errors.append(f"{r['cell']}: {r['error']}")
                w.writerow([r["cell"], "", "", "", "", r["error"]])
                continue
            l1 = float(np.abs(r["simulated"] - r["model"]).sum())
            l1_end = float(np.abs(r["final"] - r["model"]).sum())
            w.writerow([r["cell"], _f(l1), _f(l1_end), _f(r["cost"]), " ".join(map(str, r["unobserved"])), ""])
            print(f"validate {r['cell']} l1={l1:.4f} l1_final={l1_end:.4f}")
    if errors:
        raise ExperimentFailed("; ".join(errors))
    return EXIT_OK


# ---------------------------------------------------------------- tradeoff / rga-sweep


def parse_distribution(text: str) -> np.ndarray:
    """``binomial:<k>`` or ``normal:<k>:<mu>:<sigma>``."""
    parts = text.split(":")
    try:
        if parts[0] == "binomial" and len(parts) == 2:
            return binomial_fixed_point(int(parts[1]))
        if parts[0] == "normal" and len(parts) == 4:
            return analysis.truncated_normal_occupancy(int(parts[1]), float(parts[2]), float(parts[3]))
    except (ValueError, InvalidArgument) as exc:
        raise ConfigError(f"bad distribution {text!r}: {exc}") from None
    raise ConfigError(f"bad distribution {text!r}; use binomial:<k> or normal:<k>:<mu>:<sigma>")


def _distributions(cfg: ExperimentConfig) -> list[tuple[str, np.ndarray]]:
    dists = [(d, parse_distribution(d)) for d in cfg.tradeoff.distributions]
    if not dists:
        raise ConfigError("no distributions configured")
    return dists


def cmd_tradeoff(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    dists = _distributions(cfg)
    violations = 0
    fh, w = _writer(os.path.join(out, "tradeoff_curve.csv"))
    with fh:
        w.writerow(["distribution", "c_star", "w_star", "regime", "breakpoint"])
        for name, pi in dists:
            grid = analysis.default_grid(pi, cfg.tradeoff.grid_points) if cfg.tradeoff.grid_points > 1 \
                else [analysis.mean_type(pi)]
            for c in grid:
                s = analysis.optimal_wear_leveling(pi, c)
                w.writerow([name, _f(s.c_star), _f(s.wear), s.regime, s.breakpoint])
    fh, w = _writer(os.path.join(out, "rga_points.csv"))
    with fh:
        w.writerow(["distribution", "d", "C", "W", "w_star_at_C", "gap", "violation"])
        for name, pi in dists:
            for r in analysis.rga_sweep(pi, cfg.tradeoff.d_values):
                violations += r.violates
                w.writerow([name, _f(r.d), _f(r.cost), _f(r.wear), _f(r.optimal_wear), _f(r.gap), int(r.violates)])
    print(f"tradeoff distributions={len(dists)} rga_violations={violations}")
    return EXIT_OK


def cmd_rga_sweep(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    dists = _distributions(cfg)
    fh, w = _writer(os.path.join(out, "rga_sweep.csv"))
    with fh:
        w.writerow(["distribution", "d", "C", "W"])
        for name, pi in dists:
            for d in cfg.tradeoff.d_values:
                pt = analysis.rga_point(pi, d)
                w.writerow([name, _f(d), _f(pt.cost), _f(pt.wear)])
    print(f"rga-sweep distributions={len(dists)} points={len(cfg.tradeoff.d_values)}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate / durability


def build_workload(cfg: ExperimentConfig):
    """Requests for ``simulate``: a parsed trace or a (replayed) synthetic stream."""
    g = cfg.geometry
    total = cfg.workload.request_count
    if cfg.trace:
        with open(cfg.trace) as fh:
            parsed = parse_trace(fh, cfg.trace_format, logical_space=g.logical_sectors)
        base = list(align_to_pages(parsed.requests, g.page_size))
        info = {"filtered": parsed.filtered, "diagnostics": len(parsed.diagnostics),
                "sequential_ratio": sequential_ratio(parsed.requests)}
    else:
        space = max(g.sectors_per_page, int(g.logical_sectors * cfg.footprint) // g.sectors_per_page
                    * g.sectors_per_page)
        n = cfg.replay_base if 0 < cfg.replay_base < total else total
        base = list(generate(replace(cfg.workload, request_count=n), space))
        info = {"filtered": 0, "diagnostics": 0, "sequential_ratio": sequential_ratio(base)}
    if not base:
        raise ConfigError("workload is empty")
    return list(replay(base, target_total=total)), info


def _simulate_one(args) -> tuple[SimReport | None, str]:
    cfg, policy, requests = args
    sim = SimConfig(geometry=cfg.geometry, timing=cfg.timing, policy=policy, initial_state=cfg.initial_state,
                    seed=cfg.seed, warmup_requests=int(cfg.warmup * len(requests)), observe=False,
                    snapshot_every=cfg.snapshot_every)
    try:
        return simulate(requests, sim), ""
    except SimulationAborted as exc:
        return exc.report, f"{policy.label}: {exc}\n{exc.dump}"


def cmd_simulate(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    requests, info = build_workload(cfg)
    results = _map(_simulate_one, [(cfg, p, requests) for p in cfg.policies], jobs)
    fields = SimReport.SUMMARY_FIELDS
    errors = []
    fh, w = _writer(os.path.join(out, "simulate.csv"))
    with fh:
        w.writerow(list(fields) + ["status"])
        for pol, (rep, err) in zip(cfg.policies, results):
            if err:
                errors.append(err)
                with open(os.path.join(out, f"state_dump_{pol.label}.txt"), "w") as dump:
                    dump.write(err.split("\n", 1)[1])
            if rep is not None:
                w.writerow(rep.summary_row() + ["aborted" if err else "ok"])
                if cfg.snapshot_every:
                    write_snapshots_csv(os.path.join(out, f"occupancy_{rep.policy}.csv"), rep.snapshots,
                                        cfg.geometry.k)
                print(f"simulate {rep.summary()}")
    fh, w = _writer(os.path.join(out, "workload.csv"))
    with fh:
        w.writerow(["requests", "filtered", "diagnostics", "sequential_ratio"])
        w.writerow([len(requests), info["filtered"], info["diagnostics"], _f(info["sequential_ratio"])])
    if errors:
        raise ExperimentFailed("; ".join(e.split("\n", 1)[0] for e in errors))
    return EXIT_OK


def durability_workload(cfg: ExperimentConfig):
    du = cfg.durability
    g = SsdGeometry(blocks_per_package=du.blocks, pages_per_block=du.pages_per_block,
                    page_size=cfg.geometry.page_size, packages=1,
                    over_provisioning=cfg.geometry.over_provisioning, gc_threshold=cfg.geometry.gc_threshold)
    spec = SyntheticSpec(pattern=du.pattern, arrival=Arrival.POISSON, request_count=du.request_count,
                         mean_interarrival=du.mean_interarrival, request_size=g.page_size, seed=cfg.seed)
    space = max(g.sectors_per_page, int(g.logical_sectors * du.footprint) // g.sectors_per_page
                * g.sectors_per_page)
    return g, generate(spec, space)


def cmd_durability(cfg: ExperimentConfig, out: str, jobs: int = 1) -> int:
    du = cfg.durability
    g, wl = durability_workload(cfg)
    sim = SimConfig(geometry=g, timing=cfg.timing, seed=cfg.seed, initial_state="empty", observe=False)
    policies = [GcPolicy.parse(p) for p in du.policies]
    fh, w = _writer(os.path.join(out, "durability.csv"))
    with fh:
        w.writerow(["policy", "lifetime_ms", "normalized", "wear_leveling", "cleaning_cost", "retired", "writes"])
        try:
            results = compare_durability(wl, sim, policies, du.erase_limit, du.bad_block_budget)
        except (InconclusiveRun, SimulationAborted) as exc:
            rep = exc.report
            if rep is not None:
                w.writerow([rep.policy, "", "", _f(rep.wear_leveling), _f(rep.cleaning_cost), rep.retired,
                            rep.writes])
            raise ExperimentFailed(str(exc)) from None
        for r in results:
            rep = r.report
            w.writerow([r.policy, _f(r.lifetime), _f(r.normalized), _f(rep.wear_leveling),
                        _f(rep.cleaning_cost), rep.retired, rep.writes])
            print(f"durability policy={r.policy} lifetime_ms={r.lifetime:.1f} normalized={r.normalized:.3f}")
    return EXIT_OK


COMMANDS: dict[str, Callable[[ExperimentConfig, str, int], int]] = {
    "fixed-point": cmd_fixed_point,
    "validate": cmd_validate,
    "tradeoff": cmd_tradeoff,
    "rga-sweep": cmd_rga_sweep,
    "simulate": cmd_simulate,
    "durability": cmd_durability,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssdgc", description="SSD garbage-collection models and simulator.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="override the workload/simulator seed")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent cells")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Iterable[str] | None = None) -> int:
    args = build_parser().parse_args(None if argv is None else list(argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed must be non-negative")
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, max(1, args.jobs))
    except ConfigError as exc:
        print(f"ssdgc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExperimentFailed, SimulationAborted, InconclusiveRun, ConvergenceTimeout) as exc:
        print(f"ssdgc: experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
