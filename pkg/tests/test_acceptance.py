"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints ``criterion N: PASS|FAIL <details>``; the lines are also
collected into the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from ssdgc.analysis import (
    cleaning_cost,
    mean_type,
    optimal_wear_leveling,
    random_policy,
    rga_point,
    truncated_normal_occupancy,
    wear_leveling,
)
from ssdgc.cli import main
from ssdgc.meanfield import OdeConfig, integrate_to_steady_state
from ssdgc.model import (
    SsdGeometry,
    TransitionModel,
    binomial_fixed_point,
    general_fixed_point,
    uniform_transition_model,
)
from ssdgc.ssdsim import GcPolicy, SimConfig, compare_durability, simulate
from ssdgc.workloads import SyntheticSpec, generate, replay

from .conftest import ACCEPTANCE_LINES
from .oracles import projected_gradient_wear, random_feasible_weights

FAMILY = {
    "binomial64": binomial_fixed_point(64),
    "normal64_20_10": truncated_normal_occupancy(64, 20, 10),
    "normal64_32_5": truncated_normal_occupancy(64, 32, 5),
    "normal64_44_10": truncated_normal_occupancy(64, 44, 10),
}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def l1(a, b) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def test_criterion_01_ode_reaches_binomial():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for k in (4, 16, 64):
        target = binomial_fixed_point(k)
        model = uniform_transition_model(k)
        for _ in range(5):
            s0 = rng.dirichlet(np.ones(k + 1))
            worst = max(worst, l1(integrate_to_steady_state(s0, model).pi, target))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-6 and elapsed < 5.0, f"max L1={worst:.2e} runtime={elapsed:.2f}s")


def random_birth_death(rng, k: int) -> TransitionModel:
    up = list(rng.uniform(0.05, 1.0, k)) + [0.0]
    down = [0.0] + list(rng.uniform(0.05, 1.0, k))
    return TransitionModel(1.0, up, down)


def test_criterion_02_general_fixed_point():
    start = time.perf_counter()
    worst_l1 = worst_balance = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        model = random_birth_death(rng, 16)
        pi = general_fixed_point(model)
        ode = integrate_to_steady_state(np.full(17, 1 / 17), model, OdeConfig(max_time=1e7)).pi
        worst_l1 = max(worst_l1, l1(pi, ode))
        flux = pi[:-1] * model.up[:-1] - pi[1:] * model.down[1:]
        worst_balance = max(worst_balance, float(np.max(np.abs(flux))))
    elapsed = time.perf_counter() - start
    ok = worst_l1 <= 1e-6 and worst_balance <= 1e-10 and elapsed < 10.0
    record(2, ok, f"max L1={worst_l1:.2e} max balance residual={worst_balance:.2e} runtime={elapsed:.2f}s")


VALIDATE_BLOCKS = 1280
VALIDATE_K = 16
VALIDATE_REQUESTS = 2_000_000


@pytest.mark.slow
@pytest.mark.parametrize("pattern", ["random", "sequential", "hybrid"])
@pytest.mark.parametrize("arrival", ["poisson", "normal"])
def test_criterion_03_model_matches_simulation(pattern, arrival):
    geometry = SsdGeometry(blocks_per_package=VALIDATE_BLOCKS, pages_per_block=VALIDATE_K)
    spec = SyntheticSpec(pattern=pattern, arrival=arrival, request_count=VALIDATE_REQUESTS, seed=0)
    cfg = SimConfig(geometry=geometry, policy=GcPolicy.greedy(), initial_state="full", seed=0,
                    warmup_requests=VALIDATE_REQUESTS // 5, observe=True)
    start = time.perf_counter()
    rep = simulate(generate(spec, geometry.logical_sectors), cfg)
    pi = general_fixed_point(rep.transition_model())
    elapsed = time.perf_counter() - start
    dist = l1(rep.occupancy, pi)
    record(3, dist <= 0.08 and elapsed < 120.0, f"[{pattern}+{arrival}] L1={dist:.4f} runtime={elapsed:.1f}s")


def test_criterion_04_extremes_exact():
    problems = []
    for name, pi in FAMILY.items():
        k = pi.size - 1
        if optimal_wear_leveling(pi, 0.0).wear != pi[0]:
            problems.append(f"{name} W*(0)")
        if optimal_wear_leveling(pi, mean_type(pi)).wear != 1.0:
            problems.append(f"{name} W*(mean)")
        if optimal_wear_leveling(pi, float(k)).wear != pi[k]:
            problems.append(f"{name} W*(k)")
    b = FAMILY["binomial64"]
    if optimal_wear_leveling(b, 0.0).wear != 2.0 ** -64:
        problems.append("binomial64 W*(0) != 2^-64")
    if cleaning_cost(random_policy(b), b) != 32.0:
        problems.append("binomial64 random C != 32")
    record(4, not problems, "all extremes exact" if not problems else "; ".join(problems))


def test_criterion_05_optimizer_dominance():
    start = time.perf_counter()
    worst_dominance = worst_oracle = 0.0
    for name, pi in FAMILY.items():
        k = pi.size - 1
        for j, c in enumerate(np.linspace(0.0, k, 27)[1:-1]):
            c = float(c)
            best = optimal_wear_leveling(pi, c).wear
            for w in random_feasible_weights(pi, c, 1000, seed=j):
                worst_dominance = max(worst_dominance, wear_leveling(w, pi) - best)
            worst_oracle = max(worst_oracle, abs(projected_gradient_wear(pi, c, restarts=2, seed=j) - best))
    elapsed = time.perf_counter() - start
    ok = worst_dominance <= 1e-9 and worst_oracle <= 1e-6 and elapsed < 60.0
    record(5, ok, f"max random excess={worst_dominance:.2e} max oracle gap={worst_oracle:.2e} "
                  f"runtime={elapsed:.1f}s")


def test_criterion_06_rga_on_curve():
    ds = [float(d) for d in range(1, 101)] + [round(1.0 + 0.05 * j, 2) for j in range(21)]
    problems = []
    for name, pi in FAMILY.items():
        pts = {d: rga_point(pi, d) for d in sorted(set(ds))}
        for d, p in pts.items():
            if p.wear > optimal_wear_leveling(pi, p.cost).wear + 1e-9:
                problems.append(f"{name} d={d} above curve")
        order = sorted(pts)
        for a, b in zip(order, order[1:]):
            if pts[b].cost > pts[a].cost or pts[b].wear > pts[a].wear:
                problems.append(f"{name} not monotone between d={a} and d={b}")
        if (pts[1.0].cost, pts[1.0].wear) != (mean_type(pi), 1.0):
            problems.append(f"{name} d=1 is not (mean, 1)")
    record(6, not problems, f"{len(set(ds))} d values x {len(FAMILY)} distributions" if not problems
           else "; ".join(problems[:5]))


@pytest.fixture(scope="module")
def ordering_runs():
    geometry = SsdGeometry(blocks_per_package=4096, pages_per_block=16)
    space = int(geometry.logical_sectors * 0.05) // geometry.sectors_per_page * geometry.sectors_per_page
    base = list(generate(SyntheticSpec(pattern="hybrid", request_count=50_000, seed=7), space))
    requests = list(replay(base, target_total=1_000_000))
    runs = {}
    for policy in (GcPolicy.greedy(), GcPolicy.rga(10), GcPolicy.rga(2), GcPolicy.random()):
        cfg = SimConfig(geometry=geometry, policy=policy, initial_state="full", seed=3,
                        warmup_requests=len(requests) // 5, observe=False)
        runs[policy.label] = simulate(requests, cfg)
    return runs


@pytest.mark.slow
def test_criterion_07_simulation_orderings(ordering_runs):
    r = ordering_runs
    # a larger window sits closer to greedy, so rga10 is cheaper and less even than rga2
    order = ["greedy", "rga10", "rga2", "random"]
    cost = [r[p].cleaning_cost for p in order]
    wear = [r[p].wear_leveling for p in order]
    increasing_cost = all(a < b for a, b in zip(cost, cost[1:]))
    increasing_wear = all(a < b for a, b in zip(wear, wear[1:]))
    ok = increasing_cost and increasing_wear and wear[-1] >= 0.98 and cost[0] <= 0.05 * 16
    detail = " ".join(f"{p}:C={c:.3f},W={w:.4f}" for p, c, w in zip(order, cost, wear))
    record(7, ok, detail)


@pytest.mark.slow
def test_criterion_08_rga2_wear_retention(ordering_runs):
    ratio = ordering_runs["rga2"].wear_leveling / ordering_runs["random"].wear_leveling
    record(8, ratio >= 0.8, f"W(rga2)/W(random)={ratio:.3f}")


@pytest.mark.slow
def test_criterion_09_durability_ordering():
    geometry = SsdGeometry(blocks_per_package=4096, pages_per_block=16)
    space = int(geometry.logical_sectors * 0.1) // geometry.sectors_per_page * geometry.sectors_per_page
    workload = generate(SyntheticSpec(pattern="sequential", request_count=20_000_000, mean_interarrival=10.0,
                                      seed=5), space)
    cfg = SimConfig(geometry=geometry, seed=3, initial_state="empty", observe=False)
    start = time.perf_counter()
    results = {r.policy: r for r in compare_durability(workload, cfg, [GcPolicy.random(), GcPolicy.rga(5)],
                                                         erase_limit=50, bad_block_budget=0.05)}
    elapsed = time.perf_counter() - start
    g, r5, rnd = (results[p].lifetime for p in ("greedy", "rga5", "random"))
    retired = {p: res.report.retired for p, res in results.items()}
    ok = (rnd > r5 > g and rnd / g >= 2.0 and r5 >= 2.0 * g and elapsed < 300.0
          and set(retired.values()) == {math.ceil(0.05 * 4096)})
    record(9, ok, f"random/greedy={rnd / g:.2f} rga5/greedy={r5 / g:.2f} retired={retired['greedy']} "
                  f"runtime={elapsed:.1f}s")


def test_criterion_10_fractional_window_mean():
    geometry = SsdGeometry(blocks_per_package=1024, pages_per_block=16)
    spec = SyntheticSpec(request_count=200_000, seed=1)
    cfg = SimConfig(geometry=geometry, policy=GcPolicy.rga(1.4), initial_state="full", seed=1, observe=False)
    rep = simulate(generate(spec, geometry.logical_sectors), cfg)
    ok = rep.gc_ops >= 10_000 and abs(rep.mean_window - 1.4) <= 0.02
    record(10, ok, f"mean window={rep.mean_window:.4f} over {rep.gc_ops} GC events")


DETERMINISM_CONFIG = """
[geometry]
blocks_per_package = 128
pages_per_block = 16
[workload]
request_count = 20000
replay_base = 5000
[simulation]
snapshot_every = 5000
[validate]
blocks = 128
requests = 20000
[tradeoff]
distributions = binomial:16, normal:16:5:3
grid_points = 21
[durability]
blocks = 128
erase_limit = 8
request_count = 1000000
"""


def test_criterion_11_byte_identical_reruns(tmp_path):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(DETERMINISM_CONFIG)
    differing = []
    commands = ["fixed-point", "validate", "tradeoff", "rga-sweep", "simulate", "durability"]
    for command in commands:
        outs = []
        for run in ("a", "b"):
            out = tmp_path / command / run
            assert main([command, "--config", str(cfg), "--seed", "11", "--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if not outs[0] or outs[0] != outs[1]:
            differing.append(command)
    record(11, not differing, f"{len(commands)} commands rerun" if not differing
           else "differs: " + ", ".join(differing))
