"""Request-driven SSD simulator with FCFS timing, GC and durability runs."""

from __future__ import annotations

import csv
import io
import math
import random
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from ..errors import InconclusiveRun, InvalidArgument, SimulationAborted, SsdGcError
from ..meanfield import TransitionEstimator
from ..model import SsdGeometry, TransitionModel
from ..workloads import SECTOR, IoRequest, Op
from .package import FlashPackage
from .policy import GcPolicy, PolicyKind

DUMP_HEADER = "SSDGC-STATE-DUMP v1"


@dataclass(frozen=True)
class TimingModel:
    read_page: float = 0.025
    write_page: float = 0.2
    erase_block: float = 1.5
    transfer_per_byte: float = 0.000025

    def __post_init__(self):
        for name in ("read_page", "write_page", "erase_block", "transfer_per_byte"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    geometry: SsdGeometry = field(default_factory=SsdGeometry)
    timing: TimingModel = field(default_factory=TimingModel)
    policy: GcPolicy = field(default_factory=GcPolicy)
    initial_state: str = "full"
    seed: int = 0
    warmup_requests: int = 0
    observe: bool = True
    snapshot_every: int = 0
    erase_limit: int | None = None

    def __post_init__(self):
        if self.initial_state not in ("full", "empty"):
            raise InvalidArgument("initial_state must be 'full' or 'empty'")
        if self.warmup_requests < 0 or self.snapshot_every < 0:
            raise InvalidArgument("warmup_requests and snapshot_every must be non-negative")
        if self.erase_limit is not None and self.erase_limit < 1:
            raise InvalidArgument("erase_limit must be >= 1")


@dataclass
class SimReport:
    policy: str
    cleaning_cost: float
    iops: float
    wear_leveling: float
    occupancy: np.ndarray
    final_occupancy: np.ndarray
    total_erases: int
    gc_ops: int
    relocated: int
    served: int
    writes: int
    reads: int
    rejected: int
    elapsed_ms: float
    mean_queue_delay: float
    mean_window: float
    erase_counts: np.ndarray = field(repr=False)
    snapshots: list[tuple[float, tuple[int, ...]]] = field(default_factory=list, repr=False)
    estimator: TransitionEstimator | None = field(default=None, repr=False)
    lifetime: float | None = None
    retired: int = 0

    def transition_model(self, lam: float = 1.0) -> TransitionModel:
        if self.estimator is None:
            raise InvalidArgument("transition observation was not enabled")
        return self.estimator.model(lam)

    SUMMARY_FIELDS = ("policy", "cleaning_cost", "iops", "wear_leveling", "total_erases", "gc_ops",
                      "relocated", "served", "writes", "reads", "rejected", "elapsed_ms",
                      "mean_queue_delay", "mean_window", "lifetime", "retired")

    def summary_row(self) -> list[str]:
        return [_fmt(getattr(self, f)) for f in self.SUMMARY_FIELDS]

    def summary(self) -> str:
        return " ".join(f"{f}={v}" for f, v in zip(self.SUMMARY_FIELDS, self.summary_row()))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def empirical_wear_leveling(erase_counts) -> float:
    """Jain fairness index ``(sum c)^2 / (n * sum c^2)`` of per-block erase counts."""
    c = np.asarray(erase_counts, dtype=float)
    if c.size == 0 or not np.any(c):
        raise InvalidArgument("wear-leveling is undefined when no block has been erased")
    s = math.fsum(c)
    return s * s / (c.size * math.fsum(c * c))


class Ssd:
    """Mutable simulator state: packages, per-package FCFS servers and counters."""

    def __init__(self, config: SimConfig):
        self.config = config
        g = config.geometry
        self.geometry = g
        self.timing = config.timing
        self.packages = [
            FlashPackage(g.blocks_per_package, g.k, g.logical_pages_per_package, g.gc_threshold,
                         config.policy, random.Random(config.seed * 1_000_003 + p), config.erase_limit)
            for p in range(g.packages)
        ]
        self.server_free = [0.0] * g.packages
        self.first_arrival: float | None = None
        self.last_completion = 0.0
        self.clock = 0.0
        self.served = self.writes = self.reads = self.rejected = 0
        self.queue_delay = 0.0
        self.snapshots: list[tuple[float, tuple[int, ...]]] = []
        self.retire_target: int | None = None
        t = self.timing
        xfer = g.page_size * t.transfer_per_byte
        self.write_latency = t.write_page + xfer
        self.read_latency = t.read_page + xfer
        self.move_latency = t.read_page + t.write_page + xfer
        if config.initial_state == "full":
            for pkg in self.packages:
                pkg.fill(range(pkg.logical_pages))

    @property
    def retired(self) -> int:
        return sum(p.retired_count for p in self.packages)

    def retire_reached(self) -> bool:
        return self.retire_target is not None and self.retired >= self.retire_target

    def start_observation(self) -> None:
        for pkg in self.packages:
            pkg.start_observation()

    def apply_page(self, arrival: float, lpn: int, write: bool) -> float:
        """Serve a single-page request and return its latency (ms, excluding queueing)."""
        g = self.geometry
        if lpn < 0 or lpn >= g.logical_pages:
            self.rejected += 1
            return 0.0
        npk = g.packages
        p = lpn % npk
        pkg = self.packages[p]
        if write:
            pkg.write(lpn // npk)
            latency = self.write_latency
            self.writes += 1
            if len(pkg.free) < pkg.gc_low:
                ops, moved = pkg.collect(self.retire_reached)
                latency += moved * self.move_latency + ops * self.timing.erase_block
        else:
            latency = self.read_latency
            self.reads += 1
        start = self.server_free[p]
        if start < arrival:
            start = arrival
        else:
            self.queue_delay += start - arrival
        done = start + latency
        self.server_free[p] = done
        if self.first_arrival is None:
            self.first_arrival = arrival
        if done > self.last_completion:
            self.last_completion = done
        self.clock = done
        self.served += 1
        return latency

    def apply_request(self, req: IoRequest) -> float:
        """Serve every page touched by ``req``; returns the summed latency."""
        spp = self.geometry.sectors_per_page
        first = req.start_lba // spp
        last = (req.end_lba - 1) // spp
        write = req.op is Op.WRITE
        return sum(self.apply_page(req.arrival_time, lpn, write) for lpn in range(first, last + 1))

    def snapshot(self) -> None:
        counts = [0] * (self.geometry.k + 1)
        for pkg in self.packages:
            for i, n in enumerate(pkg.counts):
                counts[i] += n
        self.snapshots.append((self.clock, tuple(counts)))

    def occupancy(self) -> np.ndarray:
        counts = np.zeros(self.geometry.k + 1)
        for pkg in self.packages:
            counts += pkg.counts
        return counts / counts.sum()

    def time_averaged_occupancy(self) -> np.ndarray:
        area = np.zeros(self.geometry.k + 1)
        for pkg in self.packages:
            if pkg.observer is None:
                return self.occupancy()
            a, _ = pkg.observer.totals(pkg.counts, pkg.steps)
            area += np.asarray(a, dtype=float)
        if area.sum() == 0:
            return self.occupancy()
        return area / area.sum()

    def estimator(self) -> TransitionEstimator | None:
        k = self.geometry.k
        est = TransitionEstimator(k)
        seen = False
        for pkg in self.packages:
            obs = pkg.observer
            if obs is None:
                return None
            steps = pkg.steps - obs.start
            if steps == 0:
                continue
            seen = True
            _, zero = obs.totals(pkg.counts, pkg.steps)
            n = pkg.active_blocks
            est.add_totals([n * x for x in obs.up], [n * x for x in obs.down],
                           [steps - z for z in zero], steps)
        return est if seen else None

    def report(self, lifetime: float | None = None) -> SimReport:
        erases = np.array([e for pkg in self.packages for e in pkg.erase], dtype=float)
        gc_ops = sum(p.gc_ops for p in self.packages)
        relocated = sum(p.relocated for p in self.packages)
        draws = sum(p.window_draws for p in self.packages)
        elapsed = self.last_completion - (self.first_arrival or 0.0)
        try:
            wear = empirical_wear_leveling(erases)
        except InvalidArgument:
            wear = math.nan
        return SimReport(
            policy=self.config.policy.label,
            cleaning_cost=relocated / gc_ops if gc_ops else 0.0,
            iops=self.served / (elapsed / 1000.0) if elapsed > 0 else 0.0,
            wear_leveling=wear,
            occupancy=self.time_averaged_occupancy(),
            final_occupancy=self.occupancy(),
            total_erases=int(erases.sum()),
            gc_ops=gc_ops,
            relocated=relocated,
            served=self.served,
            writes=self.writes,
            reads=self.reads,
            rejected=self.rejected,
            elapsed_ms=elapsed,
            mean_queue_delay=self.queue_delay / self.served if self.served else 0.0,
            mean_window=sum(p.window_sum for p in self.packages) / draws if draws else math.nan,
            erase_counts=erases,
            snapshots=list(self.snapshots),
            estimator=self.estimator() if self.config.observe else None,
            lifetime=lifetime,
            retired=self.retired,
        )

    def dump(self) -> str:
        """Versioned plain-text snapshot of the full physical state."""
        g = self.geometry
        out = io.StringIO()
        out.write(f"{DUMP_HEADER}\n")
        out.write(f"geometry blocks={g.blocks_per_package} k={g.k} page_size={g.page_size} "
                  f"packages={g.packages} op={g.over_provisioning!r} gc_threshold={g.gc_threshold!r}\n")
        out.write(f"clock {self.clock!r}\nserved {self.served}\n")
        for p, pkg in enumerate(self.packages):
            out.write(f"package {p} frontier={pkg.frontier} free={len(pkg.free)} "
                      f"eligible={len(pkg.eligible)} gc_ops={pkg.gc_ops} relocated={pkg.relocated}\n")
            out.write("# block valid write_pointer erases retired\n")
            for b in range(pkg.N):
                out.write(f"{b} {pkg.valid[b]} {pkg.wp[b]} {pkg.erase[b]} {pkg.retired[b]}\n")
        out.write("end\n")
        return out.getvalue()


def _pages(stream: Iterable[IoRequest], spp: int):
    for req in stream:
        first = req.start_lba // spp
        last = (req.start_lba + (req.size + SECTOR - 1) // SECTOR - 1) // spp
        write = req.op is Op.WRITE
        t = req.arrival_time
        for lpn in range(first, last + 1):
            yield t, lpn, write


def _drive(ssd: Ssd, stream, stop: Callable[[], bool] | None = None) -> bool:
    """Feed page operations to ``ssd``; returns True if ``stop`` fired."""
    cfg = ssd.config
    warm = cfg.warmup_requests
    every = cfg.snapshot_every
    apply = ssd.apply_page
    count = 0
    if cfg.observe and warm == 0:
        ssd.start_observation()
    for t, lpn, write in _pages(stream, ssd.geometry.sectors_per_page):
        apply(t, lpn, write)
        count += 1
        if count == warm and cfg.observe:
            ssd.start_observation()
        if every and count % every == 0:
            ssd.snapshot()
        if stop is not None and stop():
            return True
    return False


def simulate(workload: Iterable[IoRequest], config: SimConfig) -> SimReport:
    """Run ``workload`` through a fresh SSD.

    ``warmup_requests`` counts page operations; occupancy and transition
    statistics only cover the operations after it.
    """
    ssd = Ssd(config)
    try:
        _drive(ssd, workload)
    except SimulationAborted as exc:
        exc.report = ssd.report()
        exc.dump = ssd.dump()
        raise
    return ssd.report()


@dataclass(frozen=True)
class DurabilityResult:
    policy: str
    lifetime: float
    normalized: float
    report: SimReport


def run_durability(workload: Iterable[IoRequest], config: SimConfig, erase_limit: int = 50,
                   bad_block_budget: float = 0.05) -> SimReport:
    """Run until ``ceil(e * N)`` blocks per package have reached ``erase_limit`` erasures.

    The lifetime in the returned report is the completion time (ms) of the
    request that retired the last budgeted block.
    """
    if erase_limit < 1:
        raise InvalidArgument("erase_limit must be >= 1")
    if not 0.0 < bad_block_budget < 1.0:
        raise InvalidArgument("bad-block budget must lie in (0, 1)")
    cfg = SimConfig(
        geometry=config.geometry, timing=config.timing, policy=config.policy, initial_state="empty",
        seed=config.seed, warmup_requests=config.warmup_requests, observe=False,
        snapshot_every=config.snapshot_every, erase_limit=erase_limit,
    )
    g = cfg.geometry
    target = math.ceil(bad_block_budget * g.blocks_per_package * g.packages)
    ssd = Ssd(cfg)
    ssd.retire_target = target
    try:
        done = _drive(ssd, workload, stop=ssd.retire_reached)
    except SimulationAborted as exc:
        exc.report = ssd.report()
        exc.dump = ssd.dump()
        raise
    if not done:
        raise InconclusiveRun(
            f"workload exhausted with {ssd.retired} of {target} blocks worn out",
            progress=ssd.retired / target, report=ssd.report(),
        )
    return ssd.report(lifetime=ssd.clock)


def compare_durability(workload: Iterable[IoRequest], config: SimConfig, policies: Iterable[GcPolicy],
                       erase_limit: int = 50, bad_block_budget: float = 0.05) -> list[DurabilityResult]:
    """Durability per policy, normalized against a greedy run with the same seed.

    ``workload`` must be re-iterable; every policy sees the same requests.
    """
    def one(policy: GcPolicy) -> SimReport:
        cfg = SimConfig(geometry=config.geometry, timing=config.timing, policy=policy,
                        seed=config.seed, observe=False)
        return run_durability(workload, cfg, erase_limit, bad_block_budget)

    base = one(GcPolicy.greedy())
    results = [DurabilityResult(base.policy, base.lifetime, 1.0, base)]
    for pol in policies:
        if pol.kind is PolicyKind.GREEDY:
            continue
        rep = one(pol)
        results.append(DurabilityResult(rep.policy, rep.lifetime, rep.lifetime / base.lifetime, rep))
    return results


def write_reports_csv(path, reports: Iterable[SimReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SimReport.SUMMARY_FIELDS)
        for r in reports:
            w.writerow(r.summary_row())


def write_snapshots_csv(path, snapshots, k: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"n_{i}" for i in range(k + 1)])
        for t, counts in snapshots:
            w.writerow([repr(float(t))] + list(counts))


__all__ = [
    "DUMP_HEADER", "DurabilityResult", "SimConfig", "SimReport", "Ssd", "SsdGcError", "TimingModel",
    "compare_durability", "empirical_wear_leveling", "run_durability", "simulate",
    "write_reports_csv", "write_snapshots_csv",
]
