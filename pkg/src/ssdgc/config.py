"""INI experiment configuration with the standard flash parameters as defaults.

Sections and keys (all optional)::

    [geometry]   page_size, pages_per_block, blocks_per_package, packages,
                 over_provisioning, gc_threshold
    [timing]     read_page, write_page, erase_block, transfer_per_byte   (ms)
    [policy]     policies (comma list: greedy, random, rga:<d>), tie_break
    [workload]   pattern, arrival, write_ratio, request_count, mean_interarrival,
                 interarrival_stddev, request_size, footprint, replay_base,
                 trace, trace_format
    [simulation] initial_state, warmup, snapshot_every
    [model]      k, lambda, p_file, step_size, max_time, convergence_eps
    [validate]   blocks, pages_per_block, requests, cells, policy
    [tradeoff]   distributions, grid_points, d_values
    [durability] blocks, pages_per_block, erase_limit, bad_block_budget,
                 mean_interarrival, pattern, footprint, request_count, policies
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigError, SsdGcError
from .model import SsdGeometry
from .ssdsim import GcPolicy, TimingModel
from .workloads import Arrival, Pattern, SyntheticSpec

KINDS = ("fixed-point", "validate", "tradeoff", "rga-sweep", "simulate", "durability")

DEFAULT_POLICIES = "greedy, random, rga:2, rga:5, rga:10, rga:30, rga:50"
DEFAULT_DISTRIBUTIONS = "binomial:64, normal:64:20:10, normal:64:32:5, normal:64:44:10"
DEFAULT_CELLS = ("random:poisson, sequential:poisson, hybrid:poisson, "
                 "random:normal, sequential:normal, hybrid:normal")


@dataclass(frozen=True)
class ModelSettings:
    k: int = 16
    lam: float = 1.0
    p_file: str | None = None
    step_size: float | None = None
    max_time: float = 1e6
    convergence_eps: float = 1e-11


@dataclass(frozen=True)
class ValidateSettings:
    blocks: int = 1280
    pages_per_block: int = 16
    requests: int = 2_000_000
    cells: tuple[tuple[str, str], ...] = ()
    policy: str = "greedy"


@dataclass(frozen=True)
class TradeoffSettings:
    distributions: tuple[str, ...] = ()
    grid_points: int = 101
    d_values: tuple[float, ...] = ()


@dataclass(frozen=True)
class DurabilitySettings:
    blocks: int = 4096
    pages_per_block: int = 16
    erase_limit: int = 50
    bad_block_budget: float = 0.05
    mean_interarrival: float = 10.0
    pattern: str = "sequential"
    footprint: float = 0.1
    request_count: int = 20_000_000
    policies: tuple[str, ...] = ("greedy", "random", "rga:5")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: SsdGeometry = field(default_factory=lambda: SsdGeometry(pages_per_block=64))
    timing: TimingModel = field(default_factory=TimingModel)
    policies: tuple[GcPolicy, ...] = ()
    workload: SyntheticSpec = field(default_factory=SyntheticSpec)
    footprint: float = 0.05
    replay_base: int = 50_000
    trace: str | None = None
    trace_format: str = "spc"
    initial_state: str = "full"
    warmup: float = 0.2
    snapshot_every: int = 0
    model: ModelSettings = field(default_factory=ModelSettings)
    validate: ValidateSettings = field(default_factory=ValidateSettings)
    tradeoff: TradeoffSettings = field(default_factory=TradeoffSettings)
    durability: DurabilitySettings = field(default_factory=DurabilitySettings)
    seed: int = 0


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _policy_list(text: str, tie_break: str) -> tuple[GcPolicy, ...]:
    out = []
    for tok in _split(text):
        pol = GcPolicy.parse(tok)
        if pol.kind.value == "rga":
            pol = GcPolicy.rga(pol.d, tie_break)
        out.append(pol)
    if not out:
        raise ConfigError("policy list is empty")
    return tuple(out)


def _cells(text: str) -> tuple[tuple[str, str], ...]:
    cells = []
    for tok in _split(text):
        pattern, _, arrival = tok.partition(":")
        try:
            cells.append((Pattern(pattern.strip()).value, Arrival((arrival or "poisson").strip()).value))
        except ValueError:
            raise ConfigError(f"bad validation cell {tok!r}; expected <pattern>:<arrival>") from None
    return tuple(cells)


def load_config(path: str | os.PathLike | None = None, seed: int | None = None) -> ExperimentConfig:
    """Read an INI file (or use defaults when ``path`` is None)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
    known = {"geometry", "timing", "policy", "workload", "simulation", "model", "validate", "tradeoff",
             "durability"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    for name in known:
        if not cp.has_section(name):
            cp.add_section(name)
    try:
        return _build(cp, seed)
    except ConfigError:
        raise
    except (ValueError, TypeError, SsdGcError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _build(cp: configparser.ConfigParser, seed: int | None) -> ExperimentConfig:
    geo, tim, pol, wl, sim = cp["geometry"], cp["timing"], cp["policy"], cp["workload"], cp["simulation"]
    md, va, tr, du = cp["model"], cp["validate"], cp["tradeoff"], cp["durability"]
    seed = seed if seed is not None else wl.getint("seed", 0)
    geometry = SsdGeometry(
        blocks_per_package=geo.getint("blocks_per_package", 16384),
        pages_per_block=geo.getint("pages_per_block", 64),
        page_size=geo.getint("page_size", 4096),
        packages=geo.getint("packages", 1),
        over_provisioning=geo.getfloat("over_provisioning", 0.15),
        gc_threshold=geo.getfloat("gc_threshold", 0.05),
    )
    timing = TimingModel(
        read_page=tim.getfloat("read_page", 0.025),
        write_page=tim.getfloat("write_page", 0.2),
        erase_block=tim.getfloat("erase_block", 1.5),
        transfer_per_byte=tim.getfloat("transfer_per_byte", 0.000025),
    )
    tie_break = pol.get("tie_break", "lowest-id")
    policies = _policy_list(pol.get("policies", DEFAULT_POLICIES), tie_break)
    workload = SyntheticSpec(
        pattern=wl.get("pattern", "hybrid"),
        arrival=wl.get("arrival", "poisson"),
        write_ratio=wl.getfloat("write_ratio", 1.0),
        request_count=wl.getint("request_count", 1_000_000),
        mean_interarrival=wl.getfloat("mean_interarrival", 100.0),
        interarrival_stddev=wl.getfloat("interarrival_stddev", 10.0),
        request_size=wl.getint("request_size", geometry.page_size),
        seed=seed,
    )
    footprint = wl.getfloat("footprint", 0.05)
    if not 0.0 < footprint <= 1.0:
        raise ConfigError("footprint must lie in (0, 1]")
    trace = wl.get("trace", None) or None
    if trace is not None and not os.path.isfile(trace):
        raise ConfigError(f"trace file not found: {trace}")
    trace_format = wl.get("trace_format", "spc")
    if trace_format not in ("spc", "csv"):
        raise ConfigError("trace_format must be spc or csv")
    initial_state = sim.get("initial_state", "full")
    if initial_state not in ("full", "empty"):
        raise ConfigError("initial_state must be full or empty")
    warmup = sim.getfloat("warmup", 0.2)
    if not 0.0 <= warmup < 1.0:
        raise ConfigError("warmup must lie in [0, 1)")
    p_file = md.get("p_file", None) or None
    if p_file is not None and not os.path.isfile(p_file):
        raise ConfigError(f"transition file not found: {p_file}")
    step = md.get("step_size", None)
    model = ModelSettings(
        k=md.getint("k", 16),
        lam=md.getfloat("lambda", 1.0),
        p_file=p_file,
        step_size=float(step) if step else None,
        max_time=md.getfloat("max_time", 1e6),
        convergence_eps=md.getfloat("convergence_eps", 1e-11),
    )
    validate = ValidateSettings(
        blocks=va.getint("blocks", 1280),
        pages_per_block=va.getint("pages_per_block", 16),
        requests=va.getint("requests", 2_000_000),
        cells=_cells(va.get("cells", DEFAULT_CELLS)),
        policy=va.get("policy", "greedy"),
    )
    GcPolicy.parse(validate.policy)
    d_text = tr.get("d_values", "")
    d_values = tuple(float(x) for x in _split(d_text)) if d_text else tuple(
        [1.0 + 0.05 * i for i in range(21)] + [float(d) for d in range(3, 101)])
    tradeoff = TradeoffSettings(
        distributions=tuple(_split(tr.get("distributions", DEFAULT_DISTRIBUTIONS))),
        grid_points=tr.getint("grid_points", 101),
        d_values=d_values,
    )
    if tradeoff.grid_points < 1:
        raise ConfigError("grid_points must be >= 1")
    durability = DurabilitySettings(
        blocks=du.getint("blocks", 4096),
        pages_per_block=du.getint("pages_per_block", 16),
        erase_limit=du.getint("erase_limit", 50),
        bad_block_budget=du.getfloat("bad_block_budget", 0.05),
        mean_interarrival=du.getfloat("mean_interarrival", 10.0),
        pattern=Pattern(du.get("pattern", "sequential")).value,
        footprint=du.getfloat("footprint", 0.1),
        request_count=du.getint("request_count", 20_000_000),
        policies=tuple(_split(du.get("policies", "greedy, random, rga:5"))),
    )
    for p in durability.policies:
        GcPolicy.parse(p)
    return ExperimentConfig(
        geometry=geometry, timing=timing, policies=policies, workload=workload, footprint=footprint,
        replay_base=wl.getint("replay_base", 50_000), trace=trace, trace_format=trace_format,
        initial_state=initial_state, warmup=warmup, snapshot_every=sim.getint("snapshot_every", 0),
        model=model, validate=validate, tradeoff=tradeoff, durability=durability, seed=seed,
    )


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seed=seed, workload=replace(cfg.workload, seed=seed))
