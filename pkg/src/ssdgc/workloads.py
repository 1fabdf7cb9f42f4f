"""Synthetic request generators, trace parsing, page alignment and replay."""

from __future__ import annotations

import csv
import enum
import math
import random
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field, replace

from .errors import InvalidArgument, TraceParseError

SECTOR = 512


class Op(str, enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True, slots=True)
class IoRequest:
    arrival_time: float  # ms
    start_lba: int  # 512-byte sectors
    size: int  # bytes
    op: Op = Op.WRITE

    def __post_init__(self):
        if self.size <= 0:
            raise InvalidArgument(f"request size must be positive, got {self.size}")
        if self.start_lba < 0:
            raise InvalidArgument(f"negative start address {self.start_lba}")

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE

    @property
    def end_lba(self) -> int:
        """One past the last sector touched."""
        return self.start_lba + -(-self.size // SECTOR)


class Pattern(str, enum.Enum):
    RANDOM = "random"
    SEQUENTIAL = "sequential"
    HYBRID = "hybrid"


class Arrival(str, enum.Enum):
    POISSON = "poisson"
    NORMAL = "normal"


@dataclass(frozen=True)
class SyntheticSpec:
    pattern: Pattern = Pattern.RANDOM
    arrival: Arrival = Arrival.POISSON
    write_ratio: float = 1.0
    request_count: int = 100_000
    mean_interarrival: float = 100.0
    interarrival_stddev: float = 10.0
    request_size: int = 4096
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(self, "arrival", Arrival(self.arrival))
        if not 0.0 <= self.write_ratio <= 1.0:
            raise InvalidArgument("write_ratio must lie in [0, 1]")
        if self.request_count < 0:
            raise InvalidArgument("request_count must be non-negative")
        if not self.mean_interarrival > 0:
            raise InvalidArgument("mean_interarrival must be positive")
        if self.interarrival_stddev < 0:
            raise InvalidArgument("interarrival_stddev must be non-negative")
        if self.request_size <= 0 or self.request_size % SECTOR:
            raise InvalidArgument("request_size must be a positive multiple of 512 bytes")


class SyntheticStream:
    """Iterable request stream; re-iterating replays the same requests."""

    def __init__(self, spec: SyntheticSpec, logical_space: int):
        if logical_space <= 0:
            raise InvalidArgument("logical_space must be positive")
        span = spec.request_size // SECTOR
        if span > logical_space:
            raise InvalidArgument("request_size exceeds the logical space")
        self.spec = spec
        self.logical_space = logical_space
        self.random_requests = 0
        self.sequential_requests = 0

    def __len__(self) -> int:
        return self.spec.request_count

    def __iter__(self) -> Iterator[IoRequest]:
        spec = self.spec
        rng = random.Random(spec.seed)
        span = spec.request_size // SECTOR
        slots = self.logical_space // span
        self.random_requests = self.sequential_requests = 0
        t = 0.0
        cursor = 0
        for _ in range(spec.request_count):
            if spec.arrival is Arrival.POISSON:
                t += rng.expovariate(1.0 / spec.mean_interarrival)
            else:
                t += max(0.0, rng.gauss(spec.mean_interarrival, spec.interarrival_stddev))
            if spec.pattern is Pattern.RANDOM:
                use_random = True
            elif spec.pattern is Pattern.SEQUENTIAL:
                use_random = False
            else:
                use_random = rng.random() < 0.5
            if use_random:
                start = rng.randrange(slots) * span
                self.random_requests += 1
            else:
                start = cursor if cursor + span <= self.logical_space else 0
                self.sequential_requests += 1
            cursor = start + span
            op = Op.WRITE if spec.write_ratio >= 1.0 or rng.random() < spec.write_ratio else Op.READ
            yield IoRequest(t, start, spec.request_size, op)


def generate(spec: SyntheticSpec, logical_space: int) -> SyntheticStream:
    """Synthetic stream over ``logical_space`` sectors.

    Random starts are uniform over request-size slots, sequential starts
    follow the previous request and wrap to 0, hybrid flips a fair coin.
    """
    return SyntheticStream(spec, logical_space)


# ---------------------------------------------------------------- traces


@dataclass
class ParsedTrace:
    requests: list[IoRequest]
    filtered: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.requests)

    def __len__(self):
        return len(self.requests)


_OPS = {"r": Op.READ, "read": Op.READ, "w": Op.WRITE, "write": Op.WRITE}


def _parse_op(token: str) -> Op:
    try:
        return _OPS[token.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown opcode {token!r}") from None


def parse_trace(lines: Iterable[str], fmt: str = "spc", logical_space: int | None = None,
                strict: bool = False) -> ParsedTrace:
    """Parse an SPC or generic CSV trace.

    SPC lines are ``asu,lba,size,opcode,timestamp`` with the timestamp in
    seconds. Generic CSV starts with the header ``time_ms,op,lba,bytes``.
    Malformed lines are skipped with a diagnostic unless ``strict``; requests
    reaching past ``logical_space`` sectors are dropped and counted.
    """
    if fmt not in ("spc", "csv"):
        raise InvalidArgument(f"unknown trace format {fmt!r}")
    out = ParsedTrace([])
    reader = csv.reader(lines)
    header_seen = fmt == "spc"
    last_t = -math.inf
    for lineno, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            names = [c.strip().lower() for c in row]
            if names != ["time_ms", "op", "lba", "bytes"]:
                raise TraceParseError(f"expected header time_ms,op,lba,bytes, got {','.join(row)}", lineno)
            header_seen = True
            continue
        try:
            if fmt == "spc":
                if len(row) < 5:
                    raise ValueError(f"expected 5 fields, got {len(row)}")
                lba, size, op, t = int(row[1]), int(row[2]), _parse_op(row[3]), float(row[4]) * 1000.0
            else:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                t, op, lba, size = float(row[0]), _parse_op(row[1]), int(row[2]), int(row[3])
            req = IoRequest(t, lba, size, op)
        except (ValueError, InvalidArgument) as exc:
            if strict:
                raise TraceParseError(str(exc), lineno) from None
            out.diagnostics.append(f"line {lineno}: {exc}")
            continue
        if req.arrival_time < last_t:
            out.diagnostics.append(f"line {lineno}: arrival time goes backwards")
            if strict:
                raise TraceParseError("arrival time goes backwards", lineno)
            continue
        if logical_space is not None and req.end_lba > logical_space:
            out.filtered += 1
            continue
        last_t = req.arrival_time
        out.requests.append(req)
    return out


def sequential_ratio(stream: Iterable[IoRequest]) -> float:
    """Fraction of requests starting right after the previous request's last sector."""
    prev_end = None
    hits = total = 0
    for req in stream:
        if prev_end is not None and req.start_lba == prev_end:
            hits += 1
        prev_end = req.end_lba
        total += 1
    return hits / total if total else 0.0


def align_to_pages(stream: Iterable[IoRequest], page_size: int = 4096) -> Iterator[IoRequest]:
    """Expand each request to the whole pages it touches, one request per page."""
    if page_size < SECTOR or page_size % SECTOR or page_size & (page_size - 1):
        raise InvalidArgument("page_size must be a power-of-two multiple of 512")
    spp = page_size // SECTOR
    for req in stream:
        first = req.start_lba // spp
        last = (req.end_lba - 1) // spp
        for page in range(first, last + 1):
            yield IoRequest(req.arrival_time, page * spp, page_size, req.op)


def replay(stream: Sequence[IoRequest], cycles: int = 1, target_total: int | None = None) -> Iterator[IoRequest]:
    """Repeat ``stream``, shifting copy ``j`` by ``j * (span + mean gap)``.

    With ``target_total`` the output has exactly that many requests,
    regardless of ``cycles``.
    """
    base = list(stream)
    if not base:
        raise InvalidArgument("cannot replay an empty stream")
    if target_total is None and cycles < 1:
        raise InvalidArgument("cycles must be >= 1")
    if target_total is not None and target_total < 0:
        raise InvalidArgument("target_total must be non-negative")
    first = base[0].arrival_time
    span = base[-1].arrival_time - first
    gap = span / (len(base) - 1) if len(base) > 1 else 0.0
    shift = span + gap
    limit = target_total if target_total is not None else cycles * len(base)
    emitted = 0
    j = 0
    while emitted < limit:
        offset = j * shift
        for req in base:
            if emitted >= limit:
                return
            yield replace(req, arrival_time=req.arrival_time + offset) if offset else req
            emitted += 1
        j += 1


def write_trace_csv(path, stream: Iterable[IoRequest]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_ms", "op", "lba", "bytes"])
        for r in stream:
            w.writerow([repr(r.arrival_time), r.op.value, r.start_lba, r.size])
