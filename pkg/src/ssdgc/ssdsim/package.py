"""Physical state of one flash package: pages, blocks, mapping and GC."""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from collections.abc import Callable

from ..errors import GcDeadlock, GcStarvation, InvalidArgument
from .policy import GcPolicy, PolicyKind

CLEAN, VALID, INVALID = 0, 1, 2


class OccupancyObserver:
    """Time-weighted block-type histogram and per-request transition ratios.

    One observation step is a user page request or one GC page relocation.
    A block's transition in a step is its net type change across it. For
    each type ``i`` the observer tracks the area under ``n_i``, the number of
    steps with ``n_i = 0``, and the running sums of ``1 / n_i`` over the
    blocks of type ``i`` that moved up or down. Updates are O(1) per step.
    """

    def __init__(self, counts: list[int], start: int):
        size = len(counts)
        self.start = start
        self.since = [start] * size
        self.area = [0] * size
        self.zero = [0] * size
        self.up = [0.0] * size
        self.down = [0.0] * size

    def totals(self, counts: list[int], now: int) -> tuple[list[int], list[int]]:
        """Closed-out (area, zero-steps) at step ``now`` without mutating state."""
        area = list(self.area)
        zero = list(self.zero)
        for x, n in enumerate(counts):
            span = now - self.since[x]
            area[x] += n * span
            if n == 0:
                zero[x] += span
        return area, zero

    def settle(self, x: int, before: int, t1: int) -> None:
        span = t1 - self.since[x]
        self.area[x] += before * span
        if before == 0:
            self.zero[x] += span
        self.since[x] = t1


class FlashPackage:
    def __init__(self, blocks: int, k: int, logical_pages: int, gc_threshold: float,
                 policy: GcPolicy, rng: random.Random, erase_limit: int | None = None):
        if logical_pages > blocks * k:
            raise InvalidArgument("logical space exceeds physical capacity")
        self.N = blocks
        self.k = k
        self.logical_pages = logical_pages
        self.policy = policy
        self.rng = rng
        self.erase_limit = erase_limit
        self.gc_low = math.ceil(gc_threshold * blocks)
        self.gc_high = self.gc_low + 1

        self.valid = [0] * blocks
        self.wp = [0] * blocks
        self.erase = [0] * blocks
        self.retired = bytearray(blocks)
        self.retired_count = 0
        self.pages = bytearray(blocks * k)
        self.p2l = [-1] * (blocks * k)
        self.l2p = [-1] * logical_pages
        self.free = deque(range(blocks))
        self.frontier = self.free.popleft()
        self.eligible: list[int] = []
        self.epos = [-1] * blocks
        self.heap: list[tuple[int, int]] = []
        self.use_heap = policy.kind is PolicyKind.GREEDY
        self.counts = [0] * (k + 1)
        self.counts[0] = blocks

        self.steps = 0
        self.observer: OccupancyObserver | None = None
        self.pending: list[tuple[int, int, int]] = []
        self.gc_ops = 0
        self.relocated = 0
        self.window_sum = 0
        self.window_draws = 0

    # ------------------------------------------------------------ bookkeeping

    @property
    def active_blocks(self) -> int:
        return self.N - self.retired_count

    def start_observation(self) -> None:
        self.observer = OccupancyObserver(self.counts, self.steps)

    def _shift(self, b: int, old: int, new: int) -> None:
        self.counts[old] -= 1
        self.counts[new] += 1
        if self.observer is not None:
            self.pending.append((b, old, new))

    def _commit(self) -> None:
        """Close one observation step over the moves made since the last commit."""
        moves = self.pending
        t1 = self.steps + 1
        self.steps = t1
        if not moves:
            return
        self.pending = []
        obs = self.observer
        counts = self.counts
        if len(moves) == 2 and moves[0][0] == moves[1][0]:
            # one block went down and back up (or vice versa): no net transition
            return
        before = {}
        for _, old, new in moves:
            before[old] = before.get(old, counts[old]) + 1
            before[new] = before.get(new, counts[new]) - 1
        for x, n in before.items():
            obs.settle(x, n, t1)
        for _, old, new in moves:
            if new > old:
                obs.up[old] += 1.0 / before[old]
            else:
                obs.down[old] += 1.0 / before[old]

    def _make_eligible(self, b: int) -> None:
        self.epos[b] = len(self.eligible)
        self.eligible.append(b)
        if self.use_heap:
            heapq.heappush(self.heap, (self.valid[b], b))

    def _drop_eligible(self, b: int) -> None:
        pos = self.epos[b]
        last = self.eligible.pop()
        if last != b:
            self.eligible[pos] = last
            self.epos[last] = pos
        self.epos[b] = -1

    def _open_frontier(self) -> int:
        if not self.free:
            raise GcDeadlock("no free block left for the write frontier")
        old = self.frontier
        self._make_eligible(old)
        self.frontier = self.free.popleft()
        return self.frontier

    # ------------------------------------------------------------ page ops

    def program(self, lpn: int) -> None:
        f = self.frontier
        k = self.k
        if self.wp[f] == k:
            f = self._open_frontier()
        ppn = f * k + self.wp[f]
        self.wp[f] += 1
        self.pages[ppn] = VALID
        self.p2l[ppn] = lpn
        self.l2p[lpn] = ppn
        v = self.valid[f]
        self.valid[f] = v + 1
        self._shift(f, v, v + 1)

    def invalidate(self, ppn: int) -> None:
        b = ppn // self.k
        self.pages[ppn] = INVALID
        self.p2l[ppn] = -1
        v = self.valid[b] - 1
        self.valid[b] = v
        self._shift(b, v + 1, v)
        if self.use_heap and self.epos[b] >= 0:
            heapq.heappush(self.heap, (v, b))

    def write(self, lpn: int) -> None:
        old = self.l2p[lpn]
        if old >= 0:
            self.invalidate(old)
        self.program(lpn)
        if self.observer is not None:
            self._commit()

    def fill(self, lpns) -> None:
        """Write each logical page once, bypassing observation and GC."""
        obs, self.observer = self.observer, None
        for lpn in lpns:
            self.write(lpn)
        self.observer = obs

    # ------------------------------------------------------------ GC

    def needs_gc(self) -> bool:
        return len(self.free) < self.gc_low

    def select_victim(self) -> int:
        elig = self.eligible
        if not elig:
            raise GcStarvation("no block is eligible for garbage collection")
        pol = self.policy
        kind = pol.kind
        if kind is PolicyKind.GREEDY:
            return self._greedy_victim()
        rng = self.rng
        if kind is PolicyKind.RANDOM:
            return elig[rng.randrange(len(elig))]
        lo = pol.window_low
        w = lo if rng.random() < pol.window_p else lo + 1
        self.window_sum += w
        self.window_draws += 1
        n = len(elig)
        valid = self.valid
        if w >= n:
            return min(elig, key=lambda b: (valid[b], b))
        best = -1
        best_v = self.k + 1
        if w == 1:
            return elig[rng.randrange(n)]
        drawn = set()
        lowest_id = pol.tie_break == "lowest-id"
        while len(drawn) < w:
            i = rng.randrange(n)
            if i in drawn:
                continue
            drawn.add(i)
            b = elig[i]
            v = valid[b]
            if v < best_v or (lowest_id and v == best_v and b < best):
                best, best_v = b, v
        return best

    def _greedy_victim(self) -> int:
        heap = self.heap
        valid, epos = self.valid, self.epos
        if len(heap) > 4 * self.N + 1000:
            self.heap = heap = [(valid[b], b) for b in self.eligible]
            heapq.heapify(heap)
        while heap:
            v, b = heap[0]
            if epos[b] >= 0 and valid[b] == v:
                return b
            heapq.heappop(heap)
        raise GcStarvation("greedy index is empty")

    def clean_pages(self) -> int:
        return (self.k - self.wp[self.frontier]) + self.k * len(self.free)

    def collect_one(self) -> int:
        """Run one GC operation and return the number of relocated pages."""
        victim = self.select_victim()
        v = self.valid[victim]
        if v > self.clean_pages():
            raise GcDeadlock(f"victim {victim} holds {v} valid pages but only {self.clean_pages()} clean pages remain")
        self._drop_eligible(victim)
        k = self.k
        base = victim * k
        pages, p2l = self.pages, self.p2l
        if v:
            for ppn in range(base, base + k):
                if pages[ppn] == VALID:
                    self.program(p2l[ppn])
                    self.invalidate(ppn)
                    if self.observer is not None:
                        self._commit()
        pages[base:base + k] = bytes(k)
        self.wp[victim] = 0
        self.erase[victim] += 1
        self.gc_ops += 1
        self.relocated += v
        if self.erase_limit is not None and self.erase[victim] >= self.erase_limit:
            self.retired[victim] = 1
            self.retired_count += 1
            self._retire_count(victim)
        else:
            self.free.append(victim)
        return v

    def _retire_count(self, b: int) -> None:
        # A retired block leaves the population; it is type 0 after relocation.
        if self.observer is not None:
            self.observer.settle(0, self.counts[0], self.steps)
        self.counts[0] -= 1

    def collect(self, stop: Callable[[], bool] | None = None) -> tuple[int, int]:
        """GC until the free pool is back above the threshold.

        ``stop`` is polled after each erase that retires a block; a true
        result ends the batch early. Returns (GC operations, relocated pages).
        """
        ops = relocated = 0
        budget = self.N + 16
        while len(self.free) < self.gc_high:
            if ops >= budget:
                raise GcDeadlock("garbage collection is not reclaiming space")
            retired = self.retired_count
            relocated += self.collect_one()
            ops += 1
            if stop is not None and self.retired_count != retired and stop():
                break
        return ops, relocated

    # ------------------------------------------------------------ checks

    def check_invariants(self) -> None:
        k = self.k
        valid_total = 0
        for b in range(self.N):
            seg = self.pages[b * k:(b + 1) * k]
            nv = seg.count(VALID)
            if nv != self.valid[b]:
                raise AssertionError(f"block {b}: valid count {self.valid[b]} != {nv}")
            if seg[self.wp[b]:].count(CLEAN) != k - self.wp[b]:
                raise AssertionError(f"block {b}: programmed page beyond write pointer")
            valid_total += nv
        mapped = 0
        for lpn, ppn in enumerate(self.l2p):
            if ppn >= 0:
                mapped += 1
                if self.pages[ppn] != VALID or self.p2l[ppn] != lpn:
                    raise AssertionError(f"lpn {lpn} maps to a non-valid page {ppn}")
        if mapped != valid_total:
            raise AssertionError("valid pages and mapped logical pages disagree")
        hist = [0] * (k + 1)
        for b in range(self.N):
            if not self.retired[b]:
                hist[self.valid[b]] += 1
        if hist != self.counts:
            raise AssertionError("type histogram out of sync")
