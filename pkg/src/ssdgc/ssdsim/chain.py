"""Block-level Monte Carlo of the occupancy chain under a physical workload.

Each request picks one block uniformly at random. A type-``i`` block then
loses a valid page with probability ``down[i]`` and gains one with
probability ``up[i]``. With the uniform model this is the "uniform physical
workload": every physical page is equally likely to be the target.
"""

from __future__ import annotations

import random
from collections.abc import Iterator

import numpy as np

from ..errors import InvalidArgument
from ..meanfield import TransitionObservation
from ..model import TransitionModel


class BlockChain:
    def __init__(self, model: TransitionModel, blocks: int, seed: int = 0, initial: list[int] | None = None):
        if blocks < 1:
            raise InvalidArgument("need at least one block")
        if np.any(model.up + model.down > 1.0 + 1e-12):
            raise InvalidArgument("up[i] + down[i] must not exceed 1 for a per-request chain")
        self.model = model
        self.k = model.k
        self.rng = random.Random(seed)
        self.types = list(initial) if initial is not None else [0] * blocks
        if len(self.types) != blocks or any(not 0 <= t <= self.k for t in self.types):
            raise InvalidArgument("initial block types must be one per block within 0..k")
        self.counts = [0] * (self.k + 1)
        for t in self.types:
            self.counts[t] += 1
        self._up = [float(x) for x in model.up]
        self._down = [float(x) for x in model.down]

    def step(self) -> tuple[int, int] | None:
        """Advance one request; returns the (from, to) move or None."""
        b = self.rng.randrange(len(self.types))
        i = self.types[b]
        u = self.rng.random()
        if u < self._down[i]:
            j = i - 1
        elif u < self._down[i] + self._up[i]:
            j = i + 1
        else:
            return None
        self.types[b] = j
        self.counts[i] -= 1
        self.counts[j] += 1
        return i, j

    def observations(self, requests: int) -> Iterator[TransitionObservation]:
        for _ in range(requests):
            before = tuple(self.counts)
            move = self.step()
            yield TransitionObservation(before, {move: 1} if move else {})

    def run(self, requests: int, warmup: int = 0) -> np.ndarray:
        """Time-averaged occupancy over ``requests`` steps after ``warmup`` steps."""
        for _ in range(warmup):
            self.step()
        acc = np.zeros(self.k + 1)
        counts = self.counts
        every = max(1, len(self.types) // 4)
        samples = 0
        for t in range(requests):
            self.step()
            if t % every == 0:
                acc += counts
                samples += 1
        return acc / (samples * len(self.types))

    def occupancy(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / len(self.types)
