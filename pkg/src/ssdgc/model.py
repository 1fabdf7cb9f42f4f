"""Core domain types and closed-form fixed points of the block-occupancy chain.

Occupancy and weight vectors are plain read-only ``numpy`` arrays indexed by
block type ``i`` (the number of valid pages in a block, ``0..k``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ModelDegenerate

SUM_TOL = 1e-9
MAX_BINOMIAL_K = 1029


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SsdGeometry:
    blocks_per_package: int = 16384
    pages_per_block: int = 64
    page_size: int = 4096
    packages: int = 1
    over_provisioning: float = 0.15
    gc_threshold: float = 0.05

    def __post_init__(self):
        if self.blocks_per_package < 1:
            raise InvalidArgument("blocks_per_package must be >= 1")
        if self.pages_per_block < 1:
            raise InvalidArgument("pages_per_block must be >= 1")
        if self.packages < 1:
            raise InvalidArgument("packages must be >= 1")
        if self.page_size < 512 or self.page_size % 512:
            raise InvalidArgument("page_size must be a positive multiple of 512 bytes")
        if not 0.0 <= self.over_provisioning < 1.0:
            raise InvalidArgument("over_provisioning must lie in [0, 1)")
        if not 0.0 < self.gc_threshold < 1.0:
            raise InvalidArgument("gc_threshold must lie in (0, 1)")

    @property
    def k(self) -> int:
        return self.pages_per_block

    @property
    def logical_pages_per_package(self) -> int:
        return math.floor((1.0 - self.over_provisioning) * self.blocks_per_package * self.pages_per_block)

    @property
    def logical_pages(self) -> int:
        return self.logical_pages_per_package * self.packages

    @property
    def sectors_per_page(self) -> int:
        return self.page_size // 512

    @property
    def logical_sectors(self) -> int:
        return self.logical_pages * self.sectors_per_page


@dataclass(frozen=True)
class TransitionModel:
    """Per-request birth/death probabilities of a single accessed block.

    ``up[i]`` is the probability that an access moves a type-``i`` block to
    ``i + 1`` and ``down[i]`` the probability it moves to ``i - 1``.
    ``unobserved`` lists states for which an estimator saw no data.
    """

    lam: float
    up: np.ndarray
    down: np.ndarray
    unobserved: tuple[int, ...] = field(default=())

    def __post_init__(self):
        up = _frozen(self.up)
        down = _frozen(self.down)
        if up.ndim != 1 or up.shape != down.shape or up.size < 2:
            raise InvalidArgument("up and down must be 1-d arrays of equal length k+1 >= 2")
        if not self.lam > 0:
            raise InvalidArgument("lambda must be positive")
        if np.any(up < 0) or np.any(down < 0) or not np.all(np.isfinite(up)) or not np.all(np.isfinite(down)):
            raise InvalidArgument("transition probabilities must be finite and non-negative")
        if down[0] != 0.0:
            raise InvalidArgument("down[0] must be 0")
        if up[-1] != 0.0:
            raise InvalidArgument("up[k] must be 0")
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "unobserved", tuple(int(i) for i in self.unobserved))

    @property
    def k(self) -> int:
        return self.up.size - 1


@dataclass(frozen=True)
class TradeoffPoint:
    cost: float
    wear: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.weights is not None:
            object.__setattr__(self, "weights", _frozen(self.weights))


def check_occupancy(pi, k: int | None = None) -> np.ndarray:
    """Validate ``pi`` as an occupancy vector and return a read-only float copy."""
    arr = np.array(pi, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidArgument("occupancy vector must be 1-d with length k+1 >= 2")
    if k is not None and arr.size != k + 1:
        raise InvalidArgument(f"occupancy vector has length {arr.size}, expected {k + 1}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgument("occupancy entries must be finite and non-negative")
    total = math.fsum(arr)
    if abs(total - 1.0) > SUM_TOL:
        raise InvalidArgument(f"occupancy entries sum to {total!r}, not 1")
    arr.setflags(write=False)
    return arr


def check_weights(w, pi) -> np.ndarray:
    """Validate ``w`` as a selection-weight vector normalized against ``pi``."""
    pi = np.asarray(pi, dtype=float)
    arr = np.array(w, dtype=float)
    if arr.shape != pi.shape:
        raise InvalidArgument(f"weight vector shape {arr.shape} does not match occupancy {pi.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgument("weights must be finite and non-negative")
    total = math.fsum(arr * pi)
    if abs(total - 1.0) > SUM_TOL:
        raise InvalidArgument(f"sum(w * pi) = {total!r} violates the normalization constraint")
    arr.setflags(write=False)
    return arr


def binomial_fixed_point(k: int) -> np.ndarray:
    """Steady-state occupancy under the uniform workload: ``C(k, i) / 2**k``.

    Entries are computed from exact integers, so each one is the correctly
    rounded double of the true value.
    """
    if isinstance(k, bool) or int(k) != k:
        raise InvalidArgument("k must be an integer")
    k = int(k)
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    if k > MAX_BINOMIAL_K:
        raise InvalidArgument(f"k={k} exceeds the supported maximum {MAX_BINOMIAL_K}")
    denom = 1 << k
    return _frozen([math.comb(k, i) / denom for i in range(k + 1)])


def uniform_transition_model(k: int, lam: float = 1.0) -> TransitionModel:
    if int(k) != k or k < 1:
        raise InvalidArgument("k must be an integer >= 1")
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    i = np.arange(k + 1, dtype=float)
    return TransitionModel(lam=lam, up=(k - i) / k, down=i / k)


def general_fixed_point(model: TransitionModel) -> np.ndarray:
    """Stationary vector of an irreducible birth-death chain.

    Uses the product form ``pi_i / pi_k = prod(down[i+1..k]) / prod(up[i..k-1])``
    accumulated in log space, then normalizes.
    """
    up, down = model.up, model.down
    k = model.k
    for i in range(k):
        if up[i] <= 0:
            raise ModelDegenerate(f"chain is reducible: up[{i}] = 0", state=i, direction="up")
        if down[i + 1] <= 0:
            raise ModelDegenerate(f"chain is reducible: down[{i + 1}] = 0", state=i + 1, direction="down")
    # log_ratio[i] = sum_{j>i} log down[j] - sum_{j>=i, j<k} log up[j]
    log_down_tail = np.concatenate([np.cumsum(np.log(down[1:])[::-1])[::-1], [0.0]])
    log_up_tail = np.concatenate([np.cumsum(np.log(up[:-1])[::-1])[::-1], [0.0]])
    log_ratio = log_down_tail - log_up_tail
    shifted = np.exp(log_ratio - log_ratio.max())
    return _frozen(shifted / math.fsum(shifted))


def detailed_balance_residual(pi, model: TransitionModel) -> float:
    """Max over i of |pi_i * up_i - pi_{i+1} * down_{i+1}|."""
    pi = np.asarray(pi, dtype=float)
    return float(np.max(np.abs(pi[:-1] * model.up[:-1] - pi[1:] * model.down[1:])))
