"""Cleaning-cost and wear-leveling metrics, the optimal tradeoff, and RGA operating points."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NoTypeZeroBlocks, ZeroProbabilityType
from .model import TradeoffPoint, check_occupancy, check_weights

CLIP_TOL = 1e-12
MEAN_TOL = 1e-12


def _positive_occupancy(pi) -> np.ndarray:
    pi = check_occupancy(pi)
    zero = np.flatnonzero(pi <= 0.0)
    if zero.size:
        i = int(zero[0])
        raise ZeroProbabilityType(f"occupancy of type {i} is zero; every type needs positive mass", state=i)
    return pi


def mean_type(pi) -> float:
    pi = np.asarray(pi, dtype=float)
    return math.fsum(np.arange(pi.size) * pi)


def cleaning_cost(w, pi) -> float:
    """Average number of valid pages moved per GC: ``sum(i * w_i * pi_i)``."""
    pi = check_occupancy(pi)
    w = check_weights(w, pi)
    return math.fsum(np.arange(pi.size) * w * pi)


def wear_leveling(w, pi) -> float:
    """Fairness index of block selection: ``1 / sum(w_i**2 * pi_i)``."""
    pi = check_occupancy(pi)
    if not np.any(np.asarray(w, dtype=float)):
        raise InvalidArgument("all-zero weights have no wear-leveling value")
    w = check_weights(w, pi)
    return 1.0 / math.fsum(w * w * pi)


def random_policy(pi) -> np.ndarray:
    pi = check_occupancy(pi)
    w = np.ones_like(pi)
    w.setflags(write=False)
    return w


def greedy_policy(pi) -> np.ndarray:
    pi = check_occupancy(pi)
    if pi[0] <= 0.0:
        raise NoTypeZeroBlocks("greedy selection needs type-0 blocks but pi_0 = 0", state=0)
    w = np.zeros_like(pi)
    w[0] = 1.0 / pi[0]
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------- RGA


def _log_tails(pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tail sums ``T_i = sum_{j>=i} pi_j`` and accurate ``log T_i`` for i = 0..k."""
    tail = np.cumsum(pi[::-1])[::-1].copy()
    head = np.concatenate([[0.0], np.cumsum(pi)[:-1]])
    tail[0] = 1.0
    with np.errstate(divide="ignore"):
        log_tail = np.where(head < 0.5, np.log1p(-np.minimum(head, 0.5)), np.log(tail))
    log_tail[0] = 0.0
    return tail, log_tail


def rga_selection_mass(pi, d: int) -> np.ndarray:
    """Probability that a window of ``d`` uniform draws has minimum type ``i``.

    Equals ``T_i**d - T_{i+1}**d``, evaluated as
    ``T_i**d * -expm1(-d * log1p(pi_i / T_{i+1}))`` so that types with tiny
    occupancy keep full relative precision and large ``d`` cannot overflow.
    """
    pi = _positive_occupancy(pi)
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise InvalidArgument(f"window size must be an integer >= 1, got {d!r}")
    d = int(d)
    tail, log_tail = _log_tails(pi)
    k = pi.size - 1
    mass = np.empty_like(pi)
    for i in range(k):
        step = math.log1p(pi[i] / tail[i + 1])
        mass[i] = math.exp(d * log_tail[i]) * -math.expm1(-d * step)
    mass[k] = math.exp(d * log_tail[k])
    return mass


def rga_weights(pi, d: int) -> np.ndarray:
    """Per-type selection weights of RGA with an integer window ``d``."""
    pi = _positive_occupancy(pi)
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise InvalidArgument(f"window size must be an integer >= 1, got {d!r}")
    if int(d) == 1:
        w = np.ones_like(pi)
    else:
        w = rga_selection_mass(pi, int(d)) / pi
    w.setflags(write=False)
    return w


def window_distribution(d: float) -> dict[int, float]:
    """Two-point window law with mean ``d``: ``floor(d)`` w.p. ``p``, else ``floor(d) + 1``."""
    if not d >= 1 or not math.isfinite(d):
        raise InvalidArgument(f"window size must be a finite real >= 1, got {d!r}")
    lo = math.floor(d)
    p = lo + 1 - d
    return {lo: p, lo + 1: 1.0 - p}


def rga_mixture_weights(pi, d: float | None = None, windows: Mapping[int, float] | None = None) -> np.ndarray:
    """Weights for a random window size, as a convex mixture of integer-window weights.

    ``windows`` maps window size to probability; it defaults to
    :func:`window_distribution` of ``d``.
    """
    if windows is None:
        if d is None:
            raise InvalidArgument("give either d or windows")
        windows = window_distribution(d)
    pi = _positive_occupancy(pi)
    total = math.fsum(windows.values())
    if any(p < 0 for p in windows.values()) or abs(total - 1.0) > 1e-12:
        raise InvalidArgument("window probabilities must be non-negative and sum to 1")
    w = np.zeros_like(pi)
    for size, prob in sorted(windows.items()):
        w = w + prob * rga_weights(pi, size)
    w.setflags(write=False)
    return w


def rga_point(pi, d: float) -> TradeoffPoint:
    pi = _positive_occupancy(pi)
    if not d >= 1 or not math.isfinite(d):
        raise InvalidArgument(f"window size must be a finite real >= 1, got {d!r}")
    w = rga_weights(pi, int(d)) if d == int(d) else rga_mixture_weights(pi, d)
    return TradeoffPoint(cost=cleaning_cost(w, pi), wear=wear_leveling(w, pi), weights=w)


# ---------------------------------------------------------------- optimal tradeoff


@dataclass(frozen=True)
class KktSolution:
    """Optimal weights for a target cleaning cost, with their KKT multipliers.

    ``regime`` is one of ``greedy``, ``lower``, ``random``, ``upper``, ``max-cost``.
    ``breakpoint`` is the last supported type on the lower branch and the
    first supported type on the upper branch.
    """

    c_star: float
    regime: str
    breakpoint: int
    v1: float
    v2: float
    u: np.ndarray
    weights: np.ndarray
    wear: float

    @property
    def point(self) -> TradeoffPoint:
        return TradeoffPoint(cost=self.c_star, wear=self.wear, weights=self.weights)


def _support_stats(i: np.ndarray, p: np.ndarray, c: float) -> tuple[float, float, float, float]:
    """Return (X, Y, Z, S0) for the support ``i`` with masses ``p`` and target ``c``.

    ``Z`` is computed as ``S0 * sum(p * (i - mu)**2)`` which avoids the
    cancellation in ``S0 * S2 - S1**2``.
    """
    s0 = math.fsum(p)
    s1 = math.fsum(i * p)
    mu = s1 / s0
    spread = math.fsum(p * (i - mu) ** 2)
    x = math.fsum(i * i * p) - c * s1
    y = s1 - c * s0
    return x, y, s0 * spread, s0


def _lower_branch(pi: np.ndarray, c: float) -> tuple[int, float, float, float]:
    """Support bound ``I`` and (X, Y, Z) for a target below the mean type."""
    k = pi.size - 1
    idx = np.arange(k + 1, dtype=float)
    excess = np.cumsum((idx - c) * pi)
    positive = np.flatnonzero(excess > 0.0)
    if positive.size == 0:
        raise InvalidArgument(f"target cost {c} is not below the mean type")
    j = int(positive[0])
    while True:
        x, y, z, _ = _support_stats(idx[: j + 1], pi[: j + 1], c)
        ratio = x / y
        if j == k or ratio <= j + 1:
            return j, x, y, z
        j += 1


def _solve_lower(pi: np.ndarray, c: float):
    k = pi.size - 1
    idx = np.arange(k + 1, dtype=float)
    bound, x, y, z = _lower_branch(pi, c)
    gamma = x / z - idx * y / z
    w = np.where(idx <= bound, gamma, 0.0)
    u = np.where(idx <= bound, 0.0, -2.0 * gamma * pi)
    return bound, w, u, -2.0 * x / z, 2.0 * y / z


def _clip(w: np.ndarray) -> np.ndarray:
    bad = w < -CLIP_TOL
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ArithmeticError(f"optimal weight for type {i} is {w[i]!r}; branch selection failed")
    return np.where(w < 0.0, 0.0, w)


def optimal_wear_leveling(pi, c_star: float) -> KktSolution:
    """Maximum wear-leveling subject to a cleaning cost of exactly ``c_star``."""
    pi = _positive_occupancy(pi)
    k = pi.size - 1
    c = float(c_star)
    if not 0.0 <= c <= k:
        raise InvalidArgument(f"target cost {c_star!r} outside [0, {k}]")
    mean = mean_type(pi)
    idx = np.arange(k + 1, dtype=float)

    if c == 0.0:
        w = np.zeros(k + 1)
        w[0] = 1.0 / pi[0]
        v1, v2 = -2.0 / pi[0], 2.0 / pi[0]
        u = np.where(idx == 0, 0.0, pi * (v1 + v2 * idx))
        return _solution(c, "greedy", 0, v1, v2, u, w, float(pi[0]))
    if c == float(k):
        w = np.zeros(k + 1)
        w[k] = 1.0 / pi[k]
        v1, v2 = (2.0 * k - 2.0) / pi[k], -2.0 / pi[k]
        u = np.where(idx == k, 0.0, pi * (v1 + v2 * idx))
        return _solution(c, "max-cost", k, v1, v2, u, w, float(pi[k]))
    if abs(c - mean) <= MEAN_TOL * max(1.0, k):
        return _solution(c, "random", k, -2.0, 0.0, np.zeros(k + 1), np.ones(k + 1), 1.0)

    if c < mean:
        bound, w, u, v1, v2 = _solve_lower(pi, c)
        regime = "lower"
    else:
        # Reflect types i -> k - i; the upper branch becomes a lower one.
        bound_r, w_r, u_r, v1_r, v2_r = _solve_lower(pi[::-1].copy(), k - c)
        bound, w, u = k - bound_r, w_r[::-1], u_r[::-1]
        v1, v2 = v1_r + k * v2_r, -v2_r
        regime = "upper"
    w = _clip(w)
    wear = 1.0 / math.fsum(w * w * pi)
    return _solution(c, regime, bound, v1, v2, u, w, wear)


def _solution(c, regime, bound, v1, v2, u, w, wear) -> KktSolution:
    w = np.array(w, dtype=float)
    u = np.array(u, dtype=float)
    w.setflags(write=False)
    u.setflags(write=False)
    return KktSolution(c, regime, int(bound), float(v1), float(v2), u, w, float(wear))


def kkt_residuals(sol: KktSolution, pi) -> dict[str, float]:
    """Residuals of every KKT condition, for certificates and tests."""
    pi = np.asarray(pi, dtype=float)
    idx = np.arange(pi.size)
    w, u = sol.weights, sol.u
    return {
        "stationarity": float(np.max(np.abs(2 * w * pi - u + sol.v1 * pi + sol.v2 * idx * pi))),
        "slackness": float(np.max(np.abs(u * w))),
        "dual_feasibility": float(max(0.0, -u.min())),
        "primal_feasibility": float(max(0.0, -w.min())),
        "normalization": abs(math.fsum(w * pi) - 1.0),
        "cost": abs(math.fsum(idx * w * pi) - sol.c_star),
    }


def tradeoff_curve(pi, grid: Iterable[float]) -> list[TradeoffPoint]:
    return [optimal_wear_leveling(pi, c).point for c in grid]


def default_grid(pi, points: int = 101) -> list[float]:
    """Evenly spaced targets over [0, k] with the mean type inserted."""
    pi = check_occupancy(pi)
    k = pi.size - 1
    grid = {float(x) for x in np.linspace(0.0, k, points)}
    grid.add(mean_type(pi))
    return sorted(grid)


@dataclass(frozen=True)
class RgaSweepRow:
    d: float
    cost: float
    wear: float
    optimal_wear: float

    @property
    def gap(self) -> float:
        return self.optimal_wear - self.wear

    @property
    def violates(self) -> bool:
        return self.wear > self.optimal_wear + 1e-9


def rga_sweep(pi, ds: Sequence[float]) -> list[RgaSweepRow]:
    """RGA operating points for each window size, with the optimal wear at the same cost."""
    pi = _positive_occupancy(pi)
    k = pi.size - 1
    rows = []
    for d in ds:
        pt = rga_point(pi, d)
        c = min(max(pt.cost, 0.0), float(k))
        rows.append(RgaSweepRow(float(d), pt.cost, pt.wear, optimal_wear_leveling(pi, c).wear))
    return rows


def truncated_normal_occupancy(k: int, mu: float, sigma: float) -> np.ndarray:
    """Occupancy proportional to a normal density restricted to types 0..k."""
    if int(k) != k or k < 1 or not sigma > 0:
        raise InvalidArgument("need integer k >= 1 and sigma > 0")
    i = np.arange(k + 1, dtype=float)
    log_p = -((i - mu) ** 2) / (2.0 * sigma * sigma)
    p = np.exp(log_p - log_p.max())
    out = p / math.fsum(p)
    out.setflags(write=False)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(path, solutions: Iterable[KktSolution]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c_star", "w_star", "regime", "breakpoint"])
        for s in solutions:
            w.writerow([_fmt(s.c_star), _fmt(s.wear), s.regime, s.breakpoint])


def write_sweep_csv(path, rows: Iterable[RgaSweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "C", "W", "w_star_at_C", "gap", "violation"])
        for r in rows:
            w.writerow([_fmt(r.d), _fmt(r.cost), _fmt(r.wear), _fmt(r.optimal_wear), _fmt(r.gap), int(r.violates)])
