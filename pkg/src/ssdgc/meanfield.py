"""Mean-field ODE integration and transition-probability estimation."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceTimeout, InvalidArgument
from .model import TransitionModel, check_occupancy

log = logging.getLogger(__name__)

MAX_TRAJECTORY_SAMPLES = 1000


@dataclass(frozen=True)
class OdeConfig:
    """Integrator settings.

    ``step_size=None`` picks ``0.5 / (lam * r)`` where ``r`` is the largest
    total exit probability of any state. The generator's eigenvalues lie in
    ``[-2 lam r, 0]``, so every mode is damped without changing sign.
    """

    step_size: float | None = None
    max_time: float = 1e6
    convergence_eps: float = 1e-11

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidArgument("step_size must be positive")
        if not self.convergence_eps > 0:
            raise InvalidArgument("convergence_eps must be positive")
        if self.step_size is not None and not self.max_time > self.step_size:
            raise InvalidArgument("max_time must exceed step_size")
        if not self.max_time > 0:
            raise InvalidArgument("max_time must be positive")


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    time: float
    steps: int
    residual: float
    trajectory: list[tuple[float, np.ndarray]] = field(repr=False)
    clip_events: int = 0


def generator_matrix(model: TransitionModel) -> np.ndarray:
    """Matrix ``A`` with ``ds/dt = A @ s``."""
    up, down, lam = model.up, model.down, model.lam
    n = up.size
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = -lam * (up + down)
    a[idx[1:], idx[:-1]] = lam * up[:-1]
    a[idx[:-1], idx[1:]] = lam * down[1:]
    return a


def drift(s, model: TransitionModel) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != model.up.shape:
        raise InvalidArgument(f"state has length {s.size}, model expects {model.up.size}")
    up, down, lam = model.up, model.down, model.lam
    out = -lam * (up + down) * s
    out[1:] += lam * up[:-1] * s[:-1]
    out[:-1] += lam * down[1:] * s[1:]
    return out


def _rk4_propagator(a: np.ndarray, dt: float) -> np.ndarray:
    # One classical RK4 step on a linear system is s -> P @ s with P the
    # fourth-order Taylor polynomial of exp(dt * A).
    h = dt * a
    h2 = h @ h
    h3 = h2 @ h
    return np.eye(a.shape[0]) + h + h2 / 2.0 + h3 / 6.0 + (h3 @ h) / 24.0


def integrate_to_steady_state(s0, model: TransitionModel, cfg: OdeConfig | None = None) -> SteadyState:
    """Integrate the occupancy ODEs with fixed-step RK4 until the drift vanishes.

    Negative entries produced by a step are clipped to zero and the vector is
    renormalized; each clip is logged and counted.
    """
    cfg = cfg or OdeConfig()
    s = np.array(check_occupancy(s0, model.k), dtype=float)
    a = generator_matrix(model)
    rate = model.lam * float(np.max(model.up + model.down))
    if rate == 0.0:
        return SteadyState(s, 0.0, 0, 0.0, [(0.0, s.copy())])
    dt = cfg.step_size if cfg.step_size is not None else 0.5 / rate
    total_steps = max(1, math.ceil(cfg.max_time / dt))
    every = max(1, total_steps // MAX_TRAJECTORY_SAMPLES)
    prop = _rk4_propagator(a, dt)

    trajectory = [(0.0, s.copy())]
    clips = 0
    residual = float(np.max(np.abs(a @ s)))
    step = 0
    while residual >= cfg.convergence_eps:
        if step >= total_steps:
            raise ConvergenceTimeout(
                f"drift {residual:.3e} above {cfg.convergence_eps:.1e} at t={step * dt:g}",
                last_state=s.copy(),
                residual=residual,
                time=step * dt,
            )
        s = prop @ s
        step += 1
        if s.min() < 0.0:
            clips += 1
            log.debug("clipped negative occupancy %.3e at t=%g", s.min(), step * dt)
            np.clip(s, 0.0, None, out=s)
        s /= math.fsum(s)
        residual = float(np.max(np.abs(a @ s)))
        if step % every == 0:
            trajectory.append((step * dt, s.copy()))
    if trajectory[-1][0] != step * dt:
        trajectory.append((step * dt, s.copy()))
    s.setflags(write=False)
    return SteadyState(s, step * dt, step, residual, trajectory, clips)


def write_trajectory_csv(path, trajectory: Iterable[tuple[float, np.ndarray]]) -> None:
    rows = list(trajectory)
    k = rows[0][1].size - 1 if rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"s_{i}" for i in range(k + 1)])
        for t, s in rows:
            w.writerow([repr(float(t))] + [repr(float(x)) for x in s])


@dataclass(frozen=True)
class TransitionObservation:
    """Block-type counts before one request and the moves it caused.

    ``moves`` maps ``(i, j)`` to the number of blocks that went from type
    ``i`` to type ``j`` during the request.
    """

    counts: tuple[int, ...]
    moves: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        k = len(counts) - 1
        if k < 1 or any(c < 0 for c in counts):
            raise InvalidArgument("counts must be non-negative with length k+1 >= 2")
        for (i, j), n in self.moves.items():
            if not 0 <= i <= k or j not in (i - 1, i + 1) or not 0 <= j <= k:
                raise InvalidArgument(f"invalid transition {i}->{j}")
            if not 0 <= n <= counts[i]:
                raise InvalidArgument(f"{n} moves out of state {i} but only {counts[i]} blocks there")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return len(self.counts) - 1

    def ratio(self, i: int, j: int) -> float:
        """Per-request estimate ``n_ij / n_i``; undefined (NaN) when ``n_i = 0``."""
        if self.counts[i] == 0:
            return math.nan
        return self.moves.get((i, j), 0) / self.counts[i]


class TransitionEstimator:
    """Streaming accumulator for per-request transition ratios.

    With ``normalize=True`` each ratio is multiplied by the block population
    of that request, so the result is the probability that the accessed block
    moves, conditioned on its type. With ``normalize=False`` the raw
    population-share ratios are averaged.
    """

    def __init__(self, k: int, normalize: bool = True):
        if int(k) != k or k < 1:
            raise InvalidArgument("k must be an integer >= 1")
        self.k = int(k)
        self.normalize = normalize
        self.up_sum = [0.0] * (self.k + 1)
        self.down_sum = [0.0] * (self.k + 1)
        self.active = [0] * (self.k + 1)
        self.requests = 0

    def add(self, obs: TransitionObservation) -> None:
        if obs.k != self.k:
            raise InvalidArgument(f"observation has k={obs.k}, estimator expects {self.k}")
        scale = sum(obs.counts) if self.normalize else 1
        self.requests += 1
        for i, n in enumerate(obs.counts):
            if n:
                self.active[i] += 1
        for (i, j), n in obs.moves.items():
            if n:
                contrib = scale * n / obs.counts[i]
                if j > i:
                    self.up_sum[i] += contrib
                else:
                    self.down_sum[i] += contrib

    def add_totals(self, up_sum, down_sum, active, requests: int) -> None:
        """Merge pre-aggregated sums, as produced by the simulator recorder."""
        for i in range(self.k + 1):
            self.up_sum[i] += up_sum[i]
            self.down_sum[i] += down_sum[i]
            self.active[i] += active[i]
        self.requests += requests

    def model(self, lam: float = 1.0) -> TransitionModel:
        if self.requests == 0:
            raise InvalidArgument("no requests observed")
        up = np.zeros(self.k + 1)
        down = np.zeros(self.k + 1)
        unobserved = []
        for i in range(self.k + 1):
            if self.active[i] == 0:
                unobserved.append(i)
                continue
            up[i] = self.up_sum[i] / self.active[i]
            down[i] = self.down_sum[i] / self.active[i]
        if unobserved:
            log.warning("states never populated during estimation: %s", unobserved)
        return TransitionModel(lam=lam, up=up, down=down, unobserved=tuple(unobserved))


def estimate_transition_probabilities(
    stream: Iterable[TransitionObservation], k: int, lam: float = 1.0, normalize: bool = True
) -> TransitionModel:
    est = TransitionEstimator(k, normalize=normalize)
    for obs in stream:
        est.add(obs)
    if est.requests == 0:
        raise InvalidArgument("empty observation stream")
    return est.model(lam)
