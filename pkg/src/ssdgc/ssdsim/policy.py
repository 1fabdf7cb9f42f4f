"""GC victim-selection policies."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..errors import InvalidArgument


class PolicyKind(str, enum.Enum):
    GREEDY = "greedy"
    RANDOM = "random"
    RGA = "rga"


TIE_BREAKS = ("first-drawn", "lowest-id")


@dataclass(frozen=True)
class GcPolicy:
    """Victim selection rule.

    For ``rga`` the window is ``floor(d)`` with probability
    ``floor(d) + 1 - d`` and ``floor(d) + 1`` otherwise. ``tie_break`` decides
    between equally valid blocks inside an RGA window.
    """

    kind: PolicyKind = PolicyKind.GREEDY
    d: float = 1.0
    tie_break: str = "lowest-id"

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if not self.d >= 1 or not math.isfinite(self.d):
            raise InvalidArgument(f"window size must be a finite real >= 1, got {self.d!r}")
        if self.tie_break not in TIE_BREAKS:
            raise InvalidArgument(f"tie_break must be one of {TIE_BREAKS}")

    @classmethod
    def greedy(cls) -> GcPolicy:
        return cls(PolicyKind.GREEDY)

    @classmethod
    def random(cls) -> GcPolicy:
        return cls(PolicyKind.RANDOM)

    @classmethod
    def rga(cls, d: float, tie_break: str = "lowest-id") -> GcPolicy:
        return cls(PolicyKind.RGA, float(d), tie_break)

    @classmethod
    def parse(cls, text: str) -> GcPolicy:
        """Parse ``greedy``, ``random``, ``rga:2.5`` or ``rga2``."""
        t = text.strip().lower()
        if t in ("greedy", "random"):
            return cls(PolicyKind(t))
        if t.startswith("rga"):
            arg = t[3:].lstrip(":=( ").rstrip(")")
            try:
                return cls.rga(float(arg))
            except ValueError:
                pass
        raise InvalidArgument(f"unknown GC policy {text!r}")

    @property
    def window_low(self) -> int:
        return math.floor(self.d)

    @property
    def window_p(self) -> float:
        return self.window_low + 1 - self.d

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.RGA:
            return f"rga{self.d:g}"
        return self.kind.value
