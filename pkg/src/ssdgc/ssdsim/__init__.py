"""Discrete-event SSD simulator."""

from .chain import BlockChain
from .package import CLEAN, INVALID, VALID, FlashPackage
from .policy import GcPolicy, PolicyKind
from .simulator import (
    DUMP_HEADER,
    DurabilityResult,
    SimConfig,
    SimReport,
    Ssd,
    TimingModel,
    compare_durability,
    empirical_wear_leveling,
    run_durability,
    simulate,
    write_reports_csv,
    write_snapshots_csv,
)

__all__ = [
    "BlockChain", "CLEAN", "DUMP_HEADER", "DurabilityResult", "FlashPackage", "GcPolicy", "INVALID",
    "PolicyKind", "SimConfig", "SimReport", "Ssd", "TimingModel", "VALID", "compare_durability",
    "empirical_wear_leveling", "run_durability", "simulate", "write_reports_csv", "write_snapshots_csv",
]
