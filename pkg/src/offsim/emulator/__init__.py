"""Replay offloading rounds on a virtual clock or over a loopback socket."""

from __future__ import annotations

import dataclasses
import statistics
from dataclasses import dataclass
from typing import Tuple

from ..profiles import ExecutionPlan, SystemProfile
from .config import EmulationConfig, EmulationTrace, JitterSpec, TraceEvent, parse_endpoint
from .events import TICKS_PER_SECOND, Scheduler, emulate_event, stage_plan
from .sockets import OffloadServer, RoundLog, emulate_socket
from .wire import EmulationError, ProtocolError, TransportError


@dataclass(frozen=True)
class TrialSummary:
    totals: Tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.totals)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.totals)

    @property
    def std(self) -> float:
        """Sample standard deviation; 0 for a single trial."""
        return statistics.stdev(self.totals) if self.n > 1 else 0.0

    @property
    def min(self) -> float:
        return min(self.totals)

    @property
    def max(self) -> float:
        return max(self.totals)


def emulate(plan: ExecutionPlan, profile: SystemProfile, cfg: EmulationConfig) -> EmulationTrace:
    if cfg.mode == "event":
        return emulate_event(plan, profile, cfg)
    return emulate_socket(plan, profile, cfg)


def run_trials(plan: ExecutionPlan, profile: SystemProfile, cfg: EmulationConfig,
               n: int) -> TrialSummary:
    """Repeat the round ``n`` times; event-mode trial ``k`` uses seed ``seed + k``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    totals = []
    for k in range(n):
        trial_cfg = cfg
        if cfg.mode == "event":
            trial_cfg = dataclasses.replace(cfg, seed=(cfg.seed + k) % 2 ** 64)
        try:
            totals.append(emulate(plan, profile, trial_cfg).measured_total)
        except EmulationError as exc:
            raise type(exc)(f"trial {k}: {exc}") from exc
    return TrialSummary(tuple(totals))


__all__ = [
    "EmulationConfig", "EmulationError", "EmulationTrace", "JitterSpec", "OffloadServer",
    "ProtocolError", "RoundLog", "Scheduler", "TICKS_PER_SECOND", "TraceEvent",
    "TransportError", "TrialSummary", "emulate", "emulate_event", "emulate_socket",
    "parse_endpoint", "run_trials", "stage_plan",
]
