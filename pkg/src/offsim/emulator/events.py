"""Deterministic discrete-event replay of one offloading round."""

from __future__ import annotations

import heapq
import itertools
from typing import Callable, List, Optional

import numpy as np

from ..profiles import ExecutionPlan, SystemProfile
from .config import EmulationConfig, EmulationTrace, TraceEvent

# virtual time unit: integer picoseconds
TICKS_PER_SECOND = 10 ** 12


def to_ticks(seconds: float) -> int:
    return round(seconds * TICKS_PER_SECOND)


class Scheduler:
    """Minimal event queue over an integer virtual clock.

    Events at equal times fire in insertion order.
    """

    def __init__(self):
        self.now = 0
        self._queue: list = []
        self._seq = itertools.count()

    def schedule(self, delay: int, action: Callable[[], None]) -> None:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._queue, (self.now + delay, next(self._seq), action))

    def run(self) -> int:
        while self._queue:
            self.now, _, action = heapq.heappop(self._queue)
            action()
        return self.now


def stage_plan(plan: ExecutionPlan, profile: SystemProfile, refined: bool = True):
    """Ordered ``(name, segment, base_constant_s, variable_s, jitter_target)`` stages.

    Durations are rebuilt from the raw profile parameters so the emulator
    stays an independent check of the analytical model.
    """
    c, net = profile.compute, profile.network
    stages = []
    dev_const = c.d_dev_const * 1e-3 if refined else 0.0
    mec_const = c.d_mec_const * 1e-3 if refined else 0.0
    for i in range(1, min(plan.split, plan.exit) + 1):
        work = profile.splits[i - 1].segment_demand / c.c_dev
        stages.append(("seg", i, dev_const, work, "dev"))
    if not plan.offload_active:
        return stages
    entry = profile.splits[plan.split]
    if refined:
        volume = entry.d_comp if c.prep_volume == "comp" else entry.d_ul
        if c.prep_model == "divide":
            prep = volume / c.k_prep * 1e-3
        else:
            prep = c.k_prep * volume * 1e-3
        stages.append(("prep", None, c.d_prep_const * 1e-3, prep, None))
    stages.append(("ul", None, net.d_ul_const * 1e-3, entry.d_ul / net.b_ul * 1e-3, "ul"))
    for i in range(plan.split + 1, plan.exit + 1):
        work = profile.splits[i - 1].segment_demand / c.c_mec
        stages.append(("mec", i, mec_const, work, "mec"))
    stages.append(("dl", None, net.d_dl_const * 1e-3, entry.d_dl / net.b_dl * 1e-3, "dl"))
    return stages


def emulate_event(plan: ExecutionPlan, profile: SystemProfile,
                  cfg: Optional[EmulationConfig] = None) -> EmulationTrace:
    cfg = cfg or EmulationConfig()
    if cfg.mode != "event":
        raise ValueError("emulate_event requires mode 'event'")
    profile.check_plan(plan)
    rng = np.random.default_rng(cfg.seed) if cfg.jitter.active else None

    sched = Scheduler()
    events: List[TraceEvent] = []
    stages = iter(stage_plan(plan, profile, cfg.refined))

    def record(stage, segment=None):
        events.append(TraceEvent(sched.now / TICKS_PER_SECOND, stage, segment))

    def start_next():
        step = next(stages, None)
        if step is None:
            record("done")
            return
        name, segment, const, variable, target = step
        const = max(0.0, const + cfg.jitter.sample(rng, target)) if target else const
        record(f"{name}_start", segment)

        def finish():
            record(f"{name}_end", segment)
            start_next()

        sched.schedule(to_ticks(const + variable), finish)

    sched.schedule(0, start_next)
    sched.run()
    return EmulationTrace(plan, tuple(events))
