"""Delay, energy and accuracy of one execution plan.

Every function here is pure. Times are seconds, energies joules.
``refined=True`` (the default) adds the fitted per-segment and
preprocessing overheads; ``refined=False`` is the idealized form with
compute time equal to demand over rate and no preprocessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .profiles import KB, KB_PER_MS, MS, ExecutionPlan, SystemProfile


@dataclass(frozen=True)
class DelayBreakdown:
    t_prep: float
    t_local: float
    t_mec: float
    t_ul: float
    t_dl: float

    @property
    def t_comm(self) -> float:
        return self.t_ul + self.t_dl

    @property
    def t_comp(self) -> float:
        return self.t_prep + self.t_local + self.t_mec

    @property
    def t_total(self) -> float:
        return self.t_comp + self.t_comm


@dataclass(frozen=True)
class EnergyBreakdown:
    e_idle: float
    e_prep: float
    e_comp: float
    e_comm: float

    @property
    def e_total(self) -> float:
        return self.e_idle + self.e_prep + self.e_comp + self.e_comm


@dataclass(frozen=True)
class CostReport:
    plan: ExecutionPlan
    delay: DelayBreakdown
    energy: EnergyBreakdown
    accuracy: float

    @property
    def offload_active(self) -> bool:
        return self.plan.offload_active


def classification_accuracy(n_true: int, n_total: int) -> float:
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    if not 0 <= n_true <= n_total:
        raise ValueError(f"n_true must lie in 0..{n_total}, got {n_true}")
    return n_true / n_total


def preprocessing_delay(plan: ExecutionPlan, profile: SystemProfile) -> float:
    """Time to prepare features for the uplink; zero when nothing is sent."""
    if not plan.offload_active:
        return 0.0
    compute = profile.compute
    entry = profile.splits[plan.split]
    volume = entry.d_comp if compute.prep_volume == "comp" else entry.d_ul  # kb
    if compute.prep_model == "divide":
        return compute.d_prep_si + volume * KB / (compute.k_prep * KB_PER_MS)
    # k_prep read as ms per kb
    return compute.d_prep_si + compute.k_prep * volume * MS


def communication_delay(plan: ExecutionPlan, profile: SystemProfile) -> Tuple[float, float]:
    if not plan.offload_active:
        return 0.0, 0.0
    net = profile.network
    entry = profile.splits[plan.split]
    t_ul = net.d_ul_si + entry.d_ul_bits / net.b_ul_si
    t_dl = net.d_dl_si + entry.d_dl_bits / net.b_dl_si
    return t_ul, t_dl


def local_segment_times(plan: ExecutionPlan, profile: SystemProfile, refined: bool = True):
    """Duration of each device-side segment 1..min(S, E)."""
    c = profile.compute
    overhead = c.d_dev_si if refined else 0.0
    return [overhead + profile.segment_flop(i) / c.c_dev_si
            for i in range(1, min(plan.split, plan.exit) + 1)]


def mec_segment_times(plan: ExecutionPlan, profile: SystemProfile, refined: bool = True):
    """Duration of each server-side segment S+1..E (empty when S >= E)."""
    c = profile.compute
    overhead = c.d_mec_si if refined else 0.0
    return [overhead + profile.segment_flop(i) / c.c_mec_si
            for i in range(plan.split + 1, plan.exit + 1)]


def computing_delay(plan: ExecutionPlan, profile: SystemProfile,
                    refined: bool = True) -> Tuple[float, float, float]:
    """Return ``(t_prep, t_local, t_mec)``."""
    t_local = sum(local_segment_times(plan, profile, refined))
    t_mec = sum(mec_segment_times(plan, profile, refined))
    t_prep = preprocessing_delay(plan, profile) if refined else 0.0
    return t_prep, t_local, t_mec


def total_delay(plan: ExecutionPlan, profile: SystemProfile, refined: bool = True) -> DelayBreakdown:
    t_prep, t_local, t_mec = computing_delay(plan, profile, refined)
    t_ul, t_dl = communication_delay(plan, profile)
    return DelayBreakdown(t_prep=t_prep, t_local=t_local, t_mec=t_mec, t_ul=t_ul, t_dl=t_dl)


def total_energy(plan: ExecutionPlan, profile: SystemProfile, delay: DelayBreakdown) -> EnergyBreakdown:
    p = profile.power
    # the modem term only applies when something is transmitted
    e_comm = delay.t_total * p.p_comm if plan.offload_active else 0.0
    return EnergyBreakdown(
        e_idle=(delay.t_comm + delay.t_mec) * p.p_idle,
        e_prep=delay.t_prep * p.p_prep,
        e_comp=delay.t_local * p.p_proc,
        e_comm=e_comm,
    )


def evaluate_plan(plan: ExecutionPlan, profile: SystemProfile, refined: bool = True) -> CostReport:
    profile.check_plan(plan)
    delay = total_delay(plan, profile, refined)
    return CostReport(
        plan=plan,
        delay=delay,
        energy=total_energy(plan, profile, delay),
        accuracy=profile.accuracy(plan.exit, plan.split),
    )
