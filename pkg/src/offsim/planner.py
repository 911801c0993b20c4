"""Plan enumeration, Pareto fronts and constrained plan selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from .cost_model import CostReport, evaluate_plan
from .profiles import SystemProfile

AXES = ("delay", "energy", "neg_accuracy")
OBJECTIVES = ("min_delay", "min_energy", "weighted")


class InfeasibleError(ValueError):
    """No plan satisfies the constraints. ``constraint`` names the tightest one."""

    def __init__(self, message: str, constraint: Optional[str] = None):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class SweepResult:
    rows: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def row(self, exit: int, split: int) -> CostReport:
        for r in self.rows:
            if r.plan.exit == exit and r.plan.split == split:
                return r
        raise KeyError((exit, split))


@dataclass(frozen=True)
class Objective:
    kind: str = "min_delay"
    weight_delay: float = 0.5
    weight_energy: float = 0.5

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.weight_delay < 0 or self.weight_energy < 0:
            raise ValueError("weights must be nonnegative")
        if self.kind == "weighted" and self.weight_delay + self.weight_energy <= 0:
            raise ValueError("weighted objective needs a positive weight")

    @property
    def axes(self) -> tuple:
        if self.kind == "min_delay":
            return ("delay",)
        if self.kind == "min_energy":
            return ("energy",)
        return tuple(a for a, w in (("delay", self.weight_delay),
                                    ("energy", self.weight_energy)) if w > 0)


@dataclass(frozen=True)
class Constraint:
    min_accuracy: Optional[float] = None
    max_delay: Optional[float] = None   # s
    max_energy: Optional[float] = None  # J

    def __post_init__(self):
        for name in ("min_accuracy", "max_delay", "max_energy"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.min_accuracy is not None and self.min_accuracy > 1:
            raise ValueError("min_accuracy must lie in [0, 1]")

    @property
    def axes(self) -> tuple:
        out = []
        if self.min_accuracy is not None:
            out.append("neg_accuracy")
        if self.max_delay is not None:
            out.append("delay")
        if self.max_energy is not None:
            out.append("energy")
        return tuple(out)

    def violations(self, report: CostReport) -> List[str]:
        out = []
        if self.min_accuracy is not None and report.accuracy < self.min_accuracy:
            out.append("min_accuracy")
        if self.max_delay is not None and report.delay.t_total > self.max_delay:
            out.append("max_delay")
        if self.max_energy is not None and report.energy.e_total > self.max_energy:
            out.append("max_energy")
        return out

    def admits(self, report: CostReport) -> bool:
        return not self.violations(report)


def axis_value(report: CostReport, axis: str) -> float:
    if axis == "delay":
        return report.delay.t_total
    if axis == "energy":
        return report.energy.e_total
    if axis == "neg_accuracy":
        return -report.accuracy
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")


def sweep(profile: SystemProfile, refined: bool = True) -> SweepResult:
    """Evaluate every (exit, split) plan, ordered by exit then split."""
    return SweepResult(tuple(evaluate_plan(p, profile, refined) for p in profile.plans()))


def _dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(rows: Iterable[CostReport], axes: Sequence[str] = ("delay", "energy")) -> List[CostReport]:
    """Non-dominated rows, all axes minimized. Equal points are all kept."""
    axes = tuple(dict.fromkeys(axes))
    if len(axes) < 2:
        raise ValueError("pareto_front needs at least two axes")
    rows = sorted(rows, key=lambda r: (r.plan.exit, r.plan.split))
    if not rows:
        raise ValueError("empty sweep")
    points = [tuple(axis_value(r, a) for a in axes) for r in rows]
    # sort by the axes so only earlier points can dominate a later one
    order = sorted(range(len(rows)), key=lambda i: points[i])
    kept = []
    front: List[tuple] = []
    for i in order:
        if not any(_dominates(q, points[i]) for q in front):
            front.append(points[i])
            kept.append(i)
    return [rows[i] for i in sorted(kept)]


def _score(objective: Objective, rows: Sequence[CostReport]):
    if objective.kind == "min_delay":
        return lambda r: r.delay.t_total
    if objective.kind == "min_energy":
        return lambda r: r.energy.e_total
    # normalize by the sweep-wide maxima so the weights are unitless
    max_t = max(r.delay.t_total for r in rows) or 1.0
    max_e = max(r.energy.e_total for r in rows) or 1.0
    wd, we = objective.weight_delay, objective.weight_energy
    return lambda r: wd * r.delay.t_total / max_t + we * r.energy.e_total / max_e


def select(rows: Sequence[CostReport], objective: Objective, constraint: Constraint) -> CostReport:
    """Pick the best feasible row; ties go to the smaller exit, then the smaller split."""
    rows = list(rows)
    feasible = [r for r in rows if constraint.admits(r)]
    if not feasible:
        name, detail = tightest_violation(rows, constraint)
        raise InfeasibleError(f"no plan satisfies the constraints; {detail}", name)
    score = _score(objective, rows)
    return min(feasible, key=lambda r: (score(r), r.plan.exit, r.plan.split))


def optimize(profile: SystemProfile, objective: Objective = Objective(),
             constraint: Constraint = Constraint(), refined: bool = True) -> CostReport:
    return select(sweep(profile, refined).rows, objective, constraint)


def tightest_violation(rows: Sequence[CostReport], constraint: Constraint):
    """Name the constraint that rejects the most plans, with the best attainable value."""
    candidates = []
    if constraint.min_accuracy is not None:
        best = max(r.accuracy for r in rows)
        rejected = sum(r.accuracy < constraint.min_accuracy for r in rows)
        candidates.append((rejected, "min_accuracy",
                           f"min_accuracy={constraint.min_accuracy:g} (best attainable {best:g})"))
    if constraint.max_delay is not None:
        best = min(r.delay.t_total for r in rows)
        rejected = sum(r.delay.t_total > constraint.max_delay for r in rows)
        candidates.append((rejected, "max_delay",
                           f"max_delay={constraint.max_delay * 1e3:.3f} ms "
                           f"(best attainable {best * 1e3:.3f} ms)"))
    if constraint.max_energy is not None:
        best = min(r.energy.e_total for r in rows)
        rejected = sum(r.energy.e_total > constraint.max_energy for r in rows)
        candidates.append((rejected, "max_energy",
                           f"max_energy={constraint.max_energy:.4f} J (best attainable {best:.4f} J)"))
    if not candidates:
        return None, "empty plan set"
    _, name, detail = max(candidates, key=lambda c: c[0])
    return name, f"tightest constraint: {detail}"


def binding_constraint(report: CostReport, rows: Sequence[CostReport],
                       objective: Objective, constraint: Constraint) -> str:
    """One-line explanation of why ``report`` was chosen."""
    score = _score(objective, rows)
    better = [r for r in rows if score(r) < score(report)]
    if not better:
        return f"{objective.kind}: global optimum, no constraint binding"
    blocked = {}
    for r in better:
        for name in constraint.violations(r):
            blocked[name] = blocked.get(name, 0) + 1
    names = ", ".join(f"{n} (excludes {k} better plan{'s' if k > 1 else ''})"
                      for n, k in sorted(blocked.items(), key=lambda kv: -kv[1]))
    return f"{objective.kind}: binding {names}"
