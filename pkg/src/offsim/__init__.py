"""Delay, energy and accuracy models for split CNN inference with early exits."""

from .cost_model import (
    CostReport, DelayBreakdown, EnergyBreakdown, classification_accuracy,
    communication_delay, computing_delay, evaluate_plan, preprocessing_delay,
    total_delay, total_energy,
)
from .phy import PhyConfig, link_bitrate
from .planner import (
    Constraint, InfeasibleError, Objective, SweepResult, optimize, pareto_front, sweep,
)
from .profiles import (
    ExecutionPlan, SystemProfile, compression_ratio, default_paper_profile, load_profile,
)

__version__ = "0.1.0"
