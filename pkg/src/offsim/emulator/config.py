"""Emulation settings and trace types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from ..profiles import ExecutionPlan

JITTER_KINDS = ("none", "gaussian", "lognormal")
# which constant delays receive jitter: uplink, downlink, device segment, server segment
JITTER_TARGETS = frozenset({"ul", "dl", "dev", "mec"})

STAGES = (
    "prep_start", "prep_end", "ul_start", "ul_end", "seg_start", "seg_end",
    "mec_start", "mec_end", "dl_start", "dl_end", "done",
)


@dataclass(frozen=True)
class JitterSpec:
    """Additive noise on the constant per-stage delays.

    ``gaussian``: zero-mean normal with standard deviation ``sigma`` ms.
    ``lognormal``: ``exp(N(mu, sigma))`` ms, always a positive extra delay.
    A jittered constant is clamped at zero.
    """

    kind: str = "none"
    sigma: float = 0.0
    mu: float = 0.0
    targets: FrozenSet[str] = JITTER_TARGETS

    def __post_init__(self):
        if self.kind not in JITTER_KINDS:
            raise ValueError(f"jitter kind must be one of {JITTER_KINDS}")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ValueError("jitter sigma must be finite and >= 0")
        object.__setattr__(self, "targets", frozenset(self.targets))
        unknown = self.targets - JITTER_TARGETS
        if unknown:
            raise ValueError(f"unknown jitter targets {sorted(unknown)}")

    @classmethod
    def parse(cls, text: str) -> "JitterSpec":
        """Parse ``none``, ``gaussian:SIGMA[:targets]`` or ``lognormal:MU:SIGMA[:targets]``.

        Targets are comma separated, e.g. ``gaussian:2:ul,dl``.
        """
        parts = text.strip().split(":")
        kind = parts[0].lower()
        try:
            if kind == "none" and len(parts) == 1:
                return cls()
            if kind == "gaussian" and len(parts) in (2, 3):
                targets = parts[2].split(",") if len(parts) == 3 else JITTER_TARGETS
                return cls("gaussian", sigma=float(parts[1]), targets=targets)
            if kind == "lognormal" and len(parts) in (3, 4):
                targets = parts[3].split(",") if len(parts) == 4 else JITTER_TARGETS
                return cls("lognormal", mu=float(parts[1]), sigma=float(parts[2]), targets=targets)
        except ValueError as exc:
            raise ValueError(f"bad jitter spec {text!r}: {exc}") from exc
        raise ValueError(f"bad jitter spec {text!r}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and bool(self.targets)

    def sample(self, rng: Optional[np.random.Generator], target: str) -> float:
        """Extra delay in seconds for one occurrence of ``target``."""
        if not self.active or target not in self.targets:
            return 0.0
        if self.kind == "gaussian":
            return rng.normal(0.0, self.sigma) * 1e-3
        return math.exp(rng.normal(self.mu, self.sigma)) * 1e-3


def parse_endpoint(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


@dataclass(frozen=True)
class EmulationConfig:
    mode: str = "event"
    jitter: JitterSpec = field(default_factory=JitterSpec)
    seed: int = 0
    # bit/s; None means use the profile bitrates
    shaping_rate_ul: Optional[float] = None
    shaping_rate_dl: Optional[float] = None
    listen_endpoint: str = "127.0.0.1:5050"
    timeout: float = 30.0
    burst_bytes: int = 8192
    refined: bool = True

    def __post_init__(self):
        if self.mode not in ("event", "socket"):
            raise ValueError("mode must be 'event' or 'socket'")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name in ("shaping_rate_ul", "shaping_rate_dl"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.burst_bytes <= 0:
            raise ValueError("burst_bytes must be > 0")
        parse_endpoint(self.listen_endpoint)


@dataclass(frozen=True)
class TraceEvent:
    time: float            # s since the start of the round
    stage: str
    segment: Optional[int] = None

    def label(self) -> str:
        return self.stage if self.segment is None else f"{self.stage}({self.segment})"


@dataclass(frozen=True)
class EmulationTrace:
    plan: ExecutionPlan
    events: Tuple[TraceEvent, ...]

    @property
    def measured_total(self) -> float:
        return self.events[-1].time

    def stages(self) -> List[str]:
        return [e.label() for e in self.events]
