"""Domain types for the offloading model and their TOML configuration.

All dataclasses hold values in the units used by the configuration file
(kilobits, ms, Mbps, GFLOP, GFLOPS, W), so that a profile written back to
disk is bit-identical to what was read. Code that does arithmetic reads
the ``*_si`` accessors instead (bits, seconds, FLOP, FLOP/s).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Tuple

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

import tomli_w

# unit conversions into SI
KB = 1e3          # kilobit -> bit
MS = 1e-3         # millisecond -> second
MBPS = 1e6        # Mbps -> bit/s
GIGA = 1e9        # GFLOP -> FLOP, GFLOPS -> FLOP/s
KB_PER_MS = KB / MS

PROVENANCE_KINDS = ("measured", "approximate", "interpolated")
PREP_MODELS = ("divide", "multiply")
PREP_VOLUMES = ("comp", "ul")


class ProfileError(ValueError):
    """Base class for every profile loading problem."""


class ConfigParseError(ProfileError):
    """The configuration file is not valid TOML."""


class UnknownKeyError(ProfileError):
    """A section or key is not part of the configuration schema."""


class ValidationError(ProfileError):
    """A value violates an invariant. ``field`` holds the dotted key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UndefinedRatioError(ZeroDivisionError):
    """Compression ratio requested for an empty compressed volume."""


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ValidationError(name, message)


def _nonneg(obj: Any, prefix: str, *names: str) -> None:
    for name in names:
        v = getattr(obj, name)
        _require(v >= 0 and not math.isnan(v), f"{prefix}.{name}", f"must be >= 0, got {v!r}")


def _positive(obj: Any, prefix: str, *names: str) -> None:
    for name in names:
        v = getattr(obj, name)
        _require(v > 0, f"{prefix}.{name}", f"must be > 0, got {v!r}")


def compression_ratio(d_orig: float, d_comp: float) -> float:
    """Ratio of the original to the compressed data volume at a split."""
    if d_comp == 0:
        raise UndefinedRatioError("compression ratio undefined for zero compressed volume")
    return d_orig / d_comp


@dataclass(frozen=True)
class CnnTopology:
    num_blocks: int
    num_exits: int
    num_splits: int
    # exits sit on the split points; relax only for custom networks
    exits_at_splits: bool = True

    def __post_init__(self):
        for name in ("num_blocks", "num_exits", "num_splits"):
            _require(getattr(self, name) >= 1, f"topology.{name}", "must be >= 1")
        if self.exits_at_splits:
            _require(self.num_splits == self.num_exits, "topology.num_splits",
                     f"must equal num_exits ({self.num_exits}) when exits_at_splits is set")
        else:
            # segments 1..E must exist for every exit
            _require(self.num_exits <= self.num_splits, "topology.num_exits",
                     f"must not exceed num_splits ({self.num_splits})")


@dataclass(frozen=True)
class SplitPointEntry:
    """One row of the split table.

    ``segment_demand`` is the work of the layers *after* this split and
    before the next one, so row 0 holds the first segment.
    """

    split_index: int
    d_orig: float
    d_comp: float
    d_ul: float
    d_dl: float
    segment_demand: float
    compressor: bool = False
    compression_ratio: Optional[float] = None
    d_dl_payload: Optional[float] = None

    def validate(self, prefix: str) -> None:
        _nonneg(self, prefix, "d_orig", "d_comp", "d_ul", "d_dl", "segment_demand")
        if self.compressor:
            _require(self.d_comp <= self.d_orig, f"{prefix}.d_comp",
                     "must not exceed d_orig when a compressor is configured")
        else:
            _require(self.d_comp == self.d_orig, f"{prefix}.d_comp",
                     "must equal d_orig when no compressor is configured")
        if self.compression_ratio is not None:
            _require(self.compression_ratio > 0, f"{prefix}.compression_ratio", "must be > 0")
        if self.d_dl_payload is not None:
            _require(0 <= self.d_dl_payload <= self.d_dl, f"{prefix}.d_dl_payload",
                     "must lie in [0, d_dl]")

    @property
    def d_comp_bits(self) -> float:
        return self.d_comp * KB

    @property
    def d_ul_bits(self) -> float:
        return self.d_ul * KB

    @property
    def d_dl_bits(self) -> float:
        return self.d_dl * KB

    @property
    def segment_flop(self) -> float:
        return self.segment_demand * GIGA


@dataclass(frozen=True)
class SplitProfile:
    entries: Tuple[SplitPointEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for pos, entry in enumerate(self.entries):
            _require(entry.split_index == pos, f"splits[{pos}].split_index",
                     f"expected {pos}; entries must be dense and sorted")
            entry.validate(f"splits[{pos}]")
        last = self.entries[-1] if self.entries else None
        _require(last is not None, "splits", "at least one entry is required")
        _require(last.d_ul == 0 and last.d_dl == 0, f"splits[{last.split_index}].d_ul",
                 "the full-local split must transfer nothing (d_ul = d_dl = 0)")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, split: int) -> SplitPointEntry:
        return self.entries[split]

    def __iter__(self):
        return iter(self.entries)

    @property
    def demands(self) -> Tuple[float, ...]:
        """Per-segment demand in GFLOP, segment 1 first."""
        return tuple(e.segment_demand for e in self.entries[:-1])


@dataclass(frozen=True)
class NetworkProfile:
    b_ul: float         # Mbps
    b_dl: float         # Mbps
    d_ul_const: float   # ms
    d_dl_const: float   # ms

    def __post_init__(self):
        _positive(self, "network", "b_ul", "b_dl")
        _nonneg(self, "network", "d_ul_const", "d_dl_const")

    @property
    def b_ul_si(self) -> float:
        return self.b_ul * MBPS

    @property
    def b_dl_si(self) -> float:
        return self.b_dl * MBPS

    @property
    def d_ul_si(self) -> float:
        return self.d_ul_const * MS

    @property
    def d_dl_si(self) -> float:
        return self.d_dl_const * MS


@dataclass(frozen=True)
class ComputeProfile:
    c_dev: float                      # GFLOPS, fitted device rate
    c_mec: float                      # GFLOPS, fitted server rate
    d_dev_const: float                # ms per local segment
    d_mec_const: float                # ms per server segment
    d_prep_const: float               # ms
    k_prep: float                     # kb/ms when prep_model == "divide"
    c_cpu: Optional[float] = None     # GFLOPS, hardware figure only
    c_gpu: Optional[float] = None     # GFLOPS, hardware figure only
    prep_model: str = "divide"
    prep_volume: str = "comp"

    def __post_init__(self):
        _positive(self, "compute", "c_dev", "c_mec")
        _nonneg(self, "compute", "d_dev_const", "d_mec_const", "d_prep_const", "k_prep")
        for name in ("c_cpu", "c_gpu"):
            if getattr(self, name) is not None:
                _nonneg(self, "compute", name)
        _require(self.prep_model in PREP_MODELS, "compute.prep_model",
                 f"must be one of {PREP_MODELS}")
        _require(self.prep_volume in PREP_VOLUMES, "compute.prep_volume",
                 f"must be one of {PREP_VOLUMES}")
        if self.prep_model == "divide":
            _require(self.k_prep > 0, "compute.k_prep", "must be > 0 for prep_model 'divide'")

    @property
    def c_dev_si(self) -> float:
        return self.c_dev * GIGA

    @property
    def c_mec_si(self) -> float:
        return self.c_mec * GIGA

    @property
    def d_dev_si(self) -> float:
        return self.d_dev_const * MS

    @property
    def d_mec_si(self) -> float:
        return self.d_mec_const * MS

    @property
    def d_prep_si(self) -> float:
        return self.d_prep_const * MS


@dataclass(frozen=True)
class PowerProfile:
    p_idle: float
    p_prep: float
    p_proc: float
    p_comm: float

    def __post_init__(self):
        _nonneg(self, "power", "p_idle", "p_prep", "p_proc", "p_comm")


@dataclass(frozen=True)
class AccuracyProfile:
    """Accuracy per (exit, split); ``values[e - 1][s]``."""

    values: Tuple[Tuple[float, ...], ...]
    provenance: Tuple[Tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(tuple(float(v) for v in r) for r in self.values))
        object.__setattr__(self, "provenance", tuple(tuple(r) for r in self.provenance))
        _require(len(self.values) == len(self.provenance), "accuracy.provenance",
                 "must have one row per exit")
        for e, (row, prow) in enumerate(zip(self.values, self.provenance), start=1):
            _require(len(row) == len(prow), f"accuracy.provenance[{e - 1}]",
                     "must match the accuracy row length")
            for s, (v, p) in enumerate(zip(row, prow)):
                _require(0.0 <= v <= 1.0, f"accuracy.values[{e - 1}][{s}]",
                         f"must lie in [0, 1], got {v!r}")
                _require(p in PROVENANCE_KINDS, f"accuracy.provenance[{e - 1}][{s}]",
                         f"must be one of {PROVENANCE_KINDS}")

    def __call__(self, exit: int, split: int) -> float:
        return self.values[exit - 1][split]

    def flag(self, exit: int, split: int) -> str:
        return self.provenance[exit - 1][split]


@dataclass(frozen=True)
class ExecutionPlan:
    exit: int
    split: int

    @property
    def offload_active(self) -> bool:
        return self.split < self.exit

    def __str__(self) -> str:
        return f"E={self.exit},S={self.split}"


@dataclass(frozen=True)
class SystemProfile:
    topology: CnnTopology
    splits: SplitProfile
    network: NetworkProfile
    compute: ComputeProfile
    power: PowerProfile
    accuracy: AccuracyProfile

    def __post_init__(self):
        n_s = self.topology.num_splits
        _require(len(self.splits) == n_s + 1, "splits",
                 f"expected {n_s + 1} entries (split 0..{n_s}), got {len(self.splits)}")
        _require(len(self.accuracy.values) == self.topology.num_exits, "accuracy.values",
                 f"expected {self.topology.num_exits} rows, one per exit")
        for e, row in enumerate(self.accuracy.values):
            _require(len(row) == n_s + 1, f"accuracy.values[{e}]",
                     f"expected {n_s + 1} columns, one per split")

    def plans(self):
        """All (exit, split) plans, ordered by exit then split."""
        return [ExecutionPlan(e, s)
                for e in range(1, self.topology.num_exits + 1)
                for s in range(0, self.topology.num_splits + 1)]

    def check_plan(self, plan: ExecutionPlan) -> None:
        n_e, n_s = self.topology.num_exits, self.topology.num_splits
        if not 1 <= plan.exit <= n_e:
            raise ValueError(f"exit out of range 1..{n_e}")
        if not 0 <= plan.split <= n_s:
            raise ValueError(f"split out of range 0..{n_s}")

    def segment_flop(self, i: int) -> float:
        """Demand of segment ``i`` (1-based) in FLOP; stored on split row i-1."""
        return self.splits[i - 1].segment_flop

    def to_dict(self) -> dict:
        return profile_to_dict(self)


# ---------------------------------------------------------------------------
# configuration (de)serialization
# ---------------------------------------------------------------------------

_SECTIONS = {
    "topology": CnnTopology,
    "network": NetworkProfile,
    "compute": ComputeProfile,
    "power": PowerProfile,
}
_SPLIT_KEYS = {f.name for f in fields(SplitPointEntry)}
_ACCURACY_KEYS = {"values", "provenance"}

DEFAULT_PROFILE_NAME = "paper.toml"


def default_profile_path():
    return resources.files("offsim") / "data" / DEFAULT_PROFILE_NAME


def _default_raw() -> dict:
    return tomllib.loads(default_profile_path().read_text(encoding="utf-8"))


def _check_keys(raw: Mapping[str, Any]) -> None:
    allowed = set(_SECTIONS) | {"splits", "accuracy"}
    for section, body in raw.items():
        if section not in allowed:
            raise UnknownKeyError(f"unknown section [{section}]")
        if section == "splits":
            if not isinstance(body, list):
                raise ValidationError("splits", "must be an array of tables")
            for pos, row in enumerate(body):
                for key in row:
                    if key not in _SPLIT_KEYS:
                        raise UnknownKeyError(f"unknown key splits[{pos}].{key}")
            continue
        if not isinstance(body, Mapping):
            raise ValidationError(section, "must be a table")
        known = _ACCURACY_KEYS if section == "accuracy" else {f.name for f in fields(_SECTIONS[section])}
        for key in body:
            if key not in known:
                raise UnknownKeyError(f"unknown key {section}.{key}")


def _build_section(cls, name: str, body: Mapping[str, Any]):
    kwargs = {}
    for f in fields(cls):
        if f.name not in body:
            continue
        value = body[f.name]
        kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
        if kind == "int" and (isinstance(value, bool) or not isinstance(value, int)):
            raise ValidationError(f"{name}.{f.name}", f"must be an integer, got {value!r}")
        if kind == "bool" and not isinstance(value, bool):
            raise ValidationError(f"{name}.{f.name}", f"must be a boolean, got {value!r}")
        if "float" in kind and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{name}.{f.name}", f"must be a number, got {value!r}")
            value = float(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        missing = [f.name for f in fields(cls) if f.name not in kwargs]
        raise ValidationError(f"{name}.{missing[0] if missing else '?'}", f"missing value ({exc})")


def profile_from_dict(raw: Mapping[str, Any]) -> SystemProfile:
    """Build a validated profile from a parsed configuration mapping."""
    _check_keys(raw)
    sections = {name: _build_section(cls, name, raw.get(name, {})) for name, cls in _SECTIONS.items()}
    rows = raw.get("splits", [])
    entries = [_build_section(SplitPointEntry, f"splits[{pos}]", row) for pos, row in enumerate(rows)]
    splits = SplitProfile(tuple(sorted(entries, key=lambda e: e.split_index)))
    acc = raw.get("accuracy", {})
    if "values" not in acc:
        raise ValidationError("accuracy.values", "missing value")
    values = acc["values"]
    provenance = acc.get("provenance") or [["measured"] * len(r) for r in values]
    accuracy = AccuracyProfile(values, provenance)
    return SystemProfile(splits=splits, accuracy=accuracy, **sections)


def profile_to_dict(profile: SystemProfile) -> dict:
    out: dict = {}
    for name in _SECTIONS:
        section = getattr(profile, name)
        out[name] = {f.name: getattr(section, f.name) for f in fields(section)
                     if getattr(section, f.name) is not None}
    out["accuracy"] = {
        "values": [list(r) for r in profile.accuracy.values],
        "provenance": [list(r) for r in profile.accuracy.provenance],
    }
    out["splits"] = [
        {f.name: getattr(e, f.name) for f in fields(e) if getattr(e, f.name) is not None}
        for e in profile.splits
    ]
    return out


def dumps_profile(profile: SystemProfile) -> str:
    return tomli_w.dumps(profile_to_dict(profile))


def dump_profile(profile: SystemProfile, path) -> None:
    Path(path).write_text(dumps_profile(profile), encoding="utf-8")


def parse_override_value(text: str) -> Any:
    """Parse a command-line override the way TOML would; bare words stay strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _apply_override(raw: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    if len(parts) < 2:
        raise UnknownKeyError(f"override key {key!r} must look like section.key")
    section = parts[0]
    if section == "splits":
        if len(parts) != 3 or not parts[1].isdigit():
            raise UnknownKeyError(f"override key {key!r} must look like splits.<index>.<key>")
        idx, name = int(parts[1]), parts[2]
        rows = raw.setdefault("splits", [])
        matches = [r for r in rows if r.get("split_index") == idx]
        if not matches:
            raise UnknownKeyError(f"override key {key!r}: no split with index {idx}")
        if name not in _SPLIT_KEYS:
            raise UnknownKeyError(f"unknown key splits[{idx}].{name}")
        matches[0][name] = value
        return
    if len(parts) != 2:
        raise UnknownKeyError(f"override key {key!r} must look like section.key")
    raw.setdefault(section, {})[parts[1]] = value
    _check_keys({section: raw[section]})


def load_profile(path=None, overrides: Optional[Mapping[str, Any]] = None) -> SystemProfile:
    """Load a profile from ``path`` (the built-in default when None).

    Keys missing from the file are taken from the built-in profile; the
    ``splits`` array and the ``accuracy`` table are replaced as a whole
    when present. ``overrides`` maps dotted keys such as ``network.b_ul``
    or ``splits.3.d_ul`` to values and is applied last.
    """
    raw = _default_raw()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"cannot read {path}: {exc}") from exc
        try:
            user = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigParseError(f"{path}: {exc}") from exc
        _check_keys(user)
        for section, body in user.items():
            if section in ("splits", "accuracy"):
                raw[section] = copy.deepcopy(body)
            else:
                raw[section].update(body)
    for key, value in (overrides or {}).items():
        _apply_override(raw, key, value)
    return profile_from_dict(raw)


_DEFAULT: Optional[SystemProfile] = None


def default_paper_profile() -> SystemProfile:
    """The built-in profile (cached; profiles are immutable)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_profile()
    return _DEFAULT


def with_changes(profile: SystemProfile, **sections: Mapping[str, Any]) -> SystemProfile:
    """Copy of ``profile`` with fields replaced per section, e.g. ``network={"b_ul": 25.0}``."""
    updated = {name: replace(getattr(profile, name), **changes) for name, changes in sections.items()}
    return replace(profile, **updated)


__all__ = [
    "AccuracyProfile", "CnnTopology", "ComputeProfile", "ConfigParseError", "ExecutionPlan",
    "NetworkProfile", "PowerProfile", "ProfileError", "SplitPointEntry", "SplitProfile",
    "SystemProfile", "UndefinedRatioError", "UnknownKeyError", "ValidationError",
    "compression_ratio", "default_paper_profile", "default_profile_path", "dump_profile",
    "dumps_profile", "load_profile", "parse_override_value", "profile_from_dict",
    "profile_to_dict", "with_changes",
]
