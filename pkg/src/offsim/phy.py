"""Theoretical link bitrate from physical-layer parameters."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

from .profiles import NetworkProfile

SYMBOLS_PER_SLOT = 14  # normal cyclic prefix


class BitrateWarning(UserWarning):
    """A configured bitrate exceeds what the radio configuration can carry."""


def symbols_per_second(numerology: int) -> int:
    """OFDM symbols per subcarrier per second for a 5G NR numerology (mu)."""
    if numerology < 0:
        raise ValueError("numerology must be >= 0")
    return SYMBOLS_PER_SLOT * 1000 * 2 ** numerology


@dataclass(frozen=True)
class PhyConfig:
    """Radio parameters for one direction.

    ``n_sym`` is a rate: modulation symbols per subcarrier per *second*
    (14 symbols per slot times slots per second).
    """

    n_rb: int
    n_sub: int = 12
    n_bits: int = 6
    n_sym: float = 28000
    code_rate: float = 0.754

    def __post_init__(self):
        for name in ("n_rb", "n_sub", "n_bits", "n_sym"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.code_rate <= 1:
            raise ValueError("code_rate must lie in (0, 1]")


# 20 MHz at 30 kHz spacing, MCS 24 (64QAM, rate 0.754)
DEFAULT_PHY = PhyConfig(n_rb=106, n_sub=12, n_bits=6, n_sym=symbols_per_second(1), code_rate=0.754)


def link_bitrate(cfg: PhyConfig) -> float:
    """Peak bitrate in bit/s."""
    return cfg.n_rb * cfg.n_sub * cfg.n_bits * cfg.n_sym * cfg.code_rate


def check_network(network: NetworkProfile, uplink: PhyConfig,
                  downlink: Optional[PhyConfig] = None) -> bool:
    """Warn when a configured bitrate is above the radio peak. Returns True when consistent."""
    ok = True
    for name, configured, cfg in (("b_ul", network.b_ul_si, uplink),
                                  ("b_dl", network.b_dl_si, downlink or uplink)):
        peak = link_bitrate(cfg)
        if configured > peak:
            warnings.warn(f"network.{name} = {configured / 1e6:.3f} Mbps exceeds the "
                          f"PHY peak of {peak / 1e6:.3f} Mbps", BitrateWarning, stacklevel=2)
            ok = False
    return ok
