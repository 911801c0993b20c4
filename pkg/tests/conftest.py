import copy
import sys
from pathlib import Path

import numpy as np
import pytest

from offsim.emulator import OffloadServer
from offsim.profiles import default_paper_profile, profile_from_dict, profile_to_dict

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def paper():
    return default_paper_profile()


def random_profile(rng: np.random.Generator, n=None):
    """A valid profile with random sizes and parameters."""
    n = int(rng.integers(1, 8)) if n is None else n
    raw = profile_to_dict(default_paper_profile())
    raw = copy.deepcopy(raw)
    raw["topology"].update(num_blocks=n, num_exits=n, num_splits=n)
    raw["network"] = {
        "b_ul": float(rng.uniform(1, 100)), "b_dl": float(rng.uniform(1, 100)),
        "d_ul_const": float(rng.uniform(0, 50)), "d_dl_const": float(rng.uniform(0, 20)),
    }
    raw["compute"].update(
        c_dev=float(rng.uniform(0.5, 20)), c_mec=float(rng.uniform(50, 1000)),
        d_dev_const=float(rng.uniform(0, 50)), d_mec_const=float(rng.uniform(0, 5)),
        d_prep_const=float(rng.uniform(0, 20)), k_prep=float(rng.uniform(0.5, 10)),
    )
    raw["power"] = {k: float(rng.uniform(0, 8)) for k in ("p_idle", "p_prep", "p_proc", "p_comm")}
    rows = []
    for s in range(n + 1):
        if s == n:
            rows.append(dict(split_index=s, d_orig=0.0, d_comp=0.0, d_ul=0.0, d_dl=0.0,
                             segment_demand=0.0, compressor=False))
            continue
        d_orig = float(rng.uniform(0.1, 100))
        compressed = bool(rng.integers(0, 2))
        d_comp = d_orig / float(rng.uniform(1, 16)) if compressed else d_orig
        rows.append(dict(split_index=s, d_orig=d_orig, d_comp=d_comp,
                         d_ul=float(rng.uniform(1, 3000)), d_dl=float(rng.uniform(0.1, 5)),
                         segment_demand=float(rng.uniform(0.01, 1.0)), compressor=compressed))
    raw["splits"] = rows
    acc = np.sort(rng.uniform(0, 1, size=n))
    raw["accuracy"] = {"values": [[float(a)] * (n + 1) for a in acc]}
    return profile_from_dict(raw)


@pytest.fixture
def server(paper):
    srv = OffloadServer(paper, "127.0.0.1:0")
    thread = srv.start_background()
    yield srv
    srv.shutdown()
    thread.join(timeout=5)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
