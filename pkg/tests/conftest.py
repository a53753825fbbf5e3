import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from mcvdsim.channel import ChannelProfile
from mcvdsim.config import EnvironmentConfig


def make_profile(fractions, t_s=0.5, samples=100_000, bins_per_slot=1):
    """Synthetic channel profile with prescribed slot fractions.

    The histogram is constructed to be exactly consistent with the
    fractions (all of a slot's mass in its first fine bin).
    """
    m = len(fractions) - 1
    hist = np.zeros((m + 1) * bins_per_slot, dtype=np.int64)
    for i, f in enumerate(fractions):
        hist[i * bins_per_slot] = int(round(f * samples))
    fracs = tuple(hist[i * bins_per_slot : (i + 1) * bins_per_slot].sum() / samples
                  for i in range(m + 1))
    return ChannelProfile(
        slot_fractions=fracs,
        symbol_duration=t_s,
        isi_window=m,
        histogram=hist,
        bin_width=t_s / bins_per_slot,
        samples=samples,
    )


@pytest.fixture
def synthetic_profile():
    return make_profile((0.5, 0.2, 0.1, 0.05, 0.02, 0.01))


@pytest.fixture
def default_env():
    return EnvironmentConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
