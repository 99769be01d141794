import os

import pytest

from qnl.cliffords import PulseSettings
from qnl.dynamics import CoherenceParams


def jobs() -> int:
    env = os.environ.get("QNL_JOBS", "").strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return min(4, os.cpu_count() or 1)


@pytest.fixture(scope="session")
def reference_coherence() -> CoherenceParams:
    # the characterized device: T1 = 8.66 us, T2 = 9.08 us
    return CoherenceParams(t1=8.66e-6, t2=9.08e-6)


@pytest.fixture(scope="session")
def default_pulses() -> PulseSettings:
    return PulseSettings()
