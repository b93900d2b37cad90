import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from ptc_forge.pdk import load_pdk  # noqa: E402
from ptc_forge.topology import default_space  # noqa: E402

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def gf():
    return load_pdk("gf")


@pytest.fixture(scope="session")
def custom_pdk():
    return load_pdk("custom")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def space16():
    return default_space(16)
