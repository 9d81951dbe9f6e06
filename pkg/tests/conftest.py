import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from domfuse import fixtures
from domfuse.fusion import GenerationParams
from domfuse.probgen import generate

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def gripper():
    return fixtures.pair("gripper-1ball")


@pytest.fixture(scope="session")
def gripper2():
    return fixtures.pair("gripper-2ball")


@pytest.fixture(scope="session")
def blocks():
    return fixtures.pair("blocks-3")


@pytest.fixture(scope="session")
def small_record(gripper, blocks):
    """One fused Gripper+Blocks record with a small object set."""
    return generate(*gripper, *blocks, GenerationParams(num_objs=5, walk_len=10, seed=7))
