import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from uavmec.config import NetworkConfig, load_config


@pytest.fixture
def cfg() -> NetworkConfig:
    return NetworkConfig()


@pytest.fixture
def micro_cfg() -> NetworkConfig:
    return load_config(profile="micro", apply_env=False)
