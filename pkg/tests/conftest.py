import os
import pathlib
import sys

import pytest
from hypothesis import HealthCheck, settings

HERE = os.path.dirname(__file__)
sys.path.insert(0, HERE)

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REPO = os.path.dirname(HERE)
CONFIG_DIR = pathlib.Path(REPO) / "configs"


@pytest.fixture
def config_dir():
    return CONFIG_DIR
