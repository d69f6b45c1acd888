import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("HERMCONT_OUTPUT_ROOT", str(tmp_path))
    return tmp_path

