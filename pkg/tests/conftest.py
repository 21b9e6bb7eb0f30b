import os

import pytest
from flint import ctx
from hypothesis import HealthCheck, settings

DATA = os.path.join(os.path.dirname(__file__), "data")

# derandomized so the property suite is reproducible run to run
settings.register_profile(
    "cplus", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("cplus")


@pytest.fixture(autouse=True)
def prec256():
    saved = ctx.prec
    ctx.prec = 256
    yield
    ctx.prec = saved


def data_path(name: str) -> str:
    return os.path.join(DATA, name)
