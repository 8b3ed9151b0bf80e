import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FULL_SCALE = os.environ.get("TURBQKD_FULL_SCALE") == "1"


def pytest_collection_modifyitems(config, items):
    skip = pytest.mark.skip(reason="set TURBQKD_FULL_SCALE=1 to run 1024^2 / 10^4-shot checks")
    for item in items:
        if "full_scale" in item.keywords and not FULL_SCALE:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Callable ``(tag, ok, detail)`` collecting one verdict line per criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
