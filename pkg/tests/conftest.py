import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rlblock.synthgen import GeneratorConfig  # noqa: E402


@pytest.fixture(scope="session")
def small_rldata():
    return GeneratorConfig.preset("rldata10000-analog").with_size(200, seed=11).build()


@pytest.fixture(scope="session")
def small_noisy():
    return GeneratorConfig.preset("noisy30").with_size(200, seed=12).build()


@pytest.fixture(scope="session")
def rldata500():
    return GeneratorConfig.preset("rldata500-analog", seed=5).build()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
