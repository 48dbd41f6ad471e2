import os

import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="also run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("ICO_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; enable with --runslow or ICO_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_CRITERIA = range(1, 9)
_acceptance: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(n: int, passed: bool, detail: str) -> None:
        _acceptance[n] = (bool(passed), detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in ACCEPTANCE_CRITERIA:
        passed, detail = _acceptance.get(n, (False, "not evaluated"))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
