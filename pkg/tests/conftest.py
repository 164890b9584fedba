import numpy as np
import pytest

from solkin.config import resolve
from solkin.simulation import run


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the full-resolution presets")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-resolution run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class DeskRuns:
    """Desk-scale blob runs shared by the acceptance criteria, run on demand."""

    def __init__(self, base):
        self.base = base
        self._cache = {}

    def __call__(self, limiter="none"):
        if limiter not in self._cache:
            cfg = resolve("blob-desk", overrides={"limiter": limiter})
            self._cache[limiter] = run(cfg, self.base / limiter.replace("+", "_"))
        return self._cache[limiter]


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    return DeskRuns(tmp_path_factory.mktemp("desk"))


_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        _acceptance_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
