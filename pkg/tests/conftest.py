import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n, description): acceptance criterion number"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and report.when == "call":
        n, description = marker.args
        verdict = "PASS" if report.passed else "FAIL"
        line = f"[acceptance criterion {n:>2}] {verdict}: {description}"
        terminal = item.config.pluginmanager.get_plugin("terminalreporter")
        if terminal is not None:
            terminal.write_line("")
            terminal.write_line(line)

from slicegen.graphs import build_call_graph, build_icfg
from slicegen.harness import load_profile_dir
from slicegen.parser import parse_program

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    """Parse a fixture file and fail loudly on any diagnostic."""
    result = parse_program((FIXTURES / name).read_text())
    assert result.program is not None, result.diagnostics
    assert not result.diagnostics, result.diagnostics
    return result.program


def graphs_for(program):
    cg = build_call_graph(program)
    return cg, build_icfg(program, cg)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def netstats():
    return load_fixture("netstats.ir")


@pytest.fixture(scope="session")
def notification():
    return load_fixture("notification.ir")


@pytest.fixture(scope="session")
def shortcut():
    return load_fixture("shortcut.ir")


@pytest.fixture(scope="session")
def formatter():
    return load_fixture("formatter.ir")


@pytest.fixture(scope="session")
def branches():
    return load_fixture("branches.ir")


@pytest.fixture(scope="session")
def branches2x2():
    return load_fixture("branches2x2.ir")


@pytest.fixture(scope="session")
def fields_program():
    return load_fixture("fields.ir")


@pytest.fixture(scope="session")
def recursion_program():
    return load_fixture("recursion.ir")


@pytest.fixture(scope="session")
def scenario_profiles():
    return load_profile_dir(FIXTURES / "profiles")
