import pytest

from rediscovery.registry import Registry


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(name): marks a test as one acceptance criterion; "
        "a PASS/FAIL line per criterion is printed in the terminal summary",
    )
    config._acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_name = getattr(report, "_acceptance_name", None)
    if marker_name is None:
        return


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    results = item.config._acceptance_results
    passed = report.passed
    previous = results.get(name)
    results[name] = passed if previous is None else (previous and passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in results.items():
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")


@pytest.fixture(scope="session")
def registry():
    return Registry()
