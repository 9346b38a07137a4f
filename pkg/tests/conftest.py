import pytest

from tickdrift.plant import plant1_scenario, plant2_scenario, run_all_modes


@pytest.fixture(scope="session")
def plant1_runs():
    return run_all_modes(plant1_scenario())


@pytest.fixture(scope="session")
def plant2_runs():
    return run_all_modes(plant2_scenario())


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])
