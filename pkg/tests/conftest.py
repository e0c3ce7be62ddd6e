import pytest

from kerrmag.params import baseline_config_path, load_params

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def baseline():
    """Bundled baseline: drives tuned to G/Gamma = 1.1 with the Kerr shift off."""
    return load_params(baseline_config_path())


@pytest.fixture(scope="session")
def baseline_zero(baseline):
    return baseline.replace(kerr_K=0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
