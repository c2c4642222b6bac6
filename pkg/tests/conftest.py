import pytest

from twostrain import EpiParams, make_model

ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def fig1_params():
    return EpiParams(beta1=0.6, beta2=0.2, gamma=0.1, alpha=0.1, N=1000.0)


@pytest.fixture
def fig2_integrated():
    return make_model("integrated-chain", 5, 3), EpiParams(0.4, 0.2, 0.1, 0.1)


@pytest.fixture
def fig2_separated():
    return make_model("separated-chain", 5, 3), EpiParams(0.28, 0.2, 0.1, 0.1)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        terminalreporter.write_line(log[number])
