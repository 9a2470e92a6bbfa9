import pytest

from switchq.model import DiffusionSpec, QueueSpec

# parameter sets used across the suite
MIXED_QUEUE = dict(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta1=0.1, eta2=0.08)
ONE_WAY_HEAVY = dict(lambda1=1.0, mu1=0.5, lambda2=1.2, mu2=1.0, eta2=0.0, init_state=1, init_env_prob=0.4)
ONE_WAY_LIGHT = dict(lambda1=1.0, mu1=0.5, lambda2=1.0, mu2=2.0, eta2=0.0, init_state=1, init_env_prob=0.4)
MIXED_DIFFUSION = dict(lambda1s=1.0, mu1s=0.5, lambda2s=1.0, mu2s=2.0, omega1_sq=1.0, omega2_sq=4.0,
             eta1=0.1, eta2=0.08)
SCALED_DIFFUSION = dict(lambda1s=1.0, mu1s=0.5, lambda2s=0.8, mu2s=1.2, omega1_sq=0.2, omega2_sq=0.4,
             eta1=0.6, eta2=0.4)
ONE_WAY_DIFFUSION = dict(lambda1s=1.0, mu1s=0.5, lambda2s=1.0, mu2s=2.0, omega1_sq=1.0, omega2_sq=4.0,
             eta1=0.5, eta2=0.0, init_position=1.0, init_env_prob=0.4)


@pytest.fixture
def mixed_queue():
    return QueueSpec(**MIXED_QUEUE)


@pytest.fixture
def mixed_diffusion():
    return DiffusionSpec(**MIXED_DIFFUSION)


@pytest.fixture
def one_way_diffusion():
    return DiffusionSpec(**ONE_WAY_DIFFUSION)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo or quadrature checks")
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_CRITERIA: dict = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CRITERIA.setdefault(m.args[0], [m.args[1], True, 0])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or rep.when not in ("setup", "call", "teardown"):
        return
    entry = _CRITERIA.setdefault(m.args[0], [m.args[1], True, 0])
    if rep.failed:
        entry[1] = False
    if rep.when == "call":
        entry[2] += 1


def pytest_terminal_summary(terminalreporter):
    ran = {k: v for k, v in _CRITERIA.items() if v[2]}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ran):
        title, ok, count = ran[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {title} ({count} checks)")
