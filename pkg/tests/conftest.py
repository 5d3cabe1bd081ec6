import hypothesis
import numpy as np
import pytest

from frailtyfit.data import ClusteredSurvivalData

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


def random_dataset(rng, g=5, n_i=4, p=2, censor=0.3, ties=False):
    n = g * n_i
    time = rng.exponential(1.0, n)
    if ties:
        time = np.ceil(time * 4) / 4
    status = (rng.uniform(size=n) > censor).astype(int)
    status[0] = 1
    X = rng.standard_normal((n, p))
    cluster = np.repeat(np.arange(g), n_i)
    return ClusteredSurvivalData(time, status, X, cluster)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    return random_dataset(rng, g=6, n_i=5, p=2)


_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one verdict line per acceptance item, shown in the terminal summary."""

    def log(key: str, ok, detail: str):
        # ok=None marks an informational line
        tag = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{tag}  {key}: {detail}"
        _ACCEPTANCE[key] = line
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
