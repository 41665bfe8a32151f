import numpy as np
import pytest

from sharpfront import _backend, _pykernels

BACKENDS = ["python"] + (["compiled"] if _backend.BACKEND == "compiled" else [])


@pytest.fixture(params=BACKENDS)
def kern(request):
    return _backend.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines():
            terminalreporter.write_line(line)
