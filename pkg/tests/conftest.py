import numpy as np
import pytest

from skell.model import derive_params

ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


MODELS = {
    1: ([0.3], [[1.5]], [2.0]),
    2: ([0.5, -1.0], [[2.0, 0.6], [0.6, 1.0]], [2.0, -1.0]),
    3: ([0.2, -0.4, 1.0], [[1.0, 0.3, -0.2], [0.3, 2.0, 0.4], [-0.2, 0.4, 1.5]], [1.5, -0.5, 0.8]),
}


def model(n, centred=False):
    mu, Om, al = MODELS[n]
    if centred:
        mu = [0.0] * n
    return derive_params(mu, Om, al)


@pytest.fixture(params=[1, 2, 3])
def params_n(request):
    return model(request.param)


@pytest.fixture
def params2():
    return model(2)


def random_grid(n, points, max_norm, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((points, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    return u * (max_norm * rng.uniform(0.05, 1.0, (points, 1)))
