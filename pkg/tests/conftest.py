import numpy as np
import pytest
from hypothesis import settings

from linemanifold import PoseSE3
from linemanifold.manifold import so3_exp

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# filled by the acceptance tests, printed at the end of the session
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unit(rng, n=None):
    v = rng.normal(size=(3,) if n is None else (n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_pose(rng, scale=1.0):
    return PoseSE3(so3_exp(rng.normal(size=3)), scale * rng.normal(size=3))
