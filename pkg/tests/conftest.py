import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import ortho_group

from seqlat.geometry import RigidTransform

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE = {}


def random_rigid(rng, p):
    q = ortho_group.rvs(p, random_state=rng) if p > 1 else np.array([[rng.choice([-1.0, 1.0])]])
    return RigidTransform(q, rng.normal(size=p))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
