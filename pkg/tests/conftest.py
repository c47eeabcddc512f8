import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("thorough", max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_of(op):
    """Materialize an operator column by column through apply()."""
    cols = [op.apply(e) for e in np.eye(op.in_dim)]
    return np.stack(cols, axis=1)


def dense_adjoint_of(op):
    """Materialize the adjoint column by column through adjoint()."""
    cols = [op.adjoint(e) for e in np.eye(op.out_dim)]
    return np.stack(cols, axis=1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
