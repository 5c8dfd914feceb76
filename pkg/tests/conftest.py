import numpy as np
import pytest

# One summary line per acceptance criterion, shown at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from hssalt.sampling import SimRequest, generate_nondegenerate
from hssalt.types import CensoredSample, MixtureParams


@pytest.fixture
def true_params():
    """Simulation-study truth: two subgroups with a 10x rate separation."""
    return MixtureParams(
        alpha=1.2, lambda1=0.2, lambda2=(0.1, 1.0), pi=(0.4, 0.6), tau=1.6
    )


@pytest.fixture
def two_point_sample():
    return CensoredSample(times=np.array([0.5, 2.0]), n=2, tau=1.0)


@pytest.fixture
def seeded_sample(true_params):
    """One fixed moderate sample (n=35, r=30)."""
    out, _ = generate_nondegenerate(
        SimRequest(params=true_params, n=35, r=30, seed=20240819)
    )
    return out.sample


def draw_sample(params, n, r, seed, index=0):
    out, _ = generate_nondegenerate(
        SimRequest(params=params, n=n, r=r, seed=seed, replication_index=index)
    )
    return out.sample
