import pytest

from msrchoice.calibration import ProblemSpec


@pytest.fixture(scope="session")
def unit_spec():
    return ProblemSpec(k=1.0, sigma=1.0)
