import pytest
from hypothesis import settings

from polymer_lab.potentials import unit_ball_potential
from polymer_lab.spectral import compute_summary

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def ball():
    return unit_ball_potential()


@pytest.fixture(scope="session")
def ball_summary(ball):
    # one spectral solve shared by everything downstream
    return compute_summary(ball)
