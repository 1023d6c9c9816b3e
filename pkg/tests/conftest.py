import pytest

from mdiqkd.core import ChannelParams, IntensityProfile

# operating points used throughout: the 120 km and 150 km optimal rows
PROFILE_120 = IntensityProfile(mu=0.5866, nu=0.3323, omega=0.0767, p_mu=0.4151, p_nu=0.1337, p_omega=0.4305)
PROFILE_150 = IntensityProfile(mu=0.3851, nu=0.3707, omega=0.0763, p_mu=0.1763, p_nu=0.1898, p_omega=0.6124)


@pytest.fixture
def profile_120():
    return PROFILE_120


@pytest.fixture
def profile_150():
    return PROFILE_150


@pytest.fixture
def channel_120():
    return ChannelParams(distance_km=120.0)
