import pytest

from optosqueeze.model import default_params


@pytest.fixture
def sp():
    """Reference point: kappa=0.05, gamma_m=1e-6, g-=0.01, g+=0.0028, G=0.4 kappa."""
    return default_params()
