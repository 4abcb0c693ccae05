import numpy as np
import pytest

from inputs.state import FourierState

T_SHORT = 2.0 * np.pi + 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def band_state(rng):
    """Real data on 3 <= |k| <= 6 with zero means (the dipole/Dirac acceptance class)."""
    return FourierState.random(6, rng, kmin=3, kmax=6)
