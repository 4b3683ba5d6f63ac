import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_sin(n_max=16, amplitude=1.0):
    """amplitude * sin(x) as a truncated field."""
    from rdalab.spectral import FourierField

    return FourierField.from_modes(
        n_max, {(0, 1): -0.5j * amplitude, (0, -1): 0.5j * amplitude}
    )
