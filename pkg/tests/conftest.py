import numpy as np
import pytest

from cslbound.mass_model import reference_geometry
from cslbound.synth import SynthConfig, reference_params, synth_spectrum


@pytest.fixture(scope="session")
def geometry():
    return reference_geometry()


@pytest.fixture(scope="session")
def truth():
    return reference_params()


@pytest.fixture(scope="session")
def ref_spectrum(truth):
    """Reference-resolution psd-scatter spectrum (100 kHz, 2^22 points, n_av 60)."""
    return synth_spectrum(SynthConfig(truth, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
