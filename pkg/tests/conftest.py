import warnings

import numpy as np
import pytest

from cavqfi.model import SystemParams

REGIMES = [(0.8, 0.8), (3.0, 0.2), (0.2, 3.0), (3.0, 3.0)]
PROBES = ["ghz", "x", "dicke", "excited", "ground"]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, d, trace=1.0):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return trace * rho / np.trace(rho).real


def params(n, k=0.0, g=0.0, **kw):
    return SystemParams(n, 1.0, k, g, **kw)


@pytest.fixture(autouse=True)
def _quiet_qfi_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        yield
