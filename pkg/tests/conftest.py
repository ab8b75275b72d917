import numpy as np
import pytest

from kaonbell.config import load_config, to_constants
from kaonbell.quasispin import PairState, SingleKaonState, normalize, tensor


@pytest.fixture(scope="session")
def constants():
    """Working constants read from the packaged defaults file."""
    return to_constants(load_config())


def random_pair_state(rng: np.random.Generator) -> PairState:
    """Random unit-norm two-kaon state."""
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    state, _ = normalize(PairState(*amps))
    return state


def random_single_state(rng: np.random.Generator) -> SingleKaonState:
    """Random unit-norm one-kaon state."""
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    n = np.linalg.norm(a)
    return SingleKaonState(a[0] / n, a[1] / n)


def random_product_state(rng: np.random.Generator) -> PairState:
    return tensor(random_single_state(rng), random_single_state(rng))
