import numpy as np
import pytest

from dmabeam import Scenario, place_users
from dmabeam.channel import stat_matrices
from dmabeam.dma import microstrip_propagation
from dmabeam.scenario import dbm_to_watt


def make_scenario(**kw):
    """Small default scenario for unit tests; override any field."""
    base = dict(L=2, S=4, K=2, trials=50, seed=1)
    base.update(kw)
    return Scenario(**base)


def downlink_scenario(**kw):
    kw.setdefault("P_max", dbm_to_watt(5.0))
    return make_scenario(**kw)


def build_stats(sc):
    users = place_users(sc)
    stats, stacked = stat_matrices(users, sc)
    model = microstrip_propagation(sc)
    return users, stats, stacked, model


def random_psd(n, rng, scale=1.0):
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (M @ M.conj().T) / n


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
