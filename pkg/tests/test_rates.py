import math

import numpy as np
import pytest

from dmabeam import (assemble_views, energy_efficiency, mc_rate,
                     surrogate_rate, total_power)
from dmabeam.dma import random_lorentzian
from dmabeam.linalg import herm_logdet
from dmabeam.rates import downlink_sinrs, per_trial_rates
from dmabeam.scenario import dbm_to_watt

from conftest import build_stats, downlink_scenario, make_scenario


def random_dma(sc, model, seed=0):
    return assemble_views(random_lorentzian(sc.N, np.random.default_rng(seed)),
                          model, sc)


class TestHermLogdet:
    def test_rejects_asymmetric(self):
        M = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            herm_logdet(M)

    def test_value(self):
        assert herm_logdet(np.diag([2.0, 3.0]).astype(complex)) \
            == pytest.approx(math.log(6.0), rel=1e-12)


class TestMcRate:
    def test_deterministic_channel_zero_se(self):
        sc = make_scenario(K=1, K0=1e12, trials=20)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model)
        rep = mc_rate("sic", dma, stats, sc, 20, sc.seed)
        assert rep.mc_se_bits < 1e-6 * rep.mc_mean_bits
        assert rep.mc_mean_bits == pytest.approx(rep.surrogate_bits, rel=1e-4)

    def test_downlink_zero_precoder(self):
        sc = downlink_scenario(K=2)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model)
        W = np.zeros((sc.L, sc.K), dtype=complex)
        rep = mc_rate("downlink", dma, stats, sc, 5, sc.seed, W=W)
        assert rep.mc_mean_bits == 0.0
        assert rep.surrogate_bits == 0.0

    def test_trial_order_invariance(self):
        sc = make_scenario(K=2)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model)
        trials = [3, 1, 4, 1, 5][:4]  # a fixed set, two orders
        a, _, _ = per_trial_rates("sic", dma, stats, sc, [1, 3, 4, 5], sc.seed)
        b, _, _ = per_trial_rates("sic", dma, stats, sc, [5, 4, 3, 1], sc.seed)
        assert np.allclose(sorted(a), sorted(b), rtol=0, atol=0)
        assert a.mean() == pytest.approx(b.mean(), rel=1e-15)

    def test_per_user_breakdown_sums(self):
        sc = downlink_scenario(K=3)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model)
        rng = np.random.default_rng(0)
        W = rng.standard_normal((sc.L, 3)) + 1j * rng.standard_normal((sc.L, 3))
        W = W * math.sqrt(sc.P_max / np.linalg.norm(dma.HQ @ W) ** 2)
        rep = mc_rate("downlink", dma, stats, sc, 50, sc.seed, W=W)
        assert sum(rep.per_user_bits) == pytest.approx(rep.mc_mean_bits, rel=1e-9)

    def test_jensen_bound_small(self):
        sc = make_scenario(L=2, S=4, K=2, K0=1.0)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model, 3)
        rep = mc_rate("sic", dma, stats, sc, 500, sc.seed)
        assert rep.surrogate_bits >= rep.mc_mean_bits - 3 * rep.mc_se_bits

    def test_invalid_trials(self):
        sc = make_scenario()
        _, stats, _, model = build_stats(sc)
        with pytest.raises(ValueError):
            mc_rate("sic", random_dma(sc, model), stats, sc, 0, 0)


class TestSurrogate:
    def test_bits_nats_consistency(self):
        sc = downlink_scenario(K=2)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model)
        rng = np.random.default_rng(2)
        W = rng.standard_normal((sc.L, 2)) + 1j * rng.standard_normal((sc.L, 2))
        W *= math.sqrt(sc.P_max / np.linalg.norm(dma.HQ @ W) ** 2)
        bits = surrogate_rate("downlink", dma, stats, sc, W=W)
        mats = [st.G_tilde for st in stats]
        direct = float(np.sum(np.log2(1 + downlink_sinrs(dma, mats, W, sc.N_k))))
        assert bits == pytest.approx(direct, abs=1e-12)

    def test_downlink_requires_w(self):
        sc = downlink_scenario(K=2)
        _, stats, _, model = build_stats(sc)
        with pytest.raises(ValueError, match="precoder"):
            surrogate_rate("downlink", random_dma(sc, model), stats, sc)

    def test_nsic_approx_reasonable(self):
        sc = make_scenario(L=2, S=8, K=4)
        _, stats, _, model = build_stats(sc)
        dma = random_dma(sc, model, 5)
        rep = mc_rate("nsic", dma, stats, sc, 800, sc.seed)
        gap = abs(rep.surrogate_bits - rep.mc_mean_bits) / rep.mc_mean_bits
        assert gap < 0.10


class TestEnergyEfficiency:
    def test_total_power_value(self):
        # hand-derived: 3.162e-3/0.35 + 8*0.50119 + 7.9433 = 11.962 W
        sc = downlink_scenario(L=8, S=8, K=4, P_max=dbm_to_watt(5.0))
        assert total_power("DMA", sc) == pytest.approx(11.96189, rel=1e-4)

    def test_formula_differences(self):
        sc = downlink_scenario(L=2, S=4, K=2)
        fd = total_power("FD", sc)
        hb = total_power("HB", sc)
        dma = total_power("DMA", sc)
        assert fd == pytest.approx(dma + (sc.N - sc.L) * sc.P_RF)
        assert hb == pytest.approx(dma + sc.N * sc.P_PS)

    def test_ordering_same_rate(self):
        sc = downlink_scenario(L=8, S=8, K=4)
        rate = 5.0
        assert energy_efficiency(rate, "DMA", sc) > energy_efficiency(rate, "HB", sc)
        assert energy_efficiency(rate, "HB", sc) > energy_efficiency(rate, "FD", sc)

    def test_zero_rate(self):
        sc = downlink_scenario()
        assert energy_efficiency(0.0, "DMA", sc) == 0.0

    def test_requires_pmax(self):
        sc = make_scenario()
        with pytest.raises(ValueError, match="P_max"):
            energy_efficiency(1.0, "DMA", sc)

    def test_unknown_arch(self):
        sc = downlink_scenario()
        with pytest.raises(ValueError, match="architecture"):
            energy_efficiency(1.0, "XX", sc)
