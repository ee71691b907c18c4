"""Ergodic-rate evaluation: Monte-Carlo means, closed-form surrogates, EE.

All expressions are evaluated in nats internally and converted to bits/s/Hz
at the reporting boundary. The per-user statistics enter either as the
composite (N, N+1) matrices (statistical CSI) or as realized channel columns
(N, 1); every formula below is agnostic to that width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import UserStat, sample_channel
from .dma import DmaState
from .linalg import herm_logdet, hermitize, nats_to_bits
from .scenario import Scenario, rng_stream

MODES = ("sic", "nsic", "downlink")


@dataclass(frozen=True)
class RateReport:
    mode: str
    surrogate_bits: float
    mc_mean_bits: float
    mc_se_bits: float
    trials: int
    per_user_bits: tuple | None = None   # downlink only
    dropped: int = 0


def noise_gram(dma: DmaState, N0: float) -> tuple[np.ndarray, bool]:
    """P = N0 (HQ)^H (HQ) with the singularity ridge applied when needed."""
    HQ = dma.HQ
    P = N0 * (HQ.conj().T @ HQ)
    P = hermitize(P)
    tr = float(np.trace(P).real)
    if tr == 0.0:
        return P, False
    try:
        np.linalg.cholesky(P)
        return P, False
    except np.linalg.LinAlgError:
        eps = 1e-12 * tr / P.shape[0]
        return P + eps * np.eye(P.shape[0]), True


def sic_rate_nats(dma: DmaState, G: np.ndarray, N0: float) -> float:
    """logdet(I + (HQ)^H G G^H (HQ) P^{-1}) evaluated as a logdet difference."""
    P, _ = noise_gram(dma, N0)
    if float(np.trace(P).real) == 0.0:
        return 0.0
    Y = dma.HQ.conj().T @ G
    return herm_logdet(P + Y @ Y.conj().T) - herm_logdet(P)


def nsic_rate_nats(dma: DmaState, mats: list[np.ndarray], N0: float) -> float:
    """Sum of per-user logdet terms with all other users as interference."""
    P, _ = noise_gram(dma, N0)
    if float(np.trace(P).real) == 0.0:
        return 0.0
    Ys = [dma.HQ.conj().T @ M for M in mats]
    A = P + sum(Y @ Y.conj().T for Y in Ys)
    ldA = herm_logdet(A)
    total = 0.0
    for Y in Ys:
        total += ldA - herm_logdet(A - Y @ Y.conj().T)
    return total


def downlink_sinrs(dma: DmaState, mats: list[np.ndarray], W: np.ndarray,
                   N_k: float) -> np.ndarray:
    """Per-user SINR ||M_k^H HQ w_k||^2 / (sum_{i!=k} ||M_k^H HQ w_i||^2 + N_k)."""
    HQW = dma.HQ @ W
    K = W.shape[1]
    sinrs = np.empty(K)
    for k, M in enumerate(mats):
        p = np.sum(np.abs(M.conj().T @ HQW) ** 2, axis=0)
        sinrs[k] = p[k] / (p.sum() - p[k] + N_k)
    return sinrs


def downlink_rate_nats(dma: DmaState, mats: list[np.ndarray], W: np.ndarray,
                       N_k: float) -> float:
    return float(np.sum(np.log1p(downlink_sinrs(dma, mats, W, N_k))))


def surrogate_rate(mode: str, dma: DmaState, stats: list[UserStat],
                   sc: Scenario, W: np.ndarray | None = None) -> float:
    """Closed-form rate surrogate in bits/s/Hz."""
    mats = [st.G_tilde for st in stats]
    if mode == "sic":
        nats = sic_rate_nats(dma, np.concatenate(mats, axis=1), sc.N0)
    elif mode == "nsic":
        nats = nsic_rate_nats(dma, mats, sc.N0)
    elif mode == "downlink":
        if W is None:
            raise ValueError("downlink mode requires the precoder W")
        nats = downlink_rate_nats(dma, mats, W, sc.N_k)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return nats_to_bits(nats)


def per_trial_rates(mode: str, dma: DmaState, stats: list[UserStat],
                    sc: Scenario, trials, seed: int,
                    W: np.ndarray | None = None):
    """Exact per-realization rates (nats) for the given trial indices.

    Each trial draws all K user channels from its dedicated stream, so the
    result depends only on (seed, trial index), not on evaluation order.
    Returns (rates, per_user_bits_sum, dropped).
    """
    if mode == "downlink" and W is None:
        raise ValueError("downlink mode requires the precoder W")
    rates = []
    dropped = 0
    K = len(stats)
    per_user = np.zeros(K) if mode == "downlink" else None
    for t in trials:
        rng = rng_stream(seed, int(t))
        gs = [sample_channel(st, rng) for st in stats]
        try:
            if mode == "sic":
                Ghat = np.stack(gs, axis=1)
                rates.append(sic_rate_nats(dma, Ghat, sc.N0))
            elif mode == "nsic":
                rates.append(nsic_rate_nats(dma, [g[:, None] for g in gs], sc.N0))
            elif mode == "downlink":
                mats = [g[:, None] for g in gs]
                s = downlink_sinrs(dma, mats, W, sc.N_k)
                per_user += np.log1p(s)
                rates.append(float(np.sum(np.log1p(s))))
            else:
                raise ValueError(f"unknown mode {mode!r}")
        except np.linalg.LinAlgError:
            dropped += 1
    return np.asarray(rates), per_user, dropped


def mc_rate(mode: str, dma: DmaState, stats: list[UserStat], sc: Scenario,
            T: int, seed: int, W: np.ndarray | None = None) -> RateReport:
    """Monte-Carlo ergodic rate over T seeded channel realizations."""
    if T < 1:
        raise ValueError("T must be >= 1")
    nats, per_user, dropped = per_trial_rates(mode, dma, stats, sc,
                                              range(T), seed, W=W)
    bits = nats / math.log(2.0)
    n = bits.size
    mean = float(bits.mean()) if n else float("nan")
    se = float(bits.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    per_user_bits = None
    if per_user is not None and n:
        per_user_bits = tuple(float(x) for x in per_user / math.log(2.0) / n)
    return RateReport(
        mode=mode,
        surrogate_bits=surrogate_rate(mode, dma, stats, sc, W=W),
        mc_mean_bits=mean, mc_se_bits=se, trials=T,
        per_user_bits=per_user_bits, dropped=dropped)


ARCHITECTURES = ("FD", "HB", "DMA")


def total_power(arch: str, sc: Scenario) -> float:
    """Total consumed power (W) of an architecture at the scenario's P_max."""
    if sc.P_max is None:
        raise ValueError("P_max is unset; energy efficiency needs a downlink budget")
    base = sc.P_max / sc.amp_eff + sc.P_BS
    if arch == "FD":
        return base + sc.N * sc.P_RF
    if arch == "HB":
        return base + sc.L * sc.P_RF + sc.N * sc.P_PS
    if arch == "DMA":
        return base + sc.L * sc.P_RF
    raise ValueError(f"unknown architecture {arch!r}")


def energy_efficiency(rate_bits: float, arch: str, sc: Scenario) -> float:
    """Rate divided by total consumed power, in (bits/s/Hz)/W."""
    return rate_bits / total_power(arch, sc)
