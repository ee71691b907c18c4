"""Statistical CSI construction and Rician channel sampling.

The second-order statistics of each user's channel are packaged as the
composite matrix Gt_k = [sqrt(a_k K0/(1+K0)) g_bar_k, sqrt(a_k/(1+K0)) R^(1/2)]
whose Gram Gt_k Gt_k^H equals E{g_k g_k^H}. Stacking the Gt_k horizontally
gives the matrix G used by the uplink rate bound and WMMSE solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, UserGeometry


@dataclass(frozen=True)
class UserStat:
    """Per-user statistical CSI."""

    g_bar: np.ndarray      # LoS steering vector, (N,)
    R: np.ndarray          # NLoS spatial correlation, (N, N) Hermitian PSD
    R_sqrt: np.ndarray     # Hermitian PSD square root of R
    alpha: float           # large-scale path loss, linear
    K0: float              # Rician factor, linear
    G_tilde: np.ndarray    # composite statistics matrix, (N, N+1)


@dataclass(frozen=True)
class StackedStat:
    """Horizontal stack G = [Gt_1, ..., Gt_K], shape (N, K*(N+1))."""

    G: np.ndarray


def upa_steering(psi: float, omega: float, sc: Scenario) -> np.ndarray:
    """Uniform planar array response for arrival direction (psi, omega).

    Element n (0-based) sits at x = (n mod S) d_x, z = floor(n/S) d_z; the
    phase is 2*pi/lambda_c times the projection of that position onto the
    arrival direction. Entries have unit modulus.
    """
    n = np.arange(sc.N)
    x_idx = n % sc.S
    z_idx = n // sc.S
    phase = (2.0 * math.pi / sc.lambda_c) * (
        math.sin(omega) * math.cos(psi) * x_idx * sc.d_x
        + math.cos(omega) * z_idx * sc.d_z
    )
    return np.exp(1j * phase)


def _exp_factor(size: int, r: float) -> np.ndarray:
    idx = np.arange(size)
    return r ** np.abs(idx[:, None] - idx[None, :])


def correlation(sc: Scenario) -> np.ndarray:
    """Kronecker spatial correlation for the element ordering n = l*S + s.

    The L x L factor correlates microstrips (vertical, z-axis) and the S x S
    factor correlates elements within a microstrip (horizontal, x-axis); both
    use the exponential model [R]_ij = r^|i-j|.
    """
    return np.kron(_exp_factor(sc.L, sc.r), _exp_factor(sc.S, sc.r)).astype(complex)


def psd_sqrt(R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues below -tol are rejected; tiny negatives are clamped to zero.
    """
    w, V = np.linalg.eigh((R + R.conj().T) / 2.0)
    if w.min() < -tol:
        raise ValueError(
            f"correlation matrix is not PSD: smallest eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    root = (V * np.sqrt(w)) @ V.conj().T
    return (root + root.conj().T) / 2.0


def stat_matrices(users: list[UserGeometry], sc: Scenario
                  ) -> tuple[list[UserStat], StackedStat]:
    """Build per-user statistics and the stacked matrix G.

    The correlation matrix is shared across users (common r); Gt_k combines
    the scaled LoS column with the scaled correlation square root so that
    Gt_k Gt_k^H reproduces the channel's second moment exactly.
    """
    R = correlation(sc)
    R_sqrt = psd_sqrt(R)
    los_scale = math.sqrt(sc.K0 / (1.0 + sc.K0))
    nlos_scale = math.sqrt(1.0 / (1.0 + sc.K0))

    stats = []
    for u in users:
        g_bar = upa_steering(u.psi, u.omega, sc)
        amp = math.sqrt(u.alpha)
        G_tilde = np.concatenate(
            [(amp * los_scale) * g_bar[:, None], (amp * nlos_scale) * R_sqrt],
            axis=1)
        stats.append(UserStat(g_bar=g_bar, R=R, R_sqrt=R_sqrt, alpha=u.alpha,
                              K0=sc.K0, G_tilde=G_tilde))
    G = np.concatenate([st.G_tilde for st in stats], axis=1)
    return stats, StackedStat(G=G)


def sample_channel(stat: UserStat, rng: np.random.Generator) -> np.ndarray:
    """Draw one Rician channel realization g_k from its statistics.

    The NLoS part is R^(1/2) ghat with ghat i.i.d. standard complex Gaussian
    (variance 1/2 per real component).
    """
    n = stat.g_bar.shape[0]
    ghat = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    los = math.sqrt(stat.alpha * stat.K0 / (1.0 + stat.K0)) * stat.g_bar
    nlos = math.sqrt(stat.alpha / (1.0 + stat.K0)) * (stat.R_sqrt @ ghat)
    return los + nlos
