"""DMA physical layer: weight matrix views, constraint sets, microstrip model.

The weight vector q (one entry per metamaterial element) expands into the
block-sparse N x L matrix Q. The identity H Q = Qt Ht, with Qt = diag(q) and
Ht the block-diagonal N x L propagation matrix, is what lets the solvers
treat q as a plain vector variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

CONSTRAINT_TAGS = ("LP", "AO", "BA", "UC")
AO_INTERVAL = (0.001, 5.0)
BA_VALUES = (0.0, 0.1)
_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class MicrostripModel:
    """Waveguide propagation coefficients, identical for every microstrip."""

    alpha_wg: float
    gamma_wg: float
    rho: np.ndarray   # element-to-feed distances, (N,)
    h: np.ndarray     # propagation coefficients, (N,)


def microstrip_propagation(sc: Scenario) -> MicrostripModel:
    """Propagation coefficient h = exp(-rho*(alpha_wg + j*gamma_wg)) per element.

    Feed distances default to rho_{l,s} = s*d_x with s counted from 1, i.e.
    the first element sits one spacing away from the feed; a config override
    list (length S) replaces the per-strip distances.
    """
    if sc.rho_positions is not None:
        per_strip = np.asarray(sc.rho_positions, dtype=float)
    else:
        per_strip = (np.arange(sc.S) + 1.0) * sc.d_x
    rho = np.tile(per_strip, sc.L)
    h = np.exp(-rho * (sc.alpha_wg + 1j * sc.gamma_wg))
    return MicrostripModel(alpha_wg=sc.alpha_wg, gamma_wg=sc.gamma_wg,
                           rho=rho, h=h)


def lorentzian(theta) -> np.ndarray | complex:
    """Weight on the Lorentzian circle: (j + exp(j*theta)) / 2."""
    return (1j + np.exp(1j * np.asarray(theta))) / 2.0


def project_weight(value: complex, tag: str) -> complex:
    """Nearest feasible weight for a single element under the given set."""
    if tag == "LP":
        d = value - 0.5j
        if d == 0:  # objective flat on the circle; pick theta = 0
            return 0.5 + 0.5j
        return 0.5j + 0.5 * d / abs(d)
    if tag == "AO":
        return complex(min(max(value.real, AO_INTERVAL[0]), AO_INTERVAL[1]))
    if tag == "BA":
        lo, hi = BA_VALUES
        return complex(lo if abs(value.real - lo) <= abs(value.real - hi) else hi)
    if tag == "UC":
        return value
    raise ValueError(f"unknown constraint tag {tag!r}")


def infeasible_indices(q: np.ndarray, tag: str, tol: float = _FEAS_TOL) -> np.ndarray:
    """Indices of entries violating the constraint set, empty when feasible."""
    q = np.asarray(q)
    if tag == "LP":
        bad = np.abs(np.abs(q - 0.5j) - 0.5) > tol
    elif tag == "AO":
        bad = (np.abs(q.imag) > tol) | (q.real < AO_INTERVAL[0] - tol) \
            | (q.real > AO_INTERVAL[1] + tol)
    elif tag == "BA":
        bad = np.minimum(np.abs(q - BA_VALUES[0]),
                         np.abs(q - BA_VALUES[1])) > tol
    elif tag == "UC":
        bad = np.zeros(q.shape, bool)
    else:
        raise ValueError(f"unknown constraint tag {tag!r}")
    return np.nonzero(bad)[0]


@dataclass(frozen=True)
class DmaState:
    """Weight vector q plus its derived matrix views."""

    q: np.ndarray          # (N,)
    tag: str
    model: MicrostripModel
    S: int
    L: int
    Q: np.ndarray          # block-sparse (N, L)
    Q_tilde: np.ndarray    # diag(q), (N, N)
    H: np.ndarray          # diag(h), (N, N)
    H_tilde: np.ndarray    # block-diagonal (N, L)

    @property
    def N(self) -> int:
        return self.S * self.L

    @property
    def HQ(self) -> np.ndarray:
        return self.Q_tilde @ self.H_tilde


def block_matrix(vec: np.ndarray, S: int, L: int) -> np.ndarray:
    """Expand an N-vector into the (N, L) block layout: entry n in column n//S."""
    n = np.arange(S * L)
    out = np.zeros((S * L, L), dtype=complex)
    out[n, n // S] = vec
    return out


def assemble_views(q: np.ndarray, model: MicrostripModel, sc: Scenario,
                   tag: str | None = None) -> DmaState:
    """Build a validated DmaState from a weight vector.

    Rejects vectors violating the active constraint set (listing the
    offending indices) and checks the H Q = Qt Ht factorization.
    """
    q = np.asarray(q, dtype=complex)
    if q.shape != (sc.N,):
        raise ValueError(f"expected weight vector of length {sc.N}, got {q.shape}")
    tag = sc.constraint if tag is None else tag
    bad = infeasible_indices(q, tag)
    if bad.size:
        raise ValueError(
            f"weights violate the {tag} constraint at indices {bad.tolist()}")

    Q = block_matrix(q, sc.S, sc.L)
    Q_tilde = np.diag(q)
    H = np.diag(model.h)
    H_tilde = block_matrix(model.h, sc.S, sc.L)
    resid = np.abs(H @ Q - Q_tilde @ H_tilde).max()
    if resid > 1e-12 * max(1.0, np.abs(q).max()):
        raise AssertionError(f"HQ != Qt*Ht, max residual {resid:.3e}")
    return DmaState(q=q, tag=tag, model=model, S=sc.S, L=sc.L, Q=Q,
                    Q_tilde=Q_tilde, H=H, H_tilde=H_tilde)


def random_lorentzian(n: int, rng: np.random.Generator) -> np.ndarray:
    """LP-feasible weights with i.i.d. phases uniform on [0, 2*pi)."""
    return lorentzian(rng.uniform(0.0, 2.0 * math.pi, n))


def initial_weights(sc: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Seeded feasible start for the active constraint set."""
    if sc.q0 == "ones":
        if sc.constraint == "BA":
            raise ValueError("q0='ones' is infeasible under the BA constraint")
        if sc.constraint == "LP":
            raise ValueError("q0='ones' is infeasible under the LP constraint")
        return np.ones(sc.N, dtype=complex)
    if sc.constraint in ("LP", "UC"):
        return random_lorentzian(sc.N, rng)
    if sc.constraint == "AO":
        return np.full(sc.N, 1.0, dtype=complex)
    return np.full(sc.N, BA_VALUES[1], dtype=complex)
