"""Uplink surrogate-rate maximization via alternating weighted-MMSE updates.

The receiver/weight pair has closed forms for a fixed weight vector q, and for
fixed (U, W) the objective is a Hermitian quadratic in q via the HQ = Qt*Ht
factorization, solved by element-wise refinement. The receive matrix is
updated before the weight matrix (the optimal U does not depend on W), which
makes the objective at the top of each iteration equal dim - rate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dma import DmaState, MicrostripModel, assemble_views, initial_weights
from .ewr import QuadraticProblem, ewr_solve, uc_solve
from .linalg import herm_logdet, nats_to_bits, psd_solve
from .rates import noise_gram, nsic_rate_nats, sic_rate_nats
from .scenario import Scenario, rng_stream


class SolverError(RuntimeError):
    """An iterative solver violated one of its convergence guarantees."""


def update_receiver_and_weight(mode: str, dma: DmaState, mats: list[np.ndarray],
                               N0: float):
    """Closed-form receiver(s) U and weight(s) W for the current q.

    mode "sic": one (U, W, E) triple over the stacked statistics matrix.
    mode "nsic": per-user lists; U_k shares the all-user Gram in its inverse.
    E is evaluated through the general quadratic form U^H A U - U^H B - B^H U + I
    so it is meaningful for any U, not only the optimum.
    """
    G = np.concatenate(mats, axis=1)
    HQ = dma.HQ
    P, ridged = noise_gram(dma, N0)
    Y = HQ.conj().T @ G
    A = Y @ Y.conj().T + P
    U_all, ridged2 = psd_solve(A, Y)
    flags = []
    if ridged or ridged2:
        flags.append("uplink-ridge")

    if mode == "sic":
        U = U_all
        E = _mse_matrix(U, A, Y)
        W, eflag = _inverse_flag(E)
        if eflag:
            flags.append("uplink-E-ridge")
        return U, W, E, flags
    if mode == "nsic":
        Us, Ws, Es = [], [], []
        col = 0
        for M in mats:
            m = M.shape[1]
            Yk = Y[:, col:col + m]
            Uk = U_all[:, col:col + m]
            col += m
            Ek = _mse_matrix(Uk, A, Yk)
            Wk, eflag = _inverse_flag(Ek)
            if eflag:
                flags.append("uplink-E-ridge")
            Us.append(Uk)
            Ws.append(Wk)
            Es.append(Ek)
        return Us, Ws, Es, flags
    raise ValueError(f"unknown mode {mode!r}")


def _inverse_flag(E):
    return psd_solve(E, np.eye(E.shape[0], dtype=complex))


def _mse_matrix(U, A, Y):
    UA = U.conj().T @ A @ U
    UY = U.conj().T @ Y
    return UA - UY - UY.conj().T + np.eye(Y.shape[1], dtype=complex)


def wmmse_objective(Ws, Es) -> float:
    """tr(W E) - logdet(W), summed over users for the nSIC mode (nats)."""
    if not isinstance(Ws, (list, tuple)):
        Ws, Es = [Ws], [Es]
    total = 0.0
    for W, E in zip(Ws, Es):
        total += float(np.trace(W @ E).real) - herm_logdet(W)
    return total


def assemble_uplink_quadratic(mode: str, dma: DmaState, mats: list[np.ndarray],
                              U, W, N0: float) -> tuple[QuadraticProblem, float]:
    """Reduce the weighted-MSE objective to q^H D q - 2 Re(q^H c) + const.

    The Hadamard factor takes the plain transpose of the receiver-side Gram
    (tr(Qt^H A Qt B) = q^H (A o B^T) q), and the linear term conjugates the
    diagonal so that 2 Re(q^H c) reproduces tr(Qt C) + tr(C^H Qt^H).
    """
    G = np.concatenate(mats, axis=1)
    Ht = dma.H_tilde
    N = G.shape[0]
    A0 = G @ G.conj().T + N0 * np.eye(N)
    if mode == "sic":
        Us, Ws = [U], [W]
        sides = [G]
    elif mode == "nsic":
        Us, Ws = U, W
        sides = mats
    else:
        raise ValueError(f"unknown mode {mode!r}")

    B = np.zeros((N, N), dtype=complex)
    c = np.zeros(N, dtype=complex)
    const = 0.0
    for Uk, Wk, Mk in zip(Us, Ws, sides):
        HtU = Ht @ Uk
        B += HtU @ Wk @ HtU.conj().T
        c += np.einsum("nl,nl->n", Mk @ (Wk @ Uk.conj().T), Ht.conj())
        const += float(np.trace(Wk).real) - herm_logdet(Wk)
    D = A0 * B.T
    return QuadraticProblem(D=D, c=c, tag=dma.tag), const


@dataclass
class WmmseResult:
    dma: DmaState
    rate_trace_bits: list
    objective_trace: list
    iterations: int
    converged: bool
    flags: list = field(default_factory=list)

    @property
    def rate_bits(self) -> float:
        return self.rate_trace_bits[-1]


def wmmse_run(mode: str, mats: list[np.ndarray], sc: Scenario,
              model: MicrostripModel, q0: np.ndarray | None = None) -> WmmseResult:
    """Alternate receiver/weight/DMA updates until the objective stalls.

    `mats` holds one statistics matrix per user (the composite (N, N+1)
    matrices for statistical CSI, or realized channel columns for the
    instantaneous-CSI variant). The objective must never increase; an
    increase beyond 1e-8 aborts with a diagnostic.
    """
    if q0 is None:
        q = initial_weights(sc, rng_stream(sc.seed, 0, kind="init"))
    else:
        q = np.asarray(q0, dtype=complex)
    flags: list = []
    rate_trace: list = []
    obj_trace: list = []
    converged = False
    dma = assemble_views(q, model, sc)
    iterations = 0

    for iterations in range(1, sc.wmmse_max_iters + 1):
        dma = assemble_views(q, model, sc)
        U, W, E, ufl = update_receiver_and_weight(mode, dma, mats, sc.N0)
        flags.extend(f for f in ufl if f not in flags)
        obj = wmmse_objective(W, E)
        if mode == "sic":
            rate = sic_rate_nats(dma, np.concatenate(mats, axis=1), sc.N0)
        else:
            rate = nsic_rate_nats(dma, mats, sc.N0)
        obj_trace.append(obj)
        rate_trace.append(nats_to_bits(rate))
        if len(obj_trace) > 1:
            prev = obj_trace[-2]
            if obj > prev + 1e-8 * max(1.0, abs(prev)):
                raise SolverError(
                    f"WMMSE objective increased at iteration {iterations}: "
                    f"{prev:.12e} -> {obj:.12e}")
            if abs(prev - obj) <= sc.wmmse_tol * max(1.0, abs(prev)):
                converged = True
                break
        prob, _ = assemble_uplink_quadratic(mode, dma, mats, U, W, sc.N0)
        if sc.constraint == "UC":
            res = uc_solve(prob)
            q = res.q
            flags.extend(f for f in res.flags if f not in flags)
        else:
            q = ewr_solve(prob, q, tol=sc.ewr_tol, max_sweeps=sc.ewr_max_sweeps)

    if not converged:
        flags.append("wmmse-max-iters")
    return WmmseResult(dma=dma, rate_trace_bits=rate_trace,
                       objective_trace=obj_trace, iterations=iterations,
                       converged=converged, flags=flags)
