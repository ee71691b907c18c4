"""Downlink joint precoder/DMA-weight optimization.

The fractional-programming reformulation introduces per-user auxiliaries
(rho_k, gamma_k) that linearize the SINR ratios; the penalty double loop
splits the coupled power constraint through an auxiliary V = HQW with an
augmented-Lagrangian inner loop and dual/penalty outer updates driven by the
constraint violation h = ||HQW - V||_F^2. All objectives are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dma import DmaState, MicrostripModel, assemble_views, initial_weights
from .ewr import QuadraticProblem, ewr_solve, uc_solve
from .linalg import hermitize, nats_to_bits, psd_solve
from .rates import downlink_rate_nats
from .scenario import Scenario, rng_stream
from .uplink import SolverError


def fp_auxiliaries(V: np.ndarray, mats: list[np.ndarray], N_k: float
                   ) -> tuple[np.ndarray, list[np.ndarray]]:
    """Optimal fractional-programming auxiliaries for fixed V.

    rho_k is the surrogate SINR of column k and gamma_k the scaled matched
    receiver; both depend only on V, so updating gamma then rho is the exact
    joint maximizer of the objective over (rho, Gamma), not merely two
    coordinate steps.
    """
    K = V.shape[1]
    rho = np.empty(K)
    Gamma = []
    for k, M in enumerate(mats):
        Z = M.conj().T @ V
        p = np.sum(np.abs(Z) ** 2, axis=0)
        den = float(p.sum() + N_k)
        Gamma.append(Z[:, k] / den)
        rho[k] = p[k] / (den - p[k])
    return rho, Gamma


def fp_objective(V: np.ndarray, rho: np.ndarray, Gamma: list[np.ndarray],
                 mats: list[np.ndarray], N_k: float) -> float:
    """sum log(1+rho) - sum rho + sum (1+rho_k) C_k, in nats."""
    total = float(np.sum(np.log1p(rho)) - np.sum(rho))
    for k, M in enumerate(mats):
        Z = M.conj().T @ V
        den = float(np.sum(np.abs(Z) ** 2) + N_k)
        g = Gamma[k]
        C_k = 2.0 * float(np.real(g.conj() @ Z[:, k])) \
            - den * float(np.real(g.conj() @ g))
        total += (1.0 + rho[k]) * C_k
    return total


def al_objective(dma: DmaState, W: np.ndarray, V: np.ndarray, rho: np.ndarray,
                 Gamma: list[np.ndarray], Xi: np.ndarray, beta: float,
                 mats: list[np.ndarray], N_k: float) -> float:
    """Augmented-Lagrangian objective: FP part minus the penalty term."""
    pen = float(np.linalg.norm(dma.HQ @ W - V + beta * Xi) ** 2)
    return fp_objective(V, rho, Gamma, mats, N_k) - pen / (2.0 * beta)


def power_constrained_solve(Psi: np.ndarray, Phi: np.ndarray, P_max: float,
                            rel_tol: float = 1e-9):
    """argmin_V tr(V^H Psi V) - 2 Re tr(V^H Phi) s.t. ||V||_F^2 <= P_max.

    Solved by KKT with a single multiplier (one sum-power constraint): if the
    unconstrained solution fits, lambda = 0; otherwise bisect on the monotone
    slackness function g(lam) = sum_i X_ii/(lam_i+lam)^2 - P_max in the
    eigenbasis of Psi. Returns (V, lam, flags).
    """
    flags = []
    lam_e, Ud = np.linalg.eigh(hermitize(Psi))
    floor = 1e-14 * max(float(lam_e.max()), 0.0) + 1e-300
    if lam_e.min() < floor:
        lam_e = np.maximum(lam_e, floor)
        flags.append("power-solve-ridge")
    X = Ud.conj().T @ Phi
    V0 = Ud @ (X / lam_e[:, None])
    if float(np.linalg.norm(V0) ** 2) <= P_max:
        return V0, 0.0, flags

    Xd = np.sum(np.abs(X) ** 2, axis=1)

    def g(lam):
        return float(np.sum(Xd / (lam_e + lam) ** 2) - P_max)

    if g(0.0) <= 0.0:
        raise SolverError("bisection bracket failure: g(0) <= 0 on the "
                          "over-power branch")
    hi = math.sqrt(float(Xd.sum()) / P_max)
    while g(hi) >= 0.0:
        hi *= 2.0
    lo = 0.0
    lam = hi
    for _ in range(500):
        lam = 0.5 * (lo + hi)
        val = g(lam)
        if abs(val) < rel_tol * P_max:
            break
        if val > 0.0:
            lo = lam
        else:
            hi = lam
    V = Ud @ (X / (lam_e + lam)[:, None])
    return V, lam, flags


def update_V(dma: DmaState, W: np.ndarray, rho: np.ndarray,
             Gamma: list[np.ndarray], Xi: np.ndarray, beta: float,
             mats: list[np.ndarray], P_max: float):
    """Exact block update of V under the sum-power constraint."""
    N = dma.N
    Omega = np.zeros((N, N), dtype=complex)
    for k, M in enumerate(mats):
        g = Gamma[k]
        Omega += (1.0 + rho[k]) * float(np.real(g.conj() @ g)) * (M @ M.conj().T)
    Psi = Omega + np.eye(N) / (2.0 * beta)
    HQW = dma.HQ @ W
    Phi = np.stack(
        [(1.0 + rho[k]) * (mats[k] @ Gamma[k])
         + (HQW[:, k] + beta * Xi[:, k]) / (2.0 * beta)
         for k in range(len(mats))], axis=1)
    return power_constrained_solve(Psi, Phi, P_max)


def update_W(dma: DmaState, V: np.ndarray, Xi: np.ndarray, beta: float):
    """Least-squares fit HQ W ~= V - beta*Xi."""
    HQ = dma.HQ
    M = V - beta * Xi
    A = HQ.conj().T @ HQ
    W, ridged = psd_solve(A, HQ.conj().T @ M)
    return W, (["update-W-ridge"] if ridged else [])


def assemble_downlink_quadratic(dma: DmaState, W: np.ndarray, V: np.ndarray,
                                Xi: np.ndarray, beta: float
                                ) -> tuple[QuadraticProblem, float]:
    """Penalty term as a diagonal quadratic in q (plus the constant ||M||^2)."""
    HtW = dma.H_tilde @ W
    d2 = np.sum(np.abs(HtW) ** 2, axis=1)
    M = V - beta * Xi
    c2 = np.einsum("nl,nl->n", M @ W.conj().T, dma.H_tilde.conj())
    const = float(np.linalg.norm(M) ** 2)
    return QuadraticProblem(D=np.diag(d2.astype(complex)), c=c2, tag=dma.tag), const


def _solve_q(prob: QuadraticProblem, q: np.ndarray, sc: Scenario, flags: list):
    if sc.constraint == "UC":
        res = uc_solve(prob)
        for f in res.flags:
            if f not in flags:
                flags.append(f)
        return res.q
    return ewr_solve(prob, q, tol=sc.ewr_tol, max_sweeps=sc.ewr_max_sweeps)


@dataclass
class PddResult:
    dma: DmaState
    W: np.ndarray
    rate_trace_bits: list
    h_trace: list
    beta_trace: list
    inner_counts: list
    outer_iters: int
    converged: bool
    rate_bits: float = 0.0
    min_block_delta: float = float("inf")
    kkt_records: list = field(default_factory=list)   # (lambda, power slack)
    branch_log: list = field(default_factory=list)    # (h, eta, "dual"|"shrink")
    flags: list = field(default_factory=list)


def _pdd_initial_state(mats, sc, model, q0):
    rngi = rng_stream(sc.seed, 0, kind="init")
    q = initial_weights(sc, rngi) if q0 is None else np.asarray(q0, complex)
    dma = assemble_views(q, model, sc)
    K = len(mats)
    m = mats[0].shape[1]
    ghat = np.ones(m) / math.sqrt(m)
    V = np.stack([np.conj(model.h) * (mats[k] @ ghat) for k in range(K)], axis=1)
    nrm = float(np.linalg.norm(V) ** 2)
    if nrm > 0:
        V *= math.sqrt(sc.P_max / nrm)
    Xi = np.zeros((dma.N, K), dtype=complex)
    W, _ = update_W(dma, V, Xi, sc.pdd_beta0)
    rho, Gamma = fp_auxiliaries(V, mats, sc.N_k)
    return dma, W, V, rho, Gamma, Xi


def pdd_run(mats: list[np.ndarray], sc: Scenario, model: MicrostripModel,
            q0: np.ndarray | None = None) -> PddResult:
    """Penalty double loop for the downlink surrogate rate.

    Initialization (seeded, any feasible start is acceptable): q0 with i.i.d.
    uniform phases, V0 columns H^H Gt_k ghat with ghat the normalized all-ones
    direction scaled to the power budget, W0 its least-squares fit, Xi0 = 0.
    The inner loop cycles the five block updates until the AL objective
    stalls; the outer loop updates the dual when h < eta and otherwise shrinks
    the penalty, terminating at h < pdd_eps. The returned W is rescaled by
    min(1, sqrt(P_max/tr((HQW)^H HQW))) so the original constraint holds.
    """
    if sc.P_max is None:
        raise ValueError("P_max is unset; the downlink solver needs a budget")
    dma, W, V, rho, Gamma, Xi = _pdd_initial_state(mats, sc, model, q0)
    beta = sc.pdd_beta0
    eta = 1.0
    res = PddResult(dma=dma, W=W, rate_trace_bits=[], h_trace=[],
                    beta_trace=[], inner_counts=[], outer_iters=0,
                    converged=False)
    best = None  # (h, dma, W, V)

    for outer in range(1, sc.pdd_outer_iters + 1):
        F_last = al_objective(dma, W, V, rho, Gamma, Xi, beta, mats, sc.N_k)
        inner_count = sc.pdd_inner_iters
        for inner in range(1, sc.pdd_inner_iters + 1):
            F_iter_start = F_last
            rho, Gamma = fp_auxiliaries(V, mats, sc.N_k)
            F_last = _track_block(res, dma, W, V, rho, Gamma, Xi,
                                  beta, mats, sc.N_k, F_last)
            V, lam, vflags = update_V(dma, W, rho, Gamma, Xi, beta, mats,
                                      sc.P_max)
            for f in vflags:
                if f not in res.flags:
                    res.flags.append(f)
            if lam > 0.0:
                slack = abs(float(np.linalg.norm(V) ** 2) - sc.P_max)
                res.kkt_records.append((lam, slack))
            F_last = _track_block(res, dma, W, V, rho, Gamma, Xi, beta, mats,
                                  sc.N_k, F_last)
            W, wflags = update_W(dma, V, Xi, beta)
            for f in wflags:
                if f not in res.flags:
                    res.flags.append(f)
            F_last = _track_block(res, dma, W, V, rho, Gamma, Xi, beta, mats,
                                  sc.N_k, F_last)
            prob, _ = assemble_downlink_quadratic(dma, W, V, Xi, beta)
            q = _solve_q(prob, dma.q, sc, res.flags)
            dma = assemble_views(q, model, sc)
            F_last = _track_block(res, dma, W, V, rho, Gamma, Xi, beta, mats,
                                  sc.N_k, F_last)
            if abs(F_last - F_iter_start) <= sc.pdd_inner_tol * max(1.0, abs(F_iter_start)):
                inner_count = inner
                break

        h = float(np.linalg.norm(dma.HQ @ W - V) ** 2)
        res.inner_counts.append(inner_count)
        res.h_trace.append(h)
        res.beta_trace.append(beta)
        res.rate_trace_bits.append(
            nats_to_bits(downlink_rate_nats(dma, mats, W, sc.N_k)))
        res.outer_iters = outer
        if best is None or h < best[0]:
            best = (h, dma, W, V)
        if h < eta:
            Xi = (dma.HQ @ W - V) / beta + Xi
            res.branch_log.append((h, eta, "dual"))
        else:
            beta = sc.pdd_c1 * beta
            res.branch_log.append((h, eta, "shrink"))
        eta = sc.pdd_c2 * h
        if h < sc.pdd_eps:
            res.converged = True
            break

    if not res.converged:
        res.flags.append("pdd-max-outer")
        _, dma, W, V = best
    res.dma = dma
    tr = float(np.linalg.norm(dma.HQ @ W) ** 2)
    if tr > sc.P_max:
        W = W * math.sqrt(sc.P_max / tr)
    res.W = W
    res.rate_bits = nats_to_bits(downlink_rate_nats(dma, mats, W, sc.N_k))
    return res


def _track_block(res, dma, W, V, rho, Gamma, Xi, beta, mats, N_k, F_prev):
    F = al_objective(dma, W, V, rho, Gamma, Xi, beta, mats, N_k)
    delta = (F - F_prev) / max(1.0, abs(F_prev))
    if delta < res.min_block_delta:
        res.min_block_delta = delta
    return F


@dataclass
class RelaxedAoResult:
    dma: DmaState
    W: np.ndarray
    rate_trace_bits: list
    iterations: int
    converged: bool
    rate_bits: float = 0.0
    flags: list = field(default_factory=list)


def relaxed_ao_run(mats: list[np.ndarray], sc: Scenario,
                   model: MicrostripModel,
                   q0: np.ndarray | None = None) -> RelaxedAoResult:
    """Baseline alternating optimization with the power constraint relaxed.

    The budget is imposed on sum_k ||w_k||^2 during the iterations (dropping
    H and Q), and W is rescaled afterwards so tr((HQW)^H HQW) = P_max holds
    with equality. Under the unconstrained weight set the pair (q, W) has a
    scale degeneracy that the relaxed budget does not pin down, so q is
    renormalized to ||q||^2 = N/2 after each update with the scale moved into
    W; this leaves HQW (and the objective) unchanged. The rate trace reports
    each iterate after the exact power rescale so entries are comparable to
    the final value.
    """
    if sc.P_max is None:
        raise ValueError("P_max is unset; the downlink solver needs a budget")
    rngi = rng_stream(sc.seed, 0, kind="init")
    q = initial_weights(sc, rngi) if q0 is None else np.asarray(q0, complex)
    dma = assemble_views(q, model, sc)
    K = len(mats)
    m = mats[0].shape[1]
    ghat = np.ones(m) / math.sqrt(m)
    W = np.stack([dma.HQ.conj().T @ (mats[k] @ ghat) for k in range(K)], axis=1)
    nrm = float(np.linalg.norm(W) ** 2)
    if nrm > 0:
        W *= math.sqrt(sc.P_max / nrm)

    flags: list = []
    trace: list = []
    F_prev = None
    converged = False
    iterations = 0
    for iterations in range(1, sc.pdd_outer_iters + 1):
        HQW = dma.HQ @ W
        rho, Gamma = fp_auxiliaries(HQW, mats, sc.N_k)

        HQ = dma.HQ
        Omega = np.zeros((dma.N, dma.N), dtype=complex)
        for k, M in enumerate(mats):
            g = Gamma[k]
            Omega += (1.0 + rho[k]) * float(np.real(g.conj() @ g)) * (M @ M.conj().T)
        Omega_w = HQ.conj().T @ Omega @ HQ
        Phi_w = np.stack([(1.0 + rho[k]) * (HQ.conj().T @ (mats[k] @ Gamma[k]))
                          for k in range(K)], axis=1)
        W, _, pflags = power_constrained_solve(Omega_w, Phi_w, sc.P_max)
        for f in pflags:
            if f not in flags:
                flags.append(f)

        if sc.constraint == "UC" and K == 1:
            # Unconstrained weights make v = q * (Ht w) range over all of C^N,
            # and the exact FP argmax over a free v is colinear with the
            # current iterate, so the plain stationary-point solve never
            # rotates the beam. Redirect v inside a ball of the current
            # effective power instead (same multiplier machinery) and pull
            # the exact q = v / (Ht w) back.
            rho, Gamma = fp_auxiliaries(dma.HQ @ W, mats, sc.N_k)
            Omega_v = (1.0 + rho[0]) * float(np.real(Gamma[0].conj() @ Gamma[0])) \
                * (mats[0] @ mats[0].conj().T)
            Phi_v = (1.0 + rho[0]) * (mats[0] @ Gamma[0])[:, None]
            v_cur = dma.HQ @ W
            p_eff = float(np.linalg.norm(v_cur) ** 2)
            v_new, _, pflags = power_constrained_solve(Omega_v, Phi_v, p_eff)
            for f in pflags:
                if f not in flags:
                    flags.append(f)
            t = dma.H_tilde @ W[:, 0]
            q = dma.q.copy()
            ok = np.abs(t) > 1e-300
            q[ok] = v_new[ok, 0] / t[ok]
        else:
            HtW = dma.H_tilde @ W
            T = HtW @ HtW.conj().T
            D = Omega * T.T
            c = np.zeros(dma.N, dtype=complex)
            for k, M in enumerate(mats):
                c += (1.0 + rho[k]) * (M @ Gamma[k]) * np.conj(HtW[:, k])
            prob = QuadraticProblem(D=D, c=c, tag=dma.tag)
            q = _solve_q(prob, dma.q, sc, flags)
        if sc.constraint == "UC":
            scale = float(np.linalg.norm(q)) / math.sqrt(dma.N / 2.0)
            if scale > 0:
                q = q / scale
                W = W * scale
        dma = assemble_views(q, model, sc)

        F = fp_objective(dma.HQ @ W, rho, Gamma, mats, sc.N_k)
        eff = float(np.linalg.norm(dma.HQ @ W) ** 2)
        W_eq = W * math.sqrt(sc.P_max / eff) if eff > 0 else W
        trace.append(nats_to_bits(downlink_rate_nats(dma, mats, W_eq, sc.N_k)))
        if F_prev is not None and abs(F - F_prev) <= 1e-4 * max(1.0, abs(F_prev)):
            converged = True
            break
        F_prev = F

    if not converged:
        flags.append("relaxed-ao-max-iters")
    tr = float(np.linalg.norm(dma.HQ @ W) ** 2)
    if tr > 0:
        W = W * math.sqrt(sc.P_max / tr)
    rate = nats_to_bits(downlink_rate_nats(dma, mats, W, sc.N_k))
    return RelaxedAoResult(dma=dma, W=W, rate_trace_bits=trace,
                           iterations=iterations, converged=converged,
                           rate_bits=rate, flags=flags)
