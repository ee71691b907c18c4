"""Element-wise refinement for q^H D q - 2 Re(q^H c) over per-element sets.

D is Hermitian with real nonnegative diagonal (a Hadamard product of PSD
factors in every producer), so coordinate descent with the closed-form
per-element minimizers decreases the objective monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dma import AO_INTERVAL, BA_VALUES, infeasible_indices, lorentzian

_DEFAULT_TOL = 1e-6
_DEFAULT_MAX_SWEEPS = 100


@dataclass
class QuadraticProblem:
    D: np.ndarray
    c: np.ndarray
    tag: str

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=complex)
        self.c = np.asarray(self.c, dtype=complex)
        n = self.c.shape[0]
        if self.D.shape != (n, n):
            raise ValueError(f"D shape {self.D.shape} != ({n}, {n})")
        scale = max(1.0, float(np.abs(self.D).max()))
        herm = float(np.abs(self.D - self.D.conj().T).max())
        if herm > 1e-10 * scale:
            raise ValueError(f"D is not Hermitian: max asymmetry {herm:.3e}")
        diag = np.diagonal(self.D)
        dscale = max(1.0, float(np.abs(diag).max()))
        if np.abs(diag.imag).max() > 1e-12 * dscale:
            raise ValueError("diag(D) must be real")
        if diag.real.min() < -1e-12 * dscale:
            raise ValueError(f"diag(D) must be nonnegative, min {diag.real.min():.3e}")

    @property
    def n(self) -> int:
        return self.c.shape[0]


def quad_objective(p: QuadraticProblem, q: np.ndarray) -> float:
    """Exact objective value q^H D q - 2 Re(q^H c)."""
    q = np.asarray(q, dtype=complex)
    quad = complex(q.conj() @ (p.D @ q))
    scale = max(1.0, abs(quad))
    assert abs(quad.imag) < 1e-9 * scale, \
        f"imaginary residue {quad.imag:.3e} in Hermitian form"
    return quad.real - 2.0 * float(np.real(q.conj() @ p.c))


def _eta(p: QuadraticProblem, q: np.ndarray, n: int) -> complex:
    cross = complex(p.D[n] @ q) - p.D[n, n] * q[n]
    return p.c[n] - cross - 0.5j * p.D[n, n]


def _scalar_quad_min(d_nn: float, lin: float, lo: float, hi: float) -> float:
    # minimize d_nn*x^2 - 2*lin*x over [lo, hi]
    if d_nn > 0.0:
        return min(max(lin / d_nn, lo), hi)
    return hi if lin > 0.0 else lo


def ewr_step(p: QuadraticProblem, q: np.ndarray, n: int) -> complex:
    """Optimal single coordinate q_n with the other entries held fixed."""
    if p.tag == "LP":
        eta = _eta(p, q, n)
        if eta == 0:  # objective flat in theta_n
            return q[n]
        return complex(lorentzian(np.angle(eta)))
    cross = complex(p.D[n] @ q) - p.D[n, n] * q[n]
    eta_t = p.c[n] - cross
    d_nn = float(p.D[n, n].real)
    if p.tag == "AO":
        return complex(_scalar_quad_min(d_nn, eta_t.real, *AO_INTERVAL))
    if p.tag == "BA":
        vals = [d_nn * x * x - 2.0 * eta_t.real * x for x in BA_VALUES]
        return complex(BA_VALUES[0] if vals[0] <= vals[1] else BA_VALUES[1])
    raise ValueError(f"ewr_step does not handle tag {p.tag!r} (use uc_solve)")


def ewr_solve(p: QuadraticProblem, q0: np.ndarray, tol: float | None = None,
              max_sweeps: int | None = None) -> np.ndarray:
    """Coordinate descent over n = 1..N until the per-sweep decrease is small.

    The start must be feasible; every intermediate iterate stays exactly
    feasible and the objective never increases.
    """
    if p.tag == "UC":
        raise ValueError("unconstrained problems are solved by uc_solve")
    tol = _DEFAULT_TOL if tol is None else tol
    max_sweeps = _DEFAULT_MAX_SWEEPS if max_sweeps is None else max_sweeps
    q = np.asarray(q0, dtype=complex).copy()
    bad = infeasible_indices(q, p.tag)
    if bad.size:
        raise ValueError(f"infeasible start at indices {bad.tolist()}")

    obj = quad_objective(p, q)
    Dq = p.D @ q
    for _ in range(max_sweeps):
        for n in range(p.n):
            if p.tag == "LP":
                eta = p.c[n] - (Dq[n] - p.D[n, n] * q[n]) - 0.5j * p.D[n, n]
                if eta == 0:
                    continue
                q_new = complex(lorentzian(np.angle(eta)))
            else:
                eta_t = p.c[n] - (Dq[n] - p.D[n, n] * q[n])
                d_nn = float(p.D[n, n].real)
                if p.tag == "AO":
                    q_new = complex(_scalar_quad_min(d_nn, eta_t.real, *AO_INTERVAL))
                else:
                    vals = [d_nn * x * x - 2.0 * eta_t.real * x for x in BA_VALUES]
                    q_new = complex(BA_VALUES[0] if vals[0] <= vals[1]
                                    else BA_VALUES[1])
            if q_new != q[n]:
                Dq += p.D[:, n] * (q_new - q[n])
                q[n] = q_new
        new_obj = quad_objective(p, q)
        decrease = obj - new_obj
        assert decrease >= -1e-9 * max(1.0, abs(obj)), \
            f"objective increased by {-decrease:.3e} within a sweep"
        obj_prev, obj = obj, new_obj
        if decrease <= tol * max(1.0, abs(obj_prev)):
            break
        Dq = p.D @ q  # refresh the running product; drift accumulates otherwise
    return q


@dataclass
class UcResult:
    q: np.ndarray
    indefinite: bool = False
    ridged: bool = False
    flags: list = field(default_factory=list)


def uc_solve(p: QuadraticProblem) -> UcResult:
    """Stationary point D q = c of the unconstrained problem.

    Globally optimal for PSD D; an indefinite D is flagged but still solved.
    A tiny ridge is added when D is singular to working precision.
    """
    flags = []
    ridged = False
    D = p.D
    try:
        q = np.linalg.solve(D, p.c)
    except np.linalg.LinAlgError:
        q = None
    c_norm = float(np.linalg.norm(p.c))
    if q is None or (c_norm > 0 and
                     np.linalg.norm(D @ q - p.c) > 1e-8 * c_norm):
        eps = 1e-12 * float(np.trace(D).real) / p.n
        if eps <= 0:
            eps = 1e-12
        D = p.D + eps * np.eye(p.n)
        q = np.linalg.solve(D, p.c)
        ridged = True
        flags.append("uc-ridge")
    w = np.linalg.eigvalsh((p.D + p.D.conj().T) / 2.0)
    indefinite = bool(w.min() < -1e-10 * max(1.0, float(w.max())))
    if indefinite:
        flags.append("uc-indefinite")
    return UcResult(q=q, indefinite=indefinite, ridged=ridged, flags=flags)
