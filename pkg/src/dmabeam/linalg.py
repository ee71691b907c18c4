"""Small Hermitian linear-algebra helpers shared by the solvers."""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


def nats_to_bits(x: float) -> float:
    return x / LN2


def hermitize(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2.0


def herm_logdet(M: np.ndarray) -> float:
    """log det of a Hermitian positive definite matrix.

    The input is symmetrized first; asymmetry beyond 1e-8 (relative) is an
    error rather than silently averaged away.
    """
    scale = max(1.0, float(np.abs(M).max()))
    asym = float(np.abs(M - M.conj().T).max())
    if asym > 1e-8 * scale:
        raise ValueError(f"matrix is not Hermitian: asymmetry {asym:.3e}")
    sign, ld = np.linalg.slogdet(hermitize(M))
    if sign.real <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(ld)


def psd_solve(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve A X = B for Hermitian PSD A, ridging when A is singular.

    Returns (X, ridged). The ridge is 1e-12 * tr(A)/n, matching the guard used
    everywhere a noise-covariance-like matrix is inverted.
    """
    A = hermitize(A)
    n = A.shape[0]
    try:
        np.linalg.cholesky(A)
        return np.linalg.solve(A, B), False
    except np.linalg.LinAlgError:
        eps = 1e-12 * float(np.trace(A).real) / n
        if eps <= 0:
            eps = 1e-12
        return np.linalg.solve(A + eps * np.eye(n), B), True
