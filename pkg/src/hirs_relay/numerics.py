"""Dense complex linear algebra used by both optimizers.

Thin, checked wrappers around numpy/scipy LAPACK routines.  Every spectral
routine goes through a Hermitian solver; nothing here calls a general
nonsymmetric eigensolver.
"""

import numpy as np
import scipy.linalg as sla

MAX_ENTRIES = 10_000_000
PD_EPS = 1e-12


class NotHermitianError(ValueError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def is_hermitian(X, rtol=1e-10):
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        return False
    scale = np.linalg.norm(X)
    return np.linalg.norm(X - X.conj().T) <= rtol * max(scale, np.finfo(float).tiny)


def hermitian_part(X):
    return 0.5 * (X + X.conj().T)


def _require_hermitian(X, name="X"):
    X = np.asarray(X)
    if not is_hermitian(X):
        raise NotHermitianError(f"{name} is not Hermitian")
    return hermitian_part(X)


def vec(X):
    """Column-stacking vectorisation, so that vec(A X B) = (B^T kron A) vec(X)."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("vec expects a matrix")
    return X.reshape(-1, order="F")


def unvec(x, rows, cols=None):
    cols = rows if cols is None else cols
    return np.asarray(x).reshape((rows, cols), order="F")


def kron(X, Y):
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    if X.size * Y.size > MAX_ENTRIES:
        raise ValueError(f"Kronecker product would have {X.size * Y.size} entries (limit {MAX_ENTRIES})")
    return np.kron(X, Y)


def hadamard(X, Y):
    X, Y = np.asarray(X), np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    return X * Y


def eig_hermitian(X):
    """Eigenvalues (ascending, real) and unitary eigenvectors of a Hermitian matrix."""
    X = _require_hermitian(X)
    return np.linalg.eigh(X)


def inv_sqrt_hermitian(X, eps=PD_EPS):
    """``X^{-1/2} = Q diag(lambda^{-1/2}) Q^H`` for Hermitian positive definite ``X``.

    ``eps`` is relative to the largest eigenvalue, so the check is unit free.
    """
    lam, Q = eig_hermitian(X)
    if lam[0] <= eps * max(lam[-1], 0.0) or lam[0] <= 0:
        raise NotPositiveDefiniteError(f"smallest eigenvalue {lam[0]:.3e} is not positive")
    return (Q * lam ** -0.5) @ Q.conj().T


def _phase_normalise(v):
    """Fix the global phase: the largest-modulus entry becomes real positive."""
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        return v
    return v * (abs(v[k]) / v[k])


def generalized_eig_max(H1, H2):
    """Dominant eigenpair of ``H2^{-1} H1`` through a Cholesky reduction.

    Returns ``(lam, v)`` with ``||v|| = 1``; ``v`` maximises the generalised
    Rayleigh quotient ``v^H H1 v / v^H H2 v``.
    """
    H1 = _require_hermitian(H1, "H1")
    H2 = _require_hermitian(H2, "H2")
    try:
        L = np.linalg.cholesky(H2)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("H2 is not positive definite") from exc
    Y = sla.solve_triangular(L, H1, lower=True)
    Z = sla.solve_triangular(L, Y.conj().T, lower=True)
    lam, W = np.linalg.eigh(hermitian_part(Z))
    v = sla.solve_triangular(L.conj().T, W[:, -1], lower=False)
    v = _phase_normalise(v / np.linalg.norm(v))
    return float(lam[-1]), v


def rayleigh_quotient(v, H1, H2):
    return float(np.real(v.conj() @ H1 @ v) / np.real(v.conj() @ H2 @ v))


def quad_form(X, v):
    """Real part of ``v^H X v``."""
    return float(np.real(np.conj(v) @ X @ v))
