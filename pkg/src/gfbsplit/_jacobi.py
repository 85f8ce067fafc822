"""One-sided Jacobi singular value decomposition kernel.

Cyclic sweeps of plane rotations orthogonalize the columns of the
working matrix; singular values are the final column norms.  The sweep
loop is JIT-compiled, which keeps the decomposition fast enough to sit
inside iterative solvers at desk scale (matrices up to a few hundred
rows/columns).
"""

from __future__ import annotations

import numpy as np
from numba import njit

#: Relative off-diagonal threshold below which a column pair counts as
#: orthogonal.
SWEEP_TOL = 1e-14

#: Hard cap on the number of full sweeps.
MAX_SWEEPS = 60


@njit(cache=True)
def _sweep_columns(a, v, tol, max_sweeps, tiny):
    """Rotate column pairs of ``a`` (and ``v``) until orthogonal.

    Columns whose norm falls below ``tiny`` (roundoff level for the
    input) are deflated: they carry no significant mass, so chasing
    their relative couplings would never terminate on rank-deficient
    input.  Returns the number of sweeps used, or ``max_sweeps + 1``
    when the tolerance was not reached.
    """
    m, n = a.shape
    tiny2 = tiny * tiny
    for sweep in range(max_sweeps):
        worst = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for i in range(m):
                    app += a[i, p] * a[i, p]
                    aqq += a[i, q] * a[i, q]
                    apq += a[i, p] * a[i, q]
                if app <= tiny2 or aqq <= tiny2:
                    continue
                denom = np.sqrt(app) * np.sqrt(aqq)
                if denom == 0.0:
                    continue
                rel = abs(apq) / denom
                if rel > worst:
                    worst = rel
                if rel <= tol:
                    continue
                # Rotation annihilating the (p, q) entry of the Gram matrix.
                zeta = (aqq - app) / (2.0 * apq)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for i in range(m):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
        if worst <= tol:
            return sweep + 1
    return max_sweeps + 1


def _complete_orthonormal(u: np.ndarray) -> None:
    """Fill all-zero columns of ``u`` with unit vectors orthogonal to the rest."""
    m = u.shape[0]
    for j in range(u.shape[1]):
        if np.any(u[:, j] != 0.0):
            continue
        for basis in range(m):
            cand = np.zeros(m)
            cand[basis] = 1.0
            cand -= u @ (u.T @ cand)
            cand -= u @ (u.T @ cand)  # second pass for numerical orthogonality
            nc = np.linalg.norm(cand)
            if nc > 0.5:
                u[:, j] = cand / nc
                break
        else:
            raise ValueError("could not complete an orthonormal basis")


def jacobi_svd(mat: np.ndarray, tol: float = SWEEP_TOL, max_sweeps: int = MAX_SWEEPS):
    """Thin SVD ``mat = U @ diag(s) @ V.T`` by one-sided Jacobi rotations.

    Parameters
    ----------
    mat : (m, n) array
        Real matrix with finite entries.
    tol : float
        Relative off-diagonal mass threshold per column pair.
    max_sweeps : int
        Maximum number of cyclic sweeps.

    Returns
    -------
    u : (m, k) array, s : (k,) array, v : (n, k) array
        With ``k = min(m, n)``, singular values sorted descending, the
        factors column-orthonormal, and the first nonzero entry of each
        column of ``u`` nonnegative.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix contains non-finite entries")
    transposed = mat.shape[0] < mat.shape[1]
    a = np.array(mat.T if transposed else mat, order="C", copy=True)
    m, n = a.shape
    if n == 0 or m == 0:
        k = 0
        u = np.zeros((m, k))
        v = np.zeros((n, k))
        s = np.zeros(k)
        return (v, s, u) if transposed else (u, s, v)
    v = np.eye(n)
    # Column norms at or below roundoff for this matrix are numerically
    # zero: deflated during the sweeps and zeroed afterwards.
    cutoff = max(m, n) * np.finfo(np.float64).eps * float(np.linalg.norm(a))
    sweeps = _sweep_columns(a, v, float(tol), int(max_sweeps), cutoff)
    if sweeps > max_sweeps:
        raise ValueError(f"jacobi svd did not converge within {max_sweeps} sweeps")

    s = np.sqrt(np.sum(a * a, axis=0))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros((m, n))
    for j in range(n):
        if s[j] > cutoff:
            u[:, j] = a[:, j] / s[j]
        else:
            s[j] = 0.0
    _complete_orthonormal(u)

    # Deterministic sign convention.
    for j in range(n):
        nz = np.flatnonzero(u[:, j])
        if nz.size and u[nz[0], j] < 0.0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]

    if transposed:
        return v, s, u
    return u, s, v
