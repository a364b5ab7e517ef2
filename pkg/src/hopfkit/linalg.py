"""Weighted smallest singular values and a deterministic ordered fan-out.

For a square operator ``B`` between spaces with Gram matrices ``Wx`` (domain)
and ``Wy`` (codomain) the weighted singular values are the square roots of the
generalized eigenvalues of the pencil ``(Bᴴ Wy B, Wx)``.  Small systems use a
dense Cholesky reduction; large sparse systems use shift-invert Lanczos with the
inverse applied through a sparse LU of ``B``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 800
SINGULAR_TOL = 1e-13


def thread_count() -> int:
    """Worker cap from ``HOPFKIT_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get("HOPFKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn, items):
    """``list(map(fn, items))``, fanned out over threads when allowed; order is preserved."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _as_gram(w, n):
    if w is None:
        return sp.identity(n, format="csc")
    if sp.issparse(w):
        return sp.csc_matrix(w)
    w = np.asarray(w)
    if w.ndim == 1:
        return sp.diags(w, format="csc")
    return sp.csc_matrix(w)


def _dense_values(B, wy, wx, k):
    B = B.toarray() if sp.issparse(B) else np.asarray(B)
    n = B.shape[0]
    gx = _as_gram(wx, n).toarray()
    gy = _as_gram(wy, n).toarray()
    rx = sla.cholesky(gx, lower=False)
    ry = sla.cholesky(gy, lower=False)
    core = ry @ sla.solve_triangular(rx.T, B.T, lower=True).T
    s = sla.svdvals(core)
    return np.sort(s)[:k]


def _sparse_values(B, wy, wx, k):
    B = sp.csc_matrix(B)
    n = B.shape[0]
    dtype = np.result_type(B.dtype, float)
    gx = _as_gram(wx, n).astype(dtype)
    gy = _as_gram(wy, n).astype(dtype)
    try:
        lu = spla.splu(B.astype(dtype))
    except RuntimeError:
        return np.zeros(k)
    d = np.abs(lu.U.diagonal())
    if d.min() <= SINGULAR_TOL * d.max():
        return np.zeros(k)
    gy_lu = spla.splu(gy)
    G = spla.LinearOperator((n, n), matvec=lambda x: B.conj().T @ (gy @ (B @ x)), dtype=dtype)

    def inv(x):
        y = lu.solve(np.asarray(x, dtype=dtype), trans="H")
        return lu.solve(gy_lu.solve(y))

    Ginv = spla.LinearOperator((n, n), matvec=inv, dtype=dtype)
    v0 = np.ones(n, dtype=dtype)
    # a generous Krylov space matters: the smallest values are often clustered
    ncv = min(n - 1, max(40, 2 * k + 1))
    vals = spla.eigsh(G, k=k, M=gx, sigma=0.0, OPinv=Ginv, which="LM", v0=v0, ncv=ncv,
                      return_eigenvectors=False, tol=1e-12)
    return np.sort(np.sqrt(np.maximum(vals.real, 0.0)))


def smallest_singular_values(B, wy=None, wx=None, k: int = 1) -> np.ndarray:
    """The ``k`` smallest singular values of ``B: (ℂⁿ, Wx) → (ℂⁿ, Wy)``.

    Parameters
    ----------
    B : ndarray or sparse matrix, shape (n, n)
    wy, wx : None, 1-D weights, or Hermitian positive definite matrices
        Codomain and domain Gram matrices; ``None`` means Euclidean.
    k : int
        Number of values, returned in ascending order.

    An exactly singular sparse ``B`` returns zeros (the shift-invert
    factorization does not exist).
    """
    n = B.shape[0]
    if n <= DENSE_LIMIT or k >= n - 1:
        return _dense_values(B, wy, wx, k)
    return _sparse_values(B, wy, wx, k)
