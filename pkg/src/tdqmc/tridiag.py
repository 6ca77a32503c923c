"""Batched Thomas solver for tridiagonal systems.

Systems are laid out with the equation index leading: `diag` and `rhs`
have shape (n,) or (n, batch), so each elimination row is a contiguous
slice. Off-diagonals are scalars or per-row arrays shared across the
batch, which covers every Crank-Nicolson and ADI system in the package
(constant kinetic coupling, potential only on the diagonal).
"""

from __future__ import annotations

import numpy as np

__all__ = ["thomas_solve"]


def thomas_solve(sub, diag, sup, rhs):
    """Solve the tridiagonal systems A x = rhs without pivoting.

    Parameters
    ----------
    sub : scalar or (n-1,) array
        Subdiagonal; sub[j-1] multiplies x[j-1] in row j.
    diag : (n,) or (n, batch) array
        Main diagonal, may vary across the batch.
    sup : scalar or (n-1,) array
        Superdiagonal; sup[j] multiplies x[j+1] in row j.
    rhs : (n,) or (n, batch) array
        Right-hand sides.

    Returns
    -------
    x : array with the broadcast shape of diag and rhs

    Notes
    -----
    No pivoting: callers supply diagonally dominant systems (Cayley
    factors of Hermitian operators). Non-finite output is the caller's
    divergence signal.
    """
    diag = np.asarray(diag)
    rhs = np.asarray(rhs)
    n = diag.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"rhs rows {rhs.shape[0]} != diag rows {n}")
    if n == 1:
        return rhs / diag
    if diag.ndim == 1 and rhs.ndim == 2:
        diag = diag[:, None]
    sub = np.broadcast_to(np.asarray(sub), (n - 1,))
    sup = np.broadcast_to(np.asarray(sup), (n - 1,))

    out_shape = np.broadcast_shapes(diag.shape, rhs.shape)
    dtype = np.result_type(diag, rhs, sub, sup)
    cp = np.empty(out_shape, dtype=dtype)
    x = np.empty(out_shape, dtype=dtype)

    # forward elimination
    cp[0] = sup[0] / diag[0]
    x[0] = rhs[0] / diag[0]
    for j in range(1, n):
        m = diag[j] - sub[j - 1] * cp[j - 1]
        if j < n - 1:
            cp[j] = sup[j] / m
        x[j] = (rhs[j] - sub[j - 1] * x[j - 1]) / m

    # back substitution
    for j in range(n - 2, -1, -1):
        x[j] -= cp[j] * x[j + 1]
    return x
