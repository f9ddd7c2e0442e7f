"""Small complex Hermitian linear algebra, batched over leading dimensions.

Every function accepts arrays of shape (..., M, M) and treats the leading
dimensions as a batch (typically frequency bins, or frames x bins).  The
eigensolver is a cyclic complex Jacobi method vectorized across the batch,
which is accurate to machine precision for the M <= 16 matrices used here.
"""

from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, SingularMatrixError

__all__ = [
    "EigenPair",
    "hermitian_evd",
    "generalized_evd",
    "cholesky",
    "invert",
    "regularize",
    "trace_product",
    "hermitize",
    "normalize_phase",
]

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
LOADING = 1e-10
# absolute loading used when a matrix has zero trace (e.g. an all-zero
# noise mask in one bin)
LOADING_FLOOR = 1e-30


class EigenPair(NamedTuple):
    """Eigenvalues (descending, real) and eigenvectors stored as columns."""

    values: np.ndarray
    vectors: np.ndarray


def _as_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"{name} must have shape (..., M, M), got {a.shape}")
    return a.astype(complex, copy=False)


def hermitize(a):
    """Return (A + A^H) / 2 with an exactly real diagonal."""
    a = _as_square(a)
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    idx = np.arange(a.shape[-1])
    h[..., idx, idx] = h[..., idx, idx].real
    return h


def normalize_phase(vectors):
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties in magnitude resolve to the first (lowest index) entry.
    """
    v = np.asarray(vectors, dtype=complex)
    mag = np.abs(v)
    pick = np.argmax(mag, axis=-2)
    lead = np.take_along_axis(v, pick[..., None, :], axis=-2)
    lead_mag = np.abs(lead)
    phase = np.where(lead_mag > 0, lead / np.where(lead_mag > 0, lead_mag, 1), 1)
    return v / phase


def hermitian_evd(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigendecomposition of Hermitian matrices by cyclic Jacobi rotations.

    Converges when the off-diagonal Frobenius norm of every matrix falls
    below ``tol`` times its full Frobenius norm.  Eigenvalues are returned in
    descending order and eigenvectors are phase-normalized (see
    :func:`normalize_phase`).

    Raises:
        ConvergenceError: if any matrix is not diagonalized after
            ``max_sweeps`` sweeps.
    """
    a = hermitize(a)
    shape = a.shape
    m = shape[-1]
    A = a.reshape(-1, m, m).copy()
    n = A.shape[0]
    V = np.broadcast_to(np.eye(m, dtype=complex), (n, m, m)).copy()
    scale = np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))
    offmask = ~np.eye(m, dtype=bool)

    def off_norm():
        return np.sqrt(np.sum(np.abs(A[:, offmask]) ** 2, axis=-1))

    residual = np.zeros(n)
    for _ in range(max_sweeps + 1):
        off = off_norm()
        residual = np.divide(off, scale, out=np.zeros(n), where=scale > 0)
        active = residual > tol
        if not active.any():
            break
        if _ == max_sweeps:
            raise ConvergenceError(
                f"Jacobi EVD did not converge in {max_sweeps} sweeps "
                f"(residual {residual.max():.3e})",
                residual=float(residual.max()),
            )
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[:, p, q]
                r = np.abs(apq)
                rot = active & (r > 0)
                if not rot.any():
                    continue
                r_safe = np.where(rot, r, 1.0)
                phase = np.where(rot, apq / r_safe, 1.0)
                tau = (A[:, q, q].real - A[:, p, p].real) / (2.0 * r_safe)
                sgn = np.where(tau >= 0, 1.0, -1.0)
                t = np.where(rot, sgn / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # U = D J: D removes the phase of a_pq, J is the real rotation
                u_pp = c
                u_pq = s
                u_qp = -s * np.conj(phase)
                u_qq = c * np.conj(phase)

                col_p = A[:, :, p].copy()
                col_q = A[:, :, q]
                A[:, :, p] = col_p * u_pp[:, None] + col_q * u_qp[:, None]
                A[:, :, q] = col_p * u_pq[:, None] + col_q * u_qq[:, None]
                row_p = A[:, p, :].copy()
                row_q = A[:, q, :]
                A[:, p, :] = np.conj(u_pp)[:, None] * row_p + np.conj(u_qp)[:, None] * row_q
                A[:, q, :] = np.conj(u_pq)[:, None] * row_p + np.conj(u_qq)[:, None] * row_q
                A[rot, p, q] = 0.0
                A[rot, q, p] = 0.0
                A[:, p, p] = A[:, p, p].real
                A[:, q, q] = A[:, q, q].real

                v_p = V[:, :, p].copy()
                v_q = V[:, :, q]
                V[:, :, p] = v_p * u_pp[:, None] + v_q * u_qp[:, None]
                V[:, :, q] = v_p * u_pq[:, None] + v_q * u_qq[:, None]

    values = np.real(np.diagonal(A, axis1=-2, axis2=-1))
    order = np.argsort(-values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    V = normalize_phase(V)
    return EigenPair(values.reshape(shape[:-1]), V.reshape(shape))


def _cholesky_raw(a):
    # returns lower factor and the pivots d_j (squared diagonal before sqrt)
    n, m, _ = a.shape
    L = np.zeros_like(a)
    pivots = np.empty((n, m))
    for j in range(m):
        d = a[:, j, j].real - np.sum(np.abs(L[:, j, :j]) ** 2, axis=-1)
        pivots[:, j] = d
        ljj = np.sqrt(np.where(d > 0, d, 1.0))
        L[:, j, j] = ljj
        if j + 1 < m:
            acc = np.einsum("bik,bk->bi", L[:, j + 1:, :j], np.conj(L[:, j, :j]))
            L[:, j + 1:, j] = (a[:, j + 1:, j] - acc) / ljj[:, None]
    return L, pivots


def loading_level(a):
    """Diagonal loading that :func:`cholesky` adds to a near-singular matrix."""
    a = _as_square(a)
    m = a.shape[-1]
    tr = np.real(np.trace(a, axis1=-2, axis2=-1))
    return np.maximum(LOADING * tr / m, LOADING_FLOOR)


def regularize(a):
    """The matrix :func:`cholesky` actually factorizes.

    Returns ``(A_eff, loaded)`` where ``A_eff = A + delta * I`` for matrices
    whose smallest Cholesky pivot does not exceed ``delta`` (see
    :func:`loading_level`) and ``A`` otherwise.
    """
    a = hermitize(a)
    shape = a.shape
    m = shape[-1]
    A = a.reshape(-1, m, m).copy()
    delta = loading_level(A)
    _, piv = _cholesky_raw(A)
    loaded = piv.min(axis=-1) <= delta
    idx = np.arange(m)
    A[np.flatnonzero(loaded)[:, None], idx, idx] += delta[loaded, None]
    return A.reshape(shape), loaded.reshape(shape[:-2])


def cholesky(a):
    """Lower Cholesky factor with diagonal loading of near-singular matrices.

    A matrix whose smallest Cholesky pivot does not exceed the loading level
    ``delta = 1e-10 * tr(A) / M`` (floored at 1e-30) is factorized as
    ``A + delta * I`` instead (the matrix returned by :func:`regularize`).
    Well-conditioned matrices are left untouched.

    Returns:
        (L, loaded): the factor and a boolean array flagging loaded matrices.

    Raises:
        SingularMatrixError: if a matrix is still not positive definite after
            loading; the message names the smallest pivot.
    """
    a_eff, loaded = regularize(a)
    shape = a_eff.shape
    m = shape[-1]
    L, piv = _cholesky_raw(a_eff.reshape(-1, m, m))
    bad = piv.min(axis=-1) <= 0
    if bad.any():
        where = np.flatnonzero(bad)
        worst = piv[bad].min()
        raise SingularMatrixError(
            f"matrix {int(where[0])} is not positive definite after "
            f"diagonal loading (smallest pivot {worst:.3e})",
            pivot=float(worst),
            index=int(where[0]),
        )
    return L.reshape(shape), loaded


def _tri_inverse(L):
    m = L.shape[-1]
    eye = np.broadcast_to(np.eye(m, dtype=complex), L.shape)
    return np.linalg.solve(L, eye)


def invert(a):
    """Inverse of Hermitian positive definite matrices via Cholesky.

    Near-singular inputs are diagonally loaded first (see :func:`cholesky`).
    """
    L, _ = cholesky(a)
    Li = _tri_inverse(L)
    return hermitize(np.conj(np.swapaxes(Li, -1, -2)) @ Li)


def generalized_evd(phi_xx, phi_nn):
    """Joint diagonalization of a Hermitian pair by Cholesky whitening.

    Returns eigenvalues in descending order and the matrix ``B`` whose columns
    satisfy ``B^H phi_nn B = I`` and ``B^H phi_xx B = diag(values)``.  Columns
    are phase-normalized like :func:`hermitian_evd` vectors.
    """
    phi_xx = _as_square(phi_xx, "phi_xx")
    phi_nn = _as_square(phi_nn, "phi_nn")
    if phi_xx.shape != phi_nn.shape:
        raise ValueError(f"shape mismatch: {phi_xx.shape} vs {phi_nn.shape}")
    L, _ = cholesky(phi_nn)
    Li = _tri_inverse(L)
    Lih = np.conj(np.swapaxes(Li, -1, -2))
    white = hermitize(Li @ hermitize(phi_xx) @ Lih)
    values, W = hermitian_evd(white)
    B = normalize_phase(Lih @ W)
    return EigenPair(values, B)


def trace_product(a, b):
    """tr(A B) for batches of square matrices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:] or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return np.einsum("...ij,...ji->...", a, b)
