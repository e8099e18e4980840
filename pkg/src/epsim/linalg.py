"""Dense complex linear algebra and the fixed reshaping conventions.

Every matrix is a two-dimensional ``numpy.ndarray`` of ``complex128`` in
row-major order.  The vectorization convention is fixed package-wide:

    vec(rho) = sum_ij rho_ij |i,j>   (row index i major)

so that ``vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)`` and the transfer
matrix of a Kraus set ``{A_i}`` is ``sum_i kron(A_i, A_i.conj())``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalError, PositivityError, ShapeError

# Default tolerances; every check accepts an override.
EQ_TOL = 1e-10        # generic equality / invariant checks
PSD_CLAMP = 1e-10     # eigenvalues above -PSD_CLAMP are clamped to zero
UNITARY_TOL = 1e-8    # unitarity validation


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {m.shape}")
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def is_hermitian(m: np.ndarray, tol: float = EQ_TOL) -> bool:
    m = as_matrix(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - dagger(m))) <= tol


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0]))) <= tol


def is_psd(m: np.ndarray, tol: float = EQ_TOL) -> bool:
    if not is_hermitian(m, tol):
        return False
    return float(np.min(np.linalg.eigvalsh(m))) >= -tol


def is_density_matrix(m: np.ndarray, tol: float = EQ_TOL) -> bool:
    m = as_matrix(m)
    return is_psd(m, tol) and abs(np.trace(m) - 1.0) <= max(tol, 1e-8)


def svd(m: np.ndarray):
    """SVD ``m = u @ diag(s) @ vh`` with singular values sorted descending.

    Raises:
        NumericalError: if the underlying solver fails to converge.
    """
    m = as_matrix(m)
    if m.size == 0:
        raise ShapeError("cannot decompose an empty matrix")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed to converge for a {m.shape[0]}x{m.shape[1]} matrix"
        ) from exc
    return u, s, vh


def psd_sqrt(m: np.ndarray, tol: float = PSD_CLAMP) -> np.ndarray:
    """Hermitian square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as numerical noise and clamped
    to zero; anything below ``-tol`` is an error.
    """
    m = as_matrix(m)
    if not is_hermitian(m, max(tol, EQ_TOL)):
        raise PositivityError("matrix is not Hermitian")
    w, v = np.linalg.eigh(m)
    if w[0] < -tol:
        raise PositivityError(
            f"matrix is not PSD: smallest eigenvalue {w[0]:.3e} < -{tol:.1e}"
        )
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def matrix_exp(m: np.ndarray, scalar: complex = 1.0) -> np.ndarray:
    """exp(scalar * m), via eigendecomposition when m is Hermitian.

    Non-Hermitian input falls back to scipy's scaling-and-squaring Pade.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"matrix_exp needs a square matrix, got {m.shape}")
    if is_hermitian(m):
        w, v = np.linalg.eigh(m)
        out = (v * np.exp(scalar * w)) @ dagger(v)
    else:
        out = scipy.linalg.expm(scalar * m)
    if not np.all(np.isfinite(out)):
        raise NumericalError(
            f"matrix exponential overflowed for scalar {scalar!r} "
            f"on a {m.shape[0]}x{m.shape[0]} matrix"
        )
    return out


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Row-major reshaping of a square matrix into a length d^2 vector."""
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"vectorize needs a square matrix, got {rho.shape}")
    return rho.reshape(-1).copy()


def devectorize(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ShapeError(f"vector of length {v.size} is not a square matrix")
    return v.reshape(d, d).copy()


def partial_trace(m: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out all factors of a multipartite operator except ``keep``.

    ``dims`` lists the factor dimensions (row-major Kronecker order),
    ``keep`` the factor indices to retain, in their original order.
    """
    m = as_matrix(m)
    dims = list(dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ShapeError(f"operator shape {m.shape} != dims product {total}")
    keep = sorted(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    t = m.reshape(dims + dims)
    # Trace factor pairs from the highest index down so positions stay valid.
    n = len(dims)
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + n)
        n -= 1
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def embed_operator(op: np.ndarray, support, dims) -> np.ndarray:
    """Embed an operator on ``support`` into the full product space.

    ``support`` must be sorted and contiguous-free is allowed: the operator's
    factors are routed to the listed site positions of ``dims``.
    """
    op = as_matrix(op)
    dims = list(dims)
    support = list(support)
    d_sup = [dims[s] for s in support]
    if op.shape != (int(np.prod(d_sup)), int(np.prod(d_sup))):
        raise ShapeError(
            f"operator shape {op.shape} does not match support dims {d_sup}"
        )
    n = len(dims)
    rest = [i for i in range(n) if i not in support]
    t = np.kron(op, np.eye(int(np.prod([dims[i] for i in rest])) or 1))
    # t is ordered (support..., rest...); permute back to site order.
    order = support + rest
    t = t.reshape([dims[i] for i in order] * 2)
    perm = [order.index(i) for i in range(n)]
    t = t.transpose(perm + [p + n for p in perm])
    full = int(np.prod(dims))
    return t.reshape(full, full)


def frob_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m)))
