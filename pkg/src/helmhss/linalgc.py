"""Complex sparse linear algebra: CSR helpers, Jacobi, and banded LU."""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.lib.stride_tricks import as_strided
from scipy.linalg.blas import ztbsv

log = logging.getLogger(__name__)

ComplexSparseMatrix = sp.csr_matrix


class PivotError(ArithmeticError):
    def __init__(self, index, pivot):
        super().__init__(f"near-zero pivot {abs(pivot):.3e} at row {index}")
        self.index = index
        self.pivot = pivot


def as_csr(A) -> sp.csr_matrix:
    """Canonical complex CSR: summed duplicates, sorted column indices."""
    A = sp.csr_matrix(A, dtype=np.complex128)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape} times vector {x.shape}")
    return A @ x


def jacobi_diagonal(A) -> np.ndarray:
    d = np.asarray(A.diagonal())
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise ZeroDivisionError(f"zero diagonal entry at index {zero[0]}")
    return d


def jacobi_apply(A, r, diag=None):
    d = jacobi_diagonal(A) if diag is None else diag
    return r / d


def bandwidth(A) -> tuple[int, int]:
    """(lower, upper) bandwidth from the sparsity pattern."""
    C = sp.coo_matrix(A)
    if C.nnz == 0:
        return 0, 0
    off = C.col.astype(np.int64) - C.row
    return int(max(0, -off.min())), int(max(0, off.max()))


class BandedLU:
    """LU factorization without pivoting in band storage.

    Row ``i`` of ``ab`` holds ``A[i, i-kl : i+ku+1]``, i.e.
    ``ab[i, kl + j - i] = A[i, j]``. After factorization the strictly lower
    part holds the unit-lower multipliers and the rest holds U.
    """

    def __init__(self, ab: np.ndarray, kl: int, ku: int):
        self.ab = ab
        self.kl = kl
        self.ku = ku
        self.n = ab.shape[0]
        self._lapack_bands()

    @property
    def bandwidth(self) -> int:
        return max(self.kl, self.ku)

    def _lapack_bands(self):
        # LAPACK upper band: u_band[ku + i - j, j] = U[i, j]
        # LAPACK lower band: l_band[i - j, j] = L[i, j]
        n, kl, ku, ab = self.n, self.kl, self.ku, self.ab
        U = np.zeros((ku + 1, n), dtype=np.complex128)
        L = np.zeros((kl + 1, n), dtype=np.complex128)
        for d in range(ku + 1):
            U[ku - d, d:] = ab[: n - d, kl + d]
        L[0, :] = 1.0
        for d in range(1, kl + 1):
            L[d, : n - d] = ab[d:, kl - d]
        self._U = np.asfortranarray(U)
        self._L = np.asfortranarray(L)

    def solve(self, b):
        b = np.asarray(b, dtype=np.complex128)
        y = ztbsv(self.kl, self._L, b, lower=1, diag=1)
        return ztbsv(self.ku, self._U, y, lower=0)

    def to_dense(self):
        """Dense (L, U) factors; for tests on small systems."""
        n, kl, ku = self.n, self.kl, self.ku
        L = np.eye(n, dtype=np.complex128)
        U = np.zeros((n, n), dtype=np.complex128)
        for i in range(n):
            for j in range(max(0, i - kl), min(n, i + ku + 1)):
                v = self.ab[i, kl + j - i]
                if j < i:
                    L[i, j] = v
                else:
                    U[i, j] = v
        return L, U


def banded_lu_factor(A, pivot_rtol: float = 1e-14) -> BandedLU:
    A = as_csr(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError(f"matrix must be square, got {A.shape}")
    kl, ku = bandwidth(A)
    w = kl + ku + 1
    C = A.tocoo()
    ab = np.zeros((n, w), dtype=np.complex128)
    ab[C.row, kl + C.col - C.row] = C.data
    rowmax = np.abs(ab).max(axis=1)

    flat = ab.reshape(-1)
    item = flat.itemsize
    for j in range(n - 1):
        piv = ab[j, kl]
        if abs(piv) < pivot_rtol * rowmax[j]:
            raise PivotError(j, piv)
        m = min(kl, n - 1 - j)
        c = min(ku, n - 1 - j)
        if m == 0:
            continue
        # ab[j+s, kl - s] for s = 1..m: the column below the pivot
        col = as_strided(flat[(j + 1) * w + kl - 1:], shape=(m,), strides=((w - 1) * item,))
        col /= piv
        if c == 0:
            continue
        urow = ab[j, kl + 1: kl + 1 + c]
        # ab[j+s, kl + t - s], s = 1..m, t = 1..c, is a rectangular strided view
        block = as_strided(flat[(j + 1) * w + kl:], shape=(m, c), strides=((w - 1) * item, item))
        block -= np.multiply.outer(col, urow)
    if n and abs(ab[n - 1, kl]) < pivot_rtol * rowmax[n - 1]:
        raise PivotError(n - 1, ab[n - 1, kl])
    return BandedLU(ab, kl, ku)


def banded_lu_solve(F: BandedLU, b):
    return F.solve(b)


class SparseLU:
    """SuperLU factorization, used when band storage would not fit in memory."""

    def __init__(self, A):
        self.n = A.shape[0]
        self._lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=np.complex128))


# band storage above this many bytes goes to SuperLU instead
BANDED_MEMORY_LIMIT = 1.0e9


def direct_factor(A, method: str = "auto"):
    """Factor ``A`` with the banded LU, or with SuperLU for large bands.

    ``method`` is ``"banded"``, ``"splu"`` or ``"auto"``.
    """
    A = as_csr(A)
    if method == "auto":
        kl, ku = bandwidth(A)
        nbytes = 16.0 * A.shape[0] * (kl + ku + 1)
        method = "banded" if nbytes <= BANDED_MEMORY_LIMIT else "splu"
    if method == "banded":
        return banded_lu_factor(A)
    if method == "splu":
        log.info("using SuperLU for n=%d", A.shape[0])
        return SparseLU(A)
    raise ValueError(f"unknown direct method {method!r}")


def write_matrix_market(A, path):
    """Write ``A`` as text, one nonzero per line: ``row col re im`` (0-based)."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        fh.write(f"% {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            v = complex(v)
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
