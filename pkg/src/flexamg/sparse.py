"""CSR sparse matrix container and the small set of kernels everything else uses.

The heavy lifting (products, transposes) is delegated to scipy.sparse; this
module pins down the canonical form we rely on everywhere: sorted, duplicate-free
column indices and float64 values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.io


class StructuralError(ValueError):
    """Raised when matrix/vector structure violates a kernel's contract."""


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable CSR matrix.

    Invariants: ``row_offsets`` is non-decreasing with ``row_offsets[0] == 0``
    and ``row_offsets[-1] == len(values)``; column indices are strictly
    increasing within each row (hence no duplicates).
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def csr(self) -> sp.csr_matrix:
        """scipy view sharing this matrix's buffers."""
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols),
        )
        m.has_sorted_indices = True
        return m

    def dense(self) -> np.ndarray:
        return self.csr().toarray()

    def diagonal(self) -> np.ndarray:
        return self.csr().diagonal()


def from_scipy(m) -> SparseMatrix:
    """Canonicalize any scipy sparse matrix into a SparseMatrix."""
    m = sp.csr_matrix(m, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    return SparseMatrix(
        n_rows=m.shape[0],
        n_cols=m.shape[1],
        row_offsets=np.asarray(m.indptr, dtype=np.int64),
        col_indices=np.asarray(m.indices, dtype=np.int64),
        values=np.asarray(m.data, dtype=np.float64),
    )


def from_triplets(n_rows: int, n_cols: int, entries) -> SparseMatrix:
    """Build a matrix from (row, col, value) triplets.

    Duplicates are summed; entries whose sum is exactly zero are dropped.
    """
    rows = np.array([e[0] for e in entries], dtype=np.int64)
    cols = np.array([e[1] for e in entries], dtype=np.int64)
    vals = np.array([e[2] for e in entries], dtype=np.float64)
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows):
        raise StructuralError("row index out of range")
    if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
        raise StructuralError("column index out of range")
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return from_scipy(m)


def identity(n: int) -> SparseMatrix:
    return from_scipy(sp.identity(n, format="csr"))


def spmv(A: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise StructuralError(f"spmv: x has length {x.shape}, expected {A.n_cols}")
    return A.csr() @ x


def residual(A: SparseMatrix, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """r = b - A x."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n_rows,):
        raise StructuralError(f"residual: b has length {b.shape}, expected {A.n_rows}")
    return b - spmv(A, x)


def norm2(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def transpose(A: SparseMatrix) -> SparseMatrix:
    return from_scipy(A.csr().T.tocsr())


def rap(R: SparseMatrix, A: SparseMatrix, P: SparseMatrix) -> SparseMatrix:
    """Galerkin triple product R A P, computed as (R A) P."""
    if R.n_cols != A.n_rows or A.n_cols != P.n_rows:
        raise StructuralError(
            f"rap: dimension chain mismatch {R.shape} x {A.shape} x {P.shape}"
        )
    return from_scipy((R.csr() @ A.csr()) @ P.csr())


def write_matrix_market(path, A: SparseMatrix) -> None:
    scipy.io.mmwrite(str(path), A.csr())


def read_matrix_market(path) -> SparseMatrix:
    return from_scipy(scipy.io.mmread(str(path)))
