"""Hybrid block relaxation: Jacobi / Gauss-Seidel and their l1 variants, with
lexicographic, CF, or FC ordering.

The row partition emulates per-processor blocks in a single process: within a
block, Gauss-Seidel reads already-updated values, while values from other
blocks are always taken from the sweep-start vector (Jacobi-style exchange).
The local update is damped by omega_i; the whole block update is then damped
by omega_o. The l1 variants augment the diagonal by the off-block absolute row
sum. The inner loop is numba-compiled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .sparse import SparseMatrix, StructuralError

KINDS = ("jacobi", "gs-fwd", "gs-bwd", "l1-jacobi", "l1-gs-fwd", "l1-gs-bwd")
ORDERINGS = ("lex", "cf", "fc")

# the discrete sample set 0.1, 0.15, ..., 1.9 shared by relaxation weights
# and the coarse-grid correction scaling
WEIGHT_SET = tuple(round(0.1 + 0.05 * k, 2) for k in range(37))


class SmootherError(ValueError):
    pass


def _check_weight(w: float, name: str):
    if round(float(w), 2) not in WEIGHT_SET or abs(w - round(w, 2)) > 1e-12:
        raise SmootherError(f"{name}={w} outside the sample set 0.1, 0.15, ..., 1.9")


@dataclass(frozen=True)
class SmootherSpec:
    kind: str = "gs-fwd"
    ordering: str = "lex"
    omega_i: float = 1.0
    omega_o: float = 1.0
    sweeps: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SmootherError(f"unknown smoother kind {self.kind!r}")
        if self.ordering not in ORDERINGS:
            raise SmootherError(f"unknown ordering {self.ordering!r}")
        _check_weight(self.omega_i, "omega_i")
        _check_weight(self.omega_o, "omega_o")
        if not 1 <= self.sweeps <= 4:
            raise SmootherError("sweeps must lie in 1..4")

    @property
    def is_l1(self) -> bool:
        return self.kind.startswith("l1-")

    @property
    def is_jacobi(self) -> bool:
        return self.kind.endswith("jacobi")

    @property
    def forward(self) -> bool:
        return not self.kind.endswith("gs-bwd")

    def token(self) -> str:
        return (f"{self.kind}/{self.ordering}/wi={self.omega_i:g}"
                f"/wo={self.omega_o:g}/s={self.sweeps}")

    @staticmethod
    def from_token(text: str) -> "SmootherSpec":
        parts = text.strip().split("/")
        if len(parts) != 5:
            raise SmootherError(f"malformed smoother token {text!r}")
        kv = {}
        for part in parts[2:]:
            k, _, v = part.partition("=")
            kv[k] = v
        try:
            return SmootherSpec(
                kind=parts[0], ordering=parts[1],
                omega_i=float(kv["wi"]), omega_o=float(kv["wo"]),
                sweeps=int(kv["s"]),
            )
        except (KeyError, ValueError) as exc:
            raise SmootherError(f"malformed smoother token {text!r}") from exc


class RelaxData:
    """Precomputed per-level relaxation data: diagonals, l1-augmented
    diagonals, block membership, and cached traversal orders."""

    def __init__(self, diag, l1_diag, block_id, row_partition, cf_split):
        self.diag = diag
        self.l1_diag = l1_diag
        self.block_id = block_id
        self.row_partition = row_partition
        self.cf_split = cf_split
        self._perms: dict[str, np.ndarray] = {}

    @property
    def l1_sums(self) -> np.ndarray:
        """|a_ii| + off-block absolute row sum."""
        return np.abs(self.l1_diag)

    def perm(self, ordering: str) -> np.ndarray:
        """Row traversal order, grouped by block. lex: ascending; cf: C rows
        then F rows within each block; fc: the reverse (F then C)."""
        cached = self._perms.get(ordering)
        if cached is not None:
            return cached
        pieces = []
        for (s, e) in self.row_partition:
            rows = np.arange(s, e, dtype=np.int64)
            if ordering == "lex":
                pieces.append(rows)
            else:
                c = rows[self.cf_split[s:e] == 1]
                f = rows[self.cf_split[s:e] != 1]
                pieces.append(np.concatenate([c, f] if ordering == "cf" else [f, c]))
        perm = np.concatenate(pieces) if pieces else np.arange(0, dtype=np.int64)
        self._perms[ordering] = perm
        return perm


def precompute_relax_data(A: SparseMatrix, cf_split, row_partition) -> RelaxData:
    n = A.n_rows
    block_id = np.empty(n, dtype=np.int64)
    covered = 0
    for b, (s, e) in enumerate(row_partition):
        block_id[s:e] = b
        covered += e - s
    if covered != n:
        raise StructuralError("row_partition does not cover all rows")

    diag = np.zeros(n)
    off_block = np.zeros(n)
    indptr, indices, values = A.row_offsets, A.col_indices, A.values
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j == i:
                diag[i] = values[k]
            elif block_id[j] != block_id[i]:
                off_block[i] += abs(values[k])
    if (diag == 0.0).any():
        row = int(np.where(diag == 0.0)[0][0])
        raise SmootherError(f"zero diagonal in row {row}")
    l1_diag = np.sign(diag) * (np.abs(diag) + off_block)
    cf_split = np.asarray(cf_split, dtype=np.int8)
    return RelaxData(diag, l1_diag, block_id, tuple(row_partition), cf_split)


@nb.njit(cache=True, nogil=True)
def _sweep_kernel(indptr, indices, values, b, x, diag, block_id, perm,
                  jacobi, forward, omega_i, omega_o):  # pragma: no cover
    n = x.shape[0]
    xs = x.copy()   # sweep-start vector
    xw = x.copy()   # working vector (in-block updates visible to GS)
    m = perm.shape[0]
    for idx in range(m):
        row = perm[idx] if forward else perm[m - 1 - idx]
        blk = block_id[row]
        s = 0.0
        for k in range(indptr[row], indptr[row + 1]):
            j = indices[k]
            if jacobi or block_id[j] != blk:
                s += values[k] * xs[j]
            else:
                s += values[k] * xw[j]
        xw[row] = xw[row] + omega_i * (b[row] - s) / diag[row]
    for i in range(n):
        x[i] = xs[i] + omega_o * (xw[i] - xs[i])


def relax_sweep(A: SparseMatrix, b: np.ndarray, x: np.ndarray,
                spec: SmootherSpec, data: RelaxData) -> np.ndarray:
    """Apply ``spec.sweeps`` sweeps of the hybrid scheme; returns a new vector."""
    if b.shape != (A.n_rows,) or x.shape != (A.n_rows,):
        raise StructuralError("relax_sweep: dimension mismatch")
    out = np.array(x, dtype=np.float64, copy=True)
    diag = data.l1_diag if spec.is_l1 else data.diag
    perm = data.perm(spec.ordering)
    for _ in range(spec.sweeps):
        _sweep_kernel(A.row_offsets, A.col_indices, A.values,
                      np.asarray(b, dtype=np.float64), out, diag,
                      data.block_id, perm,
                      spec.is_jacobi, spec.forward,
                      spec.omega_i, spec.omega_o)
    return out
