"""Multilevel hierarchy construction: strength of connection, classical
Ruge-Stuben C/F splitting, classical interpolation, and Galerkin coarse
operators.

Serial classical coarsening/interpolation stands in for the parallel
Falgout/Extended+i combination; the substitution is recorded in the exported
metadata (see cli.build_metadata).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import sparse, smoothers
from .sparse import SparseMatrix, StructuralError

C_POINT = 1
F_POINT = 0


class SetupError(RuntimeError):
    """Raised when hierarchy construction cannot proceed."""


@dataclass(frozen=True)
class SetupParams:
    strength_threshold: float = 0.8
    max_row_sum: float = 0.9
    max_levels: int = 25
    min_coarse_size: int = 9

    def __post_init__(self):
        if not 0 < self.strength_threshold < 1:
            raise ValueError("strength_threshold must lie in (0,1)")
        if not 0 < self.max_row_sum <= 1:
            raise ValueError("max_row_sum must lie in (0,1]")
        if self.max_levels < 2:
            raise ValueError("max_levels must be >= 2")
        if self.min_coarse_size < 1:
            raise ValueError("min_coarse_size must be >= 1")


def strength_matrix(A: SparseMatrix, theta: float, max_row_sum: float = 1.0) -> SparseMatrix:
    """Classical strength-of-connection pattern (entries are 1.0).

    j strongly influences i iff -a_ij >= theta * max_k(-a_ik); rows with no
    negative off-diagonal fall back to |a_ij| >= theta * max|a_ik|. Rows that
    are strongly diagonally dominant -- |sum_j a_ij| >= max_row_sum * |a_ii|,
    signed sum over the whole row -- keep no connections (rule disabled at
    max_row_sum = 1, matching common AMG practice).
    """
    if A.n_rows != A.n_cols:
        raise StructuralError("strength_matrix: matrix must be square")
    indptr, indices, values = A.row_offsets, A.col_indices, A.values
    entries = []
    for i in range(A.n_rows):
        s, e = indptr[i], indptr[i + 1]
        cols = indices[s:e]
        vals = values[s:e]
        off = cols != i
        if not off.any():
            continue
        diag = vals[~off].sum() if (~off).any() else 0.0
        if max_row_sum < 1.0 and abs(vals.sum()) >= max_row_sum * abs(diag) and diag != 0.0:
            continue
        ov = vals[off]
        oc = cols[off]
        neg = -ov
        m = neg.max()
        if m > 0:
            strong = neg >= theta * m
        else:
            am = np.abs(ov).max()
            if am == 0:
                continue
            strong = np.abs(ov) >= theta * am
        for j in oc[strong]:
            entries.append((i, int(j), 1.0))
    return sparse.from_triplets(A.n_rows, A.n_cols, entries)


def _pattern_rows(S: SparseMatrix):
    return S.row_offsets, S.col_indices


def rs_coarsen(strength: SparseMatrix) -> np.ndarray:
    """Classical Ruge-Stuben two-pass C/F splitting.

    Returns an int8 array with C_POINT/F_POINT per row. First pass picks C
    points by descending measure (ties broken by lowest index); the measure of
    a point is the number of points it strongly influences, incremented when
    an unassigned dependent of a new F point remains. Second pass guarantees
    every strong F-F pair shares a strong C point, converting the second
    endpoint otherwise. Isolated points become F.
    """
    if strength.n_rows != strength.n_cols:
        raise StructuralError("rs_coarsen: pattern must be square")
    n = strength.n_rows
    indptr, indices = _pattern_rows(strength)
    ST = sparse.transpose(strength)
    tptr, tind = ST.row_offsets, ST.col_indices

    UNASSIGNED = -1
    cf = np.full(n, UNASSIGNED, dtype=np.int8)
    measure = (tptr[1:] - tptr[:-1]).astype(np.float64)

    while True:
        cand = cf == UNASSIGNED
        if not cand.any():
            break
        masked = np.where(cand, measure, -1.0)
        best = float(masked.max())
        if best <= 0:
            # remaining points influence nobody: fine points
            cf[cand] = F_POINT
            break
        i = int(np.argmax(masked))  # argmax returns lowest index on ties
        cf[i] = C_POINT
        measure[i] = 0
        for j in tind[tptr[i]:tptr[i + 1]]:
            if cf[j] == UNASSIGNED:
                cf[j] = F_POINT
                # dependencies of the new F point become more attractive C candidates
                for k in indices[indptr[j]:indptr[j + 1]]:
                    if cf[k] == UNASSIGNED:
                        measure[k] += 1

    # second pass: strong F-F pairs need a common strong C neighbor
    for i in range(n):
        if cf[i] != F_POINT:
            continue
        si = indices[indptr[i]:indptr[i + 1]]
        ci = {int(k) for k in si if cf[k] == C_POINT}
        for j in si:
            if cf[j] != F_POINT:
                continue
            sj = indices[indptr[j]:indptr[j + 1]]
            if not any(int(k) in ci for k in sj if cf[k] == C_POINT):
                cf[j] = C_POINT
                ci.add(int(j))
    return cf


def classical_interpolation(A: SparseMatrix, strength: SparseMatrix,
                            cf: np.ndarray) -> SparseMatrix:
    """Classical (direct) Ruge-Stuben interpolation.

    C points inject; F points interpolate from their strong C neighbors, with
    strong F couplings distributed through common C points and weak couplings
    folded into the denominator. F points with an empty strength row get an
    all-zero row (their error is left to the smoother).
    """
    n = A.n_rows
    indptr, indices, values = A.row_offsets, A.col_indices, A.values
    sptr, sind = _pattern_rows(strength)
    coarse_index = np.cumsum(cf == C_POINT) - 1
    nc = int((cf == C_POINT).sum())

    entries = []
    for i in range(n):
        if cf[i] == C_POINT:
            entries.append((i, int(coarse_index[i]), 1.0))
            continue
        strong = set(int(j) for j in sind[sptr[i]:sptr[i + 1]])
        if not strong:
            continue
        c_i = [j for j in strong if cf[j] == C_POINT]
        f_i = [j for j in strong if cf[j] == F_POINT]
        if not c_i:
            raise SetupError(f"F point {i} has no strong C neighbor")
        c_set = set(c_i)

        row = {}
        diag = 0.0
        weak_sum = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = int(indices[k])
            v = values[k]
            if j == i:
                diag = v
            elif j in strong:
                row[j] = v
            else:
                weak_sum += v

        numer = {j: row[j] for j in c_i}
        for m in f_i:
            a_im = row[m]
            dist = {}
            d_m = 0.0
            for k in range(indptr[m], indptr[m + 1]):
                j = int(indices[k])
                if j in c_set:
                    dist[j] = values[k]
                    d_m += values[k]
            if d_m == 0.0 or not dist:
                weak_sum += a_im  # cannot distribute: treat as weak
                continue
            for j, a_mj in dist.items():
                numer[j] += a_im * a_mj / d_m

        denom = diag + weak_sum
        if denom == 0.0:
            raise SetupError(f"zero interpolation denominator in row {i}")
        for j, v in numer.items():
            w = -v / denom
            if w != 0.0:
                entries.append((i, int(coarse_index[j]), w))
    return sparse.from_triplets(n, nc, entries)


@dataclass(frozen=True)
class Level:
    A: SparseMatrix
    relax: smoothers.RelaxData
    row_partition: tuple[tuple[int, int], ...]
    cf_split: np.ndarray | None = None     # None on the coarsest level
    P: SparseMatrix | None = None
    R: SparseMatrix | None = None
    lu: tuple | None = None                # dense LU of A on the coarsest level


@dataclass(frozen=True)
class AmgHierarchy:
    levels: tuple[Level, ...]
    params: SetupParams

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def stats(self) -> dict:
        sizes = [lvl.A.n_rows for lvl in self.levels]
        nnzs = [lvl.A.nnz for lvl in self.levels]
        return {
            "levels": self.n_levels,
            "sizes": sizes,
            "nnz": nnzs,
            "operator_complexity": sum(nnzs) / nnzs[0] if nnzs[0] else 1.0,
        }


def _coarsen_partition(partition, cf):
    """Map each C point to its fine block; empty coarse blocks are dropped."""
    is_c = cf == C_POINT
    ranges = []
    start = 0
    for (s, e) in partition:
        cnt = int(is_c[s:e].sum())
        if cnt:
            ranges.append((start, start + cnt))
            start += cnt
    if not ranges:
        ranges = [(0, int(is_c.sum()))]
    return tuple(ranges)


def build_hierarchy(A: SparseMatrix, params: SetupParams | None = None,
                    row_partition=None) -> AmgHierarchy:
    """Repeat strength -> coarsen -> interpolate -> RAP until the coarsest-size
    or level-count criterion triggers; the coarsest operator is LU-factorized.
    """
    params = params or SetupParams()
    if A.n_rows != A.n_cols:
        raise StructuralError("build_hierarchy: matrix must be square")
    if row_partition is None:
        row_partition = ((0, A.n_rows),)

    levels = []
    cur_A, cur_part = A, tuple(row_partition)
    while True:
        n = cur_A.n_rows
        if n <= params.min_coarse_size or len(levels) == params.max_levels - 1:
            break
        S = strength_matrix(cur_A, params.strength_threshold, params.max_row_sum)
        cf = rs_coarsen(S)
        nc = int((cf == C_POINT).sum())
        if nc == 0 or nc >= n:
            break  # no useful coarsening at this level
        P = classical_interpolation(cur_A, S, cf)
        R = sparse.transpose(P)
        relax = smoothers.precompute_relax_data(cur_A, cf, cur_part)
        levels.append(Level(A=cur_A, relax=relax, row_partition=cur_part,
                            cf_split=cf, P=P, R=R))
        cur_A = sparse.rap(R, cur_A, P)
        cur_part = _coarsen_partition(cur_part, cf)

    relax = smoothers.precompute_relax_data(
        cur_A, np.full(cur_A.n_rows, C_POINT, dtype=np.int8), cur_part)
    lu = scipy.linalg.lu_factor(cur_A.dense())
    levels.append(Level(A=cur_A, relax=relax, row_partition=cur_part, lu=lu))
    return AmgHierarchy(levels=tuple(levels), params=params)
