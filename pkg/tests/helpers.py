"""Dense, independently coded oracles used to cross-check the sparse kernels,
the hybrid smoothers, and the flexible-cycle interpreter."""

import numpy as np


def block_id_from_partition(n, partition):
    bid = np.empty(n, dtype=int)
    for b, (s, e) in enumerate(partition):
        bid[s:e] = b
    return bid


def ordering_perm(n, ordering, partition, cf):
    """Traversal order: grouped by block; lex ascending, cf = C then F."""
    pieces = []
    for (s, e) in partition:
        rows = np.arange(s, e)
        if ordering == "lex":
            pieces.append(rows)
        elif ordering == "cf":
            pieces.append(np.concatenate([rows[cf[s:e] == 1], rows[cf[s:e] != 1]]))
        else:
            pieces.append(np.concatenate([rows[cf[s:e] != 1], rows[cf[s:e] == 1]]))
    return np.concatenate(pieces)


def dense_hybrid_sweep(A, b, x, kind, ordering, wi, wo, partition, cf):
    """One sweep of the hybrid block relaxation, written against the dense
    matrix with per-row numpy arithmetic."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    bid = block_id_from_partition(n, partition)
    diag = np.diag(A).copy()
    if kind.startswith("l1-"):
        off_block = np.zeros(n)
        for i in range(n):
            mask = bid != bid[i]
            off_block[i] = np.abs(A[i, mask]).sum()
        diag = np.sign(diag) * (np.abs(diag) + off_block)
    jacobi = kind.endswith("jacobi")
    forward = not kind.endswith("gs-bwd")
    perm = ordering_perm(n, ordering, partition, cf)
    rows = perm if forward else perm[::-1]
    xs = np.array(x, dtype=float)
    xw = xs.copy()
    for row in rows:
        if jacobi:
            v = xs
        else:
            v = np.where(bid != bid[row], xs, xw)
        s = A[row] @ v
        xw[row] = xw[row] + wi * (b[row] - s) / diag[row]
    return xs + wo * (xw - xs)


def dense_smoother_matrix(A, kind, ordering, wi, wo, partition, cf):
    """Iteration matrix G with x' = G x + c, extracted by applying the dense
    sweep to basis vectors with b = 0."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    G = np.zeros((n, n))
    zero = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        G[:, j] = dense_hybrid_sweep(A, zero, e, kind, ordering, wi, wo, partition, cf)
    return G


def textbook_iteration_matrix(A, kind, ordering, wi, wo, partition, cf):
    """Serial textbook splitting form of the single-block methods:
    Jacobi: G = I - wi D^{-1} A; GS: G = I - (D/wi + L_perm)^{-1} A, with the
    strictly lower triangle taken in traversal order. The whole update is then
    damped by wo."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    D = np.diag(np.diag(A))
    if kind.endswith("jacobi"):
        M = D / wi
    else:
        perm = ordering_perm(n, ordering, partition, cf)
        if kind.endswith("gs-bwd"):
            perm = perm[::-1]
        E = np.eye(n)[perm]
        At = E @ A @ E.T
        Mt = np.diag(np.diag(At)) / wi + np.tril(At, -1)
        M = E.T @ Mt @ E
    G = np.eye(n) - np.linalg.solve(M, A)
    return (1 - wo) * np.eye(n) + wo * G


def dense_vcycle(dense_levels, level, b, x, pre_kinds, post_kinds, ordering,
                 wi, wo):
    """Independent recursive V-cycle over densified hierarchy data.

    ``dense_levels`` holds dicts with A (dense), P, R (dense, absent at the
    coarsest), partition, cf.
    """
    lvl = dense_levels[level]
    if level == len(dense_levels) - 1:
        return np.linalg.solve(lvl["A"], b)
    for kind in pre_kinds:
        x = dense_hybrid_sweep(lvl["A"], b, x, kind, ordering, wi, wo,
                               lvl["partition"], lvl["cf"])
    r = b - lvl["A"] @ x
    bc = lvl["R"] @ r
    xc = dense_vcycle(dense_levels, level + 1, bc, np.zeros(len(bc)),
                      pre_kinds, post_kinds, ordering, wi, wo)
    x = x + lvl["P"] @ xc
    for kind in post_kinds:
        x = dense_hybrid_sweep(lvl["A"], b, x, kind, ordering, wi, wo,
                               lvl["partition"], lvl["cf"])
    return x


def densify_hierarchy(hierarchy):
    out = []
    for lvl in hierarchy.levels:
        d = {"A": lvl.A.dense(), "partition": lvl.row_partition,
             "cf": lvl.cf_split if lvl.cf_split is not None
                   else np.ones(lvl.A.n_rows, dtype=int)}
        if lvl.P is not None:
            d["P"] = lvl.P.dense()
            d["R"] = lvl.R.dense()
        out.append(d)
    return out


def brute_force_nondominated(objs):
    """Indices of the non-dominated points under (min, min)."""
    keep = []
    for i, a in enumerate(objs):
        dominated = False
        for j, b in enumerate(objs):
            if j != i and b[0] <= a[0] and b[1] <= a[1] and (b[0] < a[0] or b[1] < a[1]):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def reference_bracket_checker(ops):
    """Pushdown acceptance of restrict/correct bracket discipline: ops is a
    list of ('restrict', l) / ('correct', l) with correct returning to l."""
    level = 0
    for kind, l in ops:
        if kind == "restrict":
            if l != level:
                return False
            level += 1
        else:
            if level == 0 or l != level - 1:
                return False
            level -= 1
    return level == 0
