import numpy as np
import pytest
import scipy.sparse as sp

from flexamg import smoothers, sparse
from flexamg.smoothers import (KINDS, ORDERINGS, WEIGHT_SET, SmootherError,
                               SmootherSpec)

from helpers import dense_hybrid_sweep, dense_smoother_matrix


def diag_dominant(rng, n):
    """Random strictly diagonally dominant system (all smoothers converge)."""
    M = rng.uniform(-1, 1, (n, n))
    np.fill_diagonal(M, 0.0)
    d = np.abs(M).sum(axis=1) + rng.uniform(0.5, 1.5, n)
    np.fill_diagonal(M, d)
    return sparse.from_scipy(sp.csr_matrix(M))


def random_cf(rng, n):
    cf = rng.integers(0, 2, n).astype(np.int8)
    return cf


def sweep_matrix(A, spec, data):
    """Iteration matrix extracted from relax_sweep applied to basis vectors."""
    n = A.n_rows
    zero = np.zeros(n)
    G = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        G[:, j] = smoothers.relax_sweep(A, zero, e, spec, data)
    return G


def test_weight_set():
    assert len(WEIGHT_SET) == 37
    assert WEIGHT_SET[0] == 0.1
    assert WEIGHT_SET[-1] == 1.9
    assert all(round(b - a, 2) == 0.05 for a, b in zip(WEIGHT_SET, WEIGHT_SET[1:]))


def test_spec_validation():
    with pytest.raises(SmootherError):
        SmootherSpec(kind="sor")
    with pytest.raises(SmootherError):
        SmootherSpec(ordering="zigzag")
    with pytest.raises(SmootherError):
        SmootherSpec(omega_i=0.07)
    with pytest.raises(SmootherError):
        SmootherSpec(omega_o=2.0)
    with pytest.raises(SmootherError):
        SmootherSpec(sweeps=5)


def test_spec_token_round_trip():
    for kind in KINDS:
        for ordering in ORDERINGS:
            spec = SmootherSpec(kind=kind, ordering=ordering, omega_i=0.65,
                                omega_o=1.15, sweeps=3)
            assert SmootherSpec.from_token(spec.token()) == spec
    with pytest.raises(SmootherError):
        SmootherSpec.from_token("gs-fwd/lex/wi=1")


def test_precompute_identity():
    data = smoothers.precompute_relax_data(
        sparse.identity(4), np.zeros(4, dtype=np.int8), ((0, 4),))
    assert np.array_equal(data.diag, np.ones(4))
    assert np.array_equal(data.l1_diag, np.ones(4))


def test_precompute_l1_two_blocks():
    # tridiag(-1,2,-1) on 4 rows split in the middle: rows 1 and 2 each see one
    # off-block -1
    entries = [(i, i, 2.0) for i in range(4)]
    entries += [(i, i + 1, -1.0) for i in range(3)]
    entries += [(i + 1, i, -1.0) for i in range(3)]
    A = sparse.from_triplets(4, 4, entries)
    data = smoothers.precompute_relax_data(A, np.zeros(4, dtype=np.int8),
                                           ((0, 2), (2, 4)))
    assert np.array_equal(data.l1_sums, np.array([2.0, 3.0, 3.0, 2.0]))
    assert np.array_equal(data.block_id, np.array([0, 0, 1, 1]))


def test_precompute_negative_diagonal_keeps_sign():
    A = sparse.from_triplets(2, 2, [(0, 0, -2.0), (0, 1, 1.0),
                                    (1, 0, 1.0), (1, 1, -2.0)])
    data = smoothers.precompute_relax_data(A, np.zeros(2, dtype=np.int8),
                                           ((0, 1), (1, 2)))
    assert np.array_equal(data.l1_diag, np.array([-3.0, -3.0]))


def test_precompute_rejects_zero_diagonal():
    A = sparse.from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
    with pytest.raises(SmootherError, match="row 0"):
        smoothers.precompute_relax_data(A, np.zeros(2, dtype=np.int8), ((0, 2),))


def test_perm_orderings():
    A = sparse.identity(6)
    cf = np.array([1, 0, 0, 1, 1, 0], dtype=np.int8)
    data = smoothers.precompute_relax_data(A, cf, ((0, 3), (3, 6)))
    assert np.array_equal(data.perm("lex"), np.arange(6))
    # block 1 C rows first: [0], then F [1,2]; block 2: C [3,4], then F [5]
    assert np.array_equal(data.perm("cf"), np.array([0, 1, 2, 3, 4, 5]))
    cf2 = np.array([0, 1, 0, 0, 1, 1], dtype=np.int8)
    data2 = smoothers.precompute_relax_data(A, cf2, ((0, 3), (3, 6)))
    assert np.array_equal(data2.perm("cf"), np.array([1, 0, 2, 4, 5, 3]))
    assert np.array_equal(data2.perm("fc"), np.array([0, 2, 1, 3, 4, 5]))


def test_jacobi_on_diagonal_matrix_solves_exactly(rng):
    d = rng.uniform(1, 3, 6)
    A = sparse.from_triplets(6, 6, [(i, i, d[i]) for i in range(6)])
    data = smoothers.precompute_relax_data(A, np.zeros(6, dtype=np.int8), ((0, 6),))
    b = rng.standard_normal(6)
    x = smoothers.relax_sweep(A, b, np.zeros(6), SmootherSpec(kind="jacobi"), data)
    assert np.allclose(x, b / d, atol=1e-15)


def test_gs_on_lower_triangular_solves_exactly(rng):
    # single-block forward GS with omega 1 is exact forward substitution
    n = 5
    L = np.tril(rng.uniform(-1, 1, (n, n)))
    np.fill_diagonal(L, rng.uniform(1, 2, n))
    A = sparse.from_scipy(sp.csr_matrix(L))
    data = smoothers.precompute_relax_data(A, np.zeros(n, dtype=np.int8), ((0, n),))
    b = rng.standard_normal(n)
    x = smoothers.relax_sweep(A, b, np.zeros(n), SmootherSpec(kind="gs-fwd"), data)
    assert np.allclose(x, np.linalg.solve(L, b), atol=1e-13)


def test_fixed_point_all_kinds_orderings(rng):
    n = 12
    A = diag_dominant(rng, n)
    cf = random_cf(rng, n)
    part = ((0, 4), (4, 9), (9, n))
    data = smoothers.precompute_relax_data(A, cf, part)
    xstar = rng.standard_normal(n)
    b = sparse.spmv(A, xstar)
    for kind in KINDS:
        for ordering in ORDERINGS:
            spec = SmootherSpec(kind=kind, ordering=ordering, omega_i=0.75,
                                omega_o=1.2, sweeps=2)
            out = smoothers.relax_sweep(A, b, xstar.copy(), spec, data)
            assert np.allclose(out, xstar, atol=1e-13), (kind, ordering)


def test_matches_dense_hybrid_oracle(rng):
    n = 10
    part = ((0, 3), (3, 7), (7, n))
    for kind in KINDS:
        for ordering in ORDERINGS:
            A = diag_dominant(rng, n)
            cf = random_cf(rng, n)
            data = smoothers.precompute_relax_data(A, cf, part)
            b = rng.standard_normal(n)
            x0 = rng.standard_normal(n)
            spec = SmootherSpec(kind=kind, ordering=ordering, omega_i=0.6,
                                omega_o=1.35)
            got = smoothers.relax_sweep(A, b, x0, spec, data)
            want = dense_hybrid_sweep(A.dense(), b, x0, kind, ordering,
                                      0.6, 1.35, part, cf)
            assert np.allclose(got, want, atol=1e-13), (kind, ordering)


def test_iteration_matrix_matches_dense_oracle(rng):
    n = 10
    part = ((0, 5), (5, n))
    A = diag_dominant(rng, n)
    cf = random_cf(rng, n)
    data = smoothers.precompute_relax_data(A, cf, part)
    for kind in ("gs-fwd", "l1-gs-bwd", "jacobi"):
        spec = SmootherSpec(kind=kind, ordering="cf", omega_i=0.8, omega_o=0.9)
        got = sweep_matrix(A, spec, data)
        want = dense_smoother_matrix(A.dense(), kind, "cf", 0.8, 0.9, part, cf)
        assert np.allclose(got, want, atol=1e-13), kind


def test_off_block_reads_use_sweep_start_vector(rng):
    # hybrid GS with per-row blocks degenerates to damped Jacobi
    n = 8
    A = diag_dominant(rng, n)
    part = tuple((i, i + 1) for i in range(n))
    data = smoothers.precompute_relax_data(A, np.zeros(n, dtype=np.int8), part)
    data_j = smoothers.precompute_relax_data(A, np.zeros(n, dtype=np.int8), ((0, n),))
    b = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    gs = smoothers.relax_sweep(A, b, x0, SmootherSpec(kind="gs-fwd", omega_i=0.7), data)
    ja = smoothers.relax_sweep(A, b, x0, SmootherSpec(kind="jacobi", omega_i=0.7), data_j)
    assert np.allclose(gs, ja, atol=1e-14)


def test_jacobi_damps_high_frequencies():
    # 1D Poisson, 63 unknowns: damped Jacobi with omega 0.65 reduces every
    # upper-half sine mode by at least a factor 1 - 0.65 well below 1
    n = 63
    entries = [(i, i, 2.0) for i in range(n)]
    entries += [(i, i + 1, -1.0) for i in range(n - 1)]
    entries += [(i + 1, i, -1.0) for i in range(n - 1)]
    A = sparse.from_triplets(n, n, entries)
    data = smoothers.precompute_relax_data(A, np.zeros(n, dtype=np.int8), ((0, n),))
    spec = SmootherSpec(kind="jacobi", omega_i=0.65)
    idx = np.arange(1, n + 1)
    for k in range(32, n + 1):
        v = np.sin(np.pi * k * idx / (n + 1))
        out = smoothers.relax_sweep(A, np.zeros(n), v, spec, data)
        factor = np.linalg.norm(out) / np.linalg.norm(v)
        # analytic damping: |1 - 0.65 * lambda_k / 2| with lambda_k in [2, 4)
        lam = 2.0 - 2.0 * np.cos(np.pi * k / (n + 1))
        assert factor == pytest.approx(abs(1 - 0.65 * lam / 2), abs=1e-12)
        assert factor <= 0.36


def test_outer_weight_blends_with_start(rng):
    n = 6
    A = diag_dominant(rng, n)
    data = smoothers.precompute_relax_data(A, np.zeros(n, dtype=np.int8), ((0, n),))
    b = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    full = smoothers.relax_sweep(A, b, x0, SmootherSpec(kind="jacobi", omega_o=1.0), data)
    half = smoothers.relax_sweep(A, b, x0, SmootherSpec(kind="jacobi", omega_o=0.5), data)
    assert np.allclose(half, x0 + 0.5 * (full - x0), atol=1e-14)


def test_sweeps_compose(rng):
    n = 9
    A = diag_dominant(rng, n)
    cf = random_cf(rng, n)
    data = smoothers.precompute_relax_data(A, cf, ((0, 4), (4, n)))
    b = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    one = SmootherSpec(kind="l1-gs-fwd", ordering="cf", sweeps=1)
    three = SmootherSpec(kind="l1-gs-fwd", ordering="cf", sweeps=3)
    x = x0
    for _ in range(3):
        x = smoothers.relax_sweep(A, b, x, one, data)
    assert np.allclose(x, smoothers.relax_sweep(A, b, x0, three, data), atol=1e-13)


def test_relax_sweep_deterministic_and_pure(rng):
    n = 10
    A = diag_dominant(rng, n)
    data = smoothers.precompute_relax_data(A, random_cf(rng, n), ((0, 5), (5, n)))
    b = rng.standard_normal(n)
    x0 = rng.standard_normal(n)
    x0_copy = x0.copy()
    spec = SmootherSpec(kind="gs-bwd", ordering="fc", omega_i=1.15, omega_o=0.85)
    a = smoothers.relax_sweep(A, b, x0, spec, data)
    bb = smoothers.relax_sweep(A, b, x0, spec, data)
    assert np.array_equal(a, bb)
    assert np.array_equal(x0, x0_copy)  # input untouched
