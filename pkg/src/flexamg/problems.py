"""Deterministic generators for the linear systems used to design and
benchmark solvers.

``poisson_2d`` and ``anisotropic_2d`` are finite-difference model problems;
``coupled_thermoelastic_2d`` assembles a linearized plane-strain Q1 analogue of
a coupled displacement-temperature system for a heated steel plate: the
elasticity block is coupled to the heat equation through the thermal expansion
of the material, with a hot Dirichlet strip standing in for the melting region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sparse
from .sparse import SparseMatrix


class ParameterError(ValueError):
    """Raised for out-of-range generator parameters."""


@dataclass(frozen=True)
class MaterialParams:
    """Material constants for austenitic chrome-nickel steel (1.4301) at 20 C.

    Units follow the data sheet verbatim (mm, N, W/(m*K), J/(kg*K)); no unit
    normalization is applied, so the assembled blocks are badly scaled on
    purpose.
    """

    E: float = 20.0e4           # Young's modulus [N/mm^2]
    nu: float = 0.271           # Poisson ratio
    alpha_T: float = 1.6e-5     # thermal expansion [1/K]
    lambda_cond: float = 15.6   # thermal conductivity [W/(m*K)]
    c_rho: float = 5.11e5       # heat capacity [J/(kg*K)]
    theta0: float = 20.0        # initial temperature [C]
    theta_l: float = 1460.0     # pool temperature [C]
    dt: float = 0.1             # time step [s]

    def __post_init__(self):
        if self.E <= 0:
            raise ParameterError("E must be positive")
        if not 0 < self.nu < 0.5:
            raise ParameterError("nu must lie in (0, 0.5)")
        if self.dt <= 0:
            raise ParameterError("dt must be positive")
        if self.theta_l <= self.theta0:
            raise ParameterError("theta_l must exceed theta0")

    @property
    def kappa(self) -> float:
        """Bulk modulus E / (3 (1 - 2 nu))."""
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))

    @property
    def mu(self) -> float:
        """Shear modulus E / (2 (1 + nu))."""
        return self.E / (2.0 * (1.0 + self.nu))


@dataclass(frozen=True)
class ProblemInstance:
    matrix: SparseMatrix
    rhs: np.ndarray
    row_partition: tuple[tuple[int, int], ...]
    # index arrays (displacement rows, temperature rows) for coupled systems
    dof_blocks: tuple[np.ndarray, np.ndarray] | None = None
    name: str = ""
    params: dict = field(default_factory=dict)


def partition_blocks(n_rows: int, p: int) -> tuple[tuple[int, int], ...]:
    """Split [0, n_rows) into p contiguous near-equal ranges (sizes differ by <= 1)."""
    if not 1 <= p <= n_rows:
        raise ParameterError(f"block count {p} out of range for {n_rows} rows")
    base, extra = divmod(n_rows, p)
    ranges = []
    start = 0
    for i in range(p):
        size = base + (1 if i < extra else 0)
        ranges.append((start, start + size))
        start += size
    return tuple(ranges)


def anisotropic_2d(n: int, epsilon: float, p: int = 8) -> ProblemInstance:
    """5-point discretization of -u_xx - eps*u_yy on the unit square.

    Homogeneous Dirichlet boundaries are eliminated; unknowns are the
    (n-2)^2 interior points of an n x n grid, rhs is constant forcing 1
    scaled by h^2.
    """
    if n < 3:
        raise ParameterError("n must be >= 3")
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    m = n - 2
    h = 1.0 / (n - 1)
    idx = np.arange(m * m).reshape(m, m)  # idx[iy, ix]
    entries = []
    diag = 2.0 + 2.0 * epsilon
    for iy in range(m):
        for ix in range(m):
            i = idx[iy, ix]
            entries.append((i, i, diag))
            if ix > 0:
                entries.append((i, idx[iy, ix - 1], -1.0))
            if ix < m - 1:
                entries.append((i, idx[iy, ix + 1], -1.0))
            if iy > 0:
                entries.append((i, idx[iy - 1, ix], -epsilon))
            if iy < m - 1:
                entries.append((i, idx[iy + 1, ix], -epsilon))
    A = sparse.from_triplets(m * m, m * m, entries)
    rhs = np.full(m * m, h * h)
    part = partition_blocks(m * m, min(p, m * m))
    return ProblemInstance(
        matrix=A, rhs=rhs, row_partition=part,
        name="anisotropic_2d", params={"n": n, "epsilon": epsilon, "blocks": p},
    )


def poisson_2d(n: int, p: int = 8) -> ProblemInstance:
    """Standard 5-point Laplacian on the unit square (anisotropic_2d with eps=1)."""
    inst = anisotropic_2d(n, 1.0, p=p)
    return ProblemInstance(
        matrix=inst.matrix, rhs=inst.rhs, row_partition=inst.row_partition,
        name="poisson_2d", params={"n": n, "blocks": p},
    )


def _gauss_points():
    g = 1.0 / np.sqrt(3.0)
    return [(-g, -g), (g, -g), (g, g), (-g, g)]


def _q1_shape(xi, eta):
    # node order: (-1,-1), (1,-1), (1,1), (-1,1)
    N = 0.25 * np.array([
        (1 - xi) * (1 - eta),
        (1 + xi) * (1 - eta),
        (1 + xi) * (1 + eta),
        (1 - xi) * (1 + eta),
    ])
    dN_dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    dN_deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return N, dN_dxi, dN_deta


def coupled_thermoelastic_2d(
    nx: int, ny: int, mat: MaterialParams | None = None,
    lx: float = 100.0, ly: float = 30.0, p: int = 8,
) -> ProblemInstance:
    """Linearized plane-strain thermo-elastic system on an nx x ny quad mesh.

    Unknowns per node: (ux, uy, theta), interleaved. The system is linearized
    at theta = theta0 with zero strain rate, which keeps the
    temperature-displacement coupling block nonzero (the theta0 factor) while
    dropping the strain-rate mass term. Dirichlet data: u = 0 on the faces
    y = 0 and y = ly; theta = theta_l on a strip of two node columns centered
    at x = lx/2 (the emulated melting pool). Eliminated rows/columns produce
    the right-hand side as a Dirichlet lift.
    """
    if nx < 2 or ny < 2:
        raise ParameterError("need at least 2x2 elements")
    mat = mat or MaterialParams()

    nnx, nny = nx + 1, ny + 1
    n_nodes = nnx * nny
    ndof = 3 * n_nodes

    def node(ix, iy):
        return iy * nnx + ix

    dx, dy = lx / nx, ly / ny
    jac = np.array([[dx / 2, 0.0], [0.0, dy / 2]])
    det_j = dx * dy / 4.0
    inv_j = np.linalg.inv(jac)

    kappa, mu = mat.kappa, mat.mu
    gamma = 3.0 * mat.alpha_T * kappa  # stress-temperature modulus
    # plane-strain elasticity matrix from kappa*1x1 + 2*mu*deviatoric
    C = np.array([
        [kappa + 4 * mu / 3, kappa - 2 * mu / 3, 0.0],
        [kappa - 2 * mu / 3, kappa + 4 * mu / 3, 0.0],
        [0.0, 0.0, mu],
    ])
    m_voigt = np.array([1.0, 1.0, 0.0])

    # element matrices (constant geometry, assemble once)
    Kuu = np.zeros((8, 8))
    Kut = np.zeros((8, 4))
    Ktu = np.zeros((4, 8))
    Ktt = np.zeros((4, 4))
    for xi, eta in _gauss_points():
        N, dN_dxi, dN_deta = _q1_shape(xi, eta)
        grads = inv_j @ np.vstack([dN_dxi, dN_deta])  # 2x4: d/dx, d/dy
        Bu = np.zeros((3, 8))
        Bu[0, 0::2] = grads[0]
        Bu[1, 1::2] = grads[1]
        Bu[2, 0::2] = grads[1]
        Bu[2, 1::2] = grads[0]
        Bt = grads  # 2x4
        Kuu += det_j * (Bu.T @ C @ Bu)
        Kut += -det_j * gamma * np.outer(Bu.T @ m_voigt, N)
        Ktu += -(mat.theta0 / mat.dt) * det_j * gamma * np.outer(N, m_voigt @ Bu)
        Ktt += -det_j * (mat.lambda_cond * (Bt.T @ Bt)
                         + (mat.c_rho / mat.dt) * np.outer(N, N))

    rows, cols, vals = [], [], []

    def add(block, rdofs, cdofs):
        for a, rd in enumerate(rdofs):
            for b_, cd in enumerate(cdofs):
                v = block[a, b_]
                if v != 0.0:
                    rows.append(rd)
                    cols.append(cd)
                    vals.append(v)

    for ey in range(ny):
        for ex in range(nx):
            nd = [node(ex, ey), node(ex + 1, ey), node(ex + 1, ey + 1), node(ex, ey + 1)]
            udofs = []
            for nn in nd:
                udofs += [3 * nn, 3 * nn + 1]
            tdofs = [3 * nn + 2 for nn in nd]
            add(Kuu, udofs, udofs)
            add(Kut, udofs, tdofs)
            add(Ktu, tdofs, udofs)
            add(Ktt, tdofs, tdofs)

    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()

    # Dirichlet sets
    dirichlet = np.zeros(ndof, dtype=bool)
    gvals = np.zeros(ndof)
    for ix in range(nnx):
        for iy in (0, nny - 1):
            nn = node(ix, iy)
            dirichlet[3 * nn] = True
            dirichlet[3 * nn + 1] = True
    strip = (nx // 2, nx // 2 + 1)
    for ix in strip:
        for iy in range(nny):
            nn = node(ix, iy)
            dirichlet[3 * nn + 2] = True
            gvals[3 * nn + 2] = mat.theta_l

    free = np.where(~dirichlet)[0]
    if len(free) == 0:
        raise ParameterError("degenerate mesh: all degrees of freedom constrained")
    free_u = free[free % 3 != 2]
    free_t = free[free % 3 == 2]
    if len(free_u) == 0 or len(free_t) == 0:
        raise ParameterError("degenerate mesh: a whole field is constrained")

    rhs_full = -K @ gvals
    A = K[free][:, free]
    rhs = rhs_full[free]

    # positions of u/theta rows in the reduced numbering
    kind = free % 3
    u_rows = np.where(kind != 2)[0]
    t_rows = np.where(kind == 2)[0]

    n = len(free)
    part = partition_blocks(n, min(p, n))
    return ProblemInstance(
        matrix=sparse.from_scipy(A), rhs=rhs, row_partition=part,
        dof_blocks=(u_rows, t_rows),
        name="coupled_thermoelastic_2d",
        params={"nx": nx, "ny": ny, "lx": lx, "ly": ly, "blocks": p},
    )


_GENERATORS = {
    "poisson_2d": lambda cfg: poisson_2d(
        int(cfg.get("n", 33)), p=int(cfg.get("blocks", 8))),
    "anisotropic_2d": lambda cfg: anisotropic_2d(
        int(cfg.get("n", 33)), float(cfg.get("epsilon", 0.001)),
        p=int(cfg.get("blocks", 8))),
    "coupled_thermoelastic_2d": lambda cfg: coupled_thermoelastic_2d(
        int(cfg.get("nx", 16)), int(cfg.get("ny", 8)),
        p=int(cfg.get("blocks", 8))),
}


def from_config(cfg: dict) -> ProblemInstance:
    """Build a problem from a textual config: {'problem': name, ...params}."""
    name = cfg.get("problem")
    if name not in _GENERATORS:
        raise ParameterError(f"unknown problem {name!r}; choose from {sorted(_GENERATORS)}")
    return _GENERATORS[name](cfg)
