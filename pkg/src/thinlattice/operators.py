"""Finite-difference operators on junction and cell grids.

All operators are stored in "stencil units": the matrix is the discrete
energy form divided by ``h**3`` and the mass matrix is ``diag(weights)``,
with weight 1 on interior nodes and 1/2 on cut-face nodes (half dual cells).
The discrete L2 inner product is therefore ``h**3 * sum(weights * u * conj(v))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import CellGrid, JunctionGrid, branch_coordinates

__all__ = [
    "SparseOperator",
    "THRESHOLD",
    "discrete_threshold",
    "u_dagger",
    "incoming_wave",
    "outgoing_wave",
    "assemble_dirichlet",
    "assemble_mixed",
    "assemble_robin_scattering",
    "assemble_floquet",
    "write_matrix_market",
    "read_matrix_market",
]

THRESHOLD = 2.0 * np.pi**2

_NEIGHBOURS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64
)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Sparse matrix plus the diagonal mass weights of its dofs."""

    matrix: sp.csr_matrix
    weights: np.ndarray
    h: float
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def scalar_kind(self) -> str:
        return "complex" if np.iscomplexobj(self.matrix.data) else "real"

    @property
    def mass(self) -> np.ndarray:
        """Quadrature weight of each dof (``h**3`` times the relative weight)."""
        return self.h**3 * self.weights

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.sum(self.mass * u * np.conj(v)))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.mass * np.abs(u) ** 2)))

    def symmetry_defect(self) -> float:
        d = self.matrix - self.matrix.T
        return float(abs(d).max()) if d.nnz else 0.0

    def hermitian_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0


def discrete_threshold(h: float) -> float:
    """Lowest eigenvalue of the 5-point Dirichlet Laplacian on the unit square.

    This is the grid analogue of ``2 pi^2``; at this frequency the discrete
    guided mode along a bar is exactly linear in the axial coordinate.
    """
    return 4.0 / h**2 * (1.0 - np.cos(np.pi * h))


def u_dagger(s1, s2):
    """Normalised first cross-section mode ``2 cos(pi s1) cos(pi s2)``."""
    return 2.0 * np.cos(np.pi * np.asarray(s1)) * np.cos(np.pi * np.asarray(s2))


def incoming_wave(x: np.ndarray, branch: int) -> np.ndarray:
    """``w_j^-(x) = (z_j + i)/sqrt(2) U_dagger(y_j)``."""
    z, y1, y2 = branch_coordinates(x, branch)
    return (z + 1j) / np.sqrt(2.0) * u_dagger(y1, y2)


def outgoing_wave(x: np.ndarray, branch: int) -> np.ndarray:
    """``w_j^+(x) = (z_j - i)/sqrt(2) U_dagger(y_j)``."""
    z, y1, y2 = branch_coordinates(x, branch)
    return (z - 1j) / np.sqrt(2.0) * u_dagger(y1, y2)


def _stencil(grid: JunctionGrid, n_dofs: int):
    """Edge list of the energy form restricted to the first ``n_dofs`` dofs.

    Returns COO triplets and the relative mass weights.  Interior nodes own
    all six edges with weight 1; cut-face nodes own the inward edge with
    weight 1 and the four in-plane edges with weight 1/2.
    """
    h2 = grid.h**2
    coords = grid.coords[:n_dofs]
    weights = np.ones(n_dofs)
    weights[grid.n_interior:] = 0.5

    rows, cols, vals = [], [], []
    diag = np.zeros(n_dofs)
    face_axis = np.full(n_dofs, -1)
    face_sign = np.zeros(n_dofs, dtype=np.int64)
    for j, nodes in enumerate(grid.face_nodes):
        nodes = nodes[nodes < n_dofs]
        face_axis[nodes] = j % 3
        face_sign[nodes] = 1 if j < 3 else -1

    for d in _NEIGHBOURS:
        axis = int(np.flatnonzero(d)[0])
        step = int(d[axis])
        w = np.ones(n_dofs)
        on_face = face_axis >= 0
        outward = on_face & (face_axis == axis) & (face_sign == step)
        in_plane = on_face & (face_axis != axis)
        w[outward] = 0.0
        w[in_plane] = 0.5
        diag += w
        nb = grid.index_of(coords + d)
        keep = (nb >= 0) & (nb < n_dofs) & (w > 0)
        rows.append(np.flatnonzero(keep))
        cols.append(nb[keep])
        vals.append(-w[keep])
    rows.append(np.arange(n_dofs))
    cols.append(np.arange(n_dofs))
    vals.append(diag)
    return (
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(vals) / h2,
        weights,
    )


def assemble_dirichlet(grid: JunctionGrid) -> SparseOperator:
    """7-point Dirichlet Laplacian on the interior nodes (cuts are Dirichlet too)."""
    n = grid.n_interior
    r, c, v, w = _stencil(grid, n)
    A = sp.csr_matrix((v, (r, c)), shape=(n, n))
    A.sum_duplicates()
    return SparseOperator(A, w, grid.h, "dirichlet", {"R": grid.R})


def assemble_mixed(grid: JunctionGrid) -> SparseOperator:
    """Dirichlet on the bar walls, homogeneous Neumann on the six cut faces.

    The Neumann rows come from ghost-node reflection scaled by 1/2, which
    keeps the matrix symmetric with mass weight 1/2 on face nodes.
    """
    n = grid.n_total
    r, c, v, w = _stencil(grid, n)
    A = sp.csr_matrix((v, (r, c)), shape=(n, n))
    A.sum_duplicates()
    return SparseOperator(A, w, grid.h, "mixed", {"R": grid.R})


def assemble_robin_scattering(
    grid: JunctionGrid,
    R: float | None = None,
    spectral_parameter: float | None = None,
    source_branch: int = 1,
) -> tuple[SparseOperator, np.ndarray]:
    """Threshold scattering system with Robin radiation conditions.

    Discretises, in stencil units,
    ``(grad v, grad phi) - (R - i)^-1 (v, phi)_Gamma - Lambda (v, phi)
    = -2i/(R^2 + 1) (w_j^-, phi)_{Gamma_j}``.
    ``spectral_parameter`` defaults to :func:`discrete_threshold`; pass
    ``THRESHOLD`` to use ``2 pi^2`` literally.
    """
    R = grid.R if R is None else float(R)
    if abs(R - grid.R) > 1e-12:
        raise ValueError(f"R = {R} does not match the grid (R = {grid.R})")
    lam = discrete_threshold(grid.h) if spectral_parameter is None else float(spectral_parameter)
    stiff = assemble_mixed(grid)
    n = grid.n_total
    face = np.zeros(n)
    face[grid.n_interior:] = 1.0
    robin = face / (grid.h * (R - 1j))
    A = (stiff.matrix.astype(complex) - sp.diags(robin + lam * stiff.weights)).tocsr()
    A.sum_duplicates()

    rhs = np.zeros(n, dtype=complex)
    nodes = grid.face_nodes[source_branch - 1]
    w_in = incoming_wave(grid.points[nodes], source_branch)
    rhs[nodes] = -2j / (R**2 + 1) * w_in / grid.h
    op = SparseOperator(
        A, stiff.weights, grid.h, "robin",
        {"R": R, "spectral_parameter": lam, "source_branch": source_branch},
    )
    return op, rhs


def assemble_floquet(grid: CellGrid, eta) -> SparseOperator:
    """Quasi-periodic Laplacian on the cell: ``U(-1/2) = e^{i eta_j} U(+1/2)``.

    Neighbours outside the canonical range are folded back with the Bloch
    phase; the result is Hermitian and real when ``eta == 0``.
    """
    eta = np.asarray(eta, dtype=float).reshape(3)
    half = grid.N // 2
    coords = grid.coords
    n = grid.n_total
    h2 = grid.h**2
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 6.0 / h2, dtype=complex)]
    for d in _NEIGHBOURS:
        nb = coords + d
        phase = np.ones(n, dtype=complex)
        for axis in range(3):
            hi = nb[:, axis] > half
            lo = nb[:, axis] <= -half
            nb[hi, axis] -= grid.N
            nb[lo, axis] += grid.N
            # U(x + e_j) = e^{-i eta_j} U(x)
            phase[hi] *= np.exp(-1j * eta[axis])
            phase[lo] *= np.exp(1j * eta[axis])
        idx = np.full(n, -1, dtype=np.int64)
        c = nb + half - 1
        ok = np.all((c >= 0) & (c < grid.N), axis=1)
        idx[ok] = grid.lookup[c[ok, 0], c[ok, 1], c[ok, 2]]
        keep = idx >= 0
        rows.append(np.flatnonzero(keep))
        cols.append(idx[keep])
        vals.append(-phase[keep] / h2)
    data = np.concatenate(vals)
    if not np.any(data.imag):
        data = data.real
    A = sp.csr_matrix((data, (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A.sum_duplicates()
    return SparseOperator(A, np.ones(n), grid.h, "floquet", {"eps": grid.eps, "eta": eta.tolist()})


def write_matrix_market(op: SparseOperator | sp.spmatrix, path) -> None:
    """Write in coordinate format with 17 significant digits (lossless)."""
    A = op.matrix if isinstance(op, SparseOperator) else op
    comment = ""
    if isinstance(op, SparseOperator):
        comment = f" kind={op.kind} h={op.h!r}"
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))
