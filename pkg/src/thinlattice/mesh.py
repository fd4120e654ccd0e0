"""Uniform Cartesian grids for the cross junction and the periodicity cell.

Grid points sit at integer multiples of the spacing ``h``; a point is stored
by its integer index triple ``(i1, i2, i3)`` so that all geometric tests are
exact integer comparisons.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridError",
    "JunctionGrid",
    "CellGrid",
    "PeriodicSeam",
    "build_junction_grid",
    "build_cell_grid",
    "reflect_node",
    "signed_permutation_map",
    "branch_coordinates",
    "BRANCH_AXES",
]

_RTOL = 1e-9

# Branch j = 1..6 points along +x1, +x2, +x3, -x1, -x2, -x3.
# Each entry is (axis of z_j, sign of z_j, (axis, sign) of y_j[0], (axis, sign) of y_j[1]).
BRANCH_AXES = (
    (0, +1, (1, +1), (2, +1)),
    (1, +1, (2, +1), (0, +1)),
    (2, +1, (0, +1), (1, +1)),
    (0, -1, (1, +1), (2, -1)),
    (1, -1, (2, +1), (0, -1)),
    (2, -1, (0, +1), (1, -1)),
)


class GridError(ValueError):
    """Raised when grid parameters violate the alignment preconditions."""


def _as_steps(length: float, h: float, what: str) -> int:
    ratio = length / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > _RTOL * max(1.0, abs(ratio)):
        raise GridError(f"{what} = {ratio!r} is not a positive integer (h = {h!r})")
    return n


def branch_coordinates(x: np.ndarray, branch: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Local coordinates ``(z_j, y_j)`` of points ``x`` (shape ``(..., 3)``) for branch 1..6."""
    axis, sign, (a1, s1), (a2, s2) = BRANCH_AXES[branch - 1]
    x = np.asarray(x, dtype=float)
    return sign * x[..., axis], s1 * x[..., a1], s2 * x[..., a2]


@dataclass(frozen=True, eq=False)
class JunctionGrid:
    """Grid on the truncated junction ``Omega^R`` (three crossing bars).

    Dofs are numbered with all strictly interior nodes first, followed by
    the nodes of the six cut faces Gamma_1..Gamma_6 in that order.  Dirichlet
    operators use only the interior block; Neumann and Robin operators use
    every dof.
    """

    R: float
    h: float
    n: int  # R / h
    m: int  # 1 / (2h)
    coords: np.ndarray  # (n_total, 3) integer indices
    n_interior: int
    face_nodes: tuple[np.ndarray, ...]
    lookup: np.ndarray  # (2n+1)^3 array, dof index or -1
    wall_mask: np.ndarray  # (2n+1)^3 bool, Dirichlet nodes of the closed domain

    @property
    def n_total(self) -> int:
        return self.coords.shape[0]

    @property
    def n_face(self) -> int:
        return self.n_total - self.n_interior

    @property
    def points(self) -> np.ndarray:
        return self.coords * self.h

    def node_index(self, ijk) -> int:
        """Dof index of the node with integer indices ``ijk`` or -1."""
        i = np.asarray(ijk, dtype=int) + self.n
        if np.any(i < 0) or np.any(i > 2 * self.n):
            return -1
        return int(self.lookup[tuple(i)])

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised ``node_index`` for an ``(N, 3)`` integer array."""
        c = np.asarray(coords, dtype=int) + self.n
        out = np.full(c.shape[0], -1, dtype=np.int64)
        ok = np.all((c >= 0) & (c <= 2 * self.n), axis=1)
        out[ok] = self.lookup[c[ok, 0], c[ok, 1], c[ok, 2]]
        return out

    def summary(self) -> dict:
        half = 0.5
        return {
            "kind": "junction",
            "R": self.R,
            "h": self.h,
            "n_interior": self.n_interior,
            "n_face_per_cut": [int(f.size) for f in self.face_nodes],
            "n_total": self.n_total,
            "n_wall": int(self.wall_mask.sum()),
            "bounding_boxes": [
                [[-self.R if k == j else -half for k in range(3)],
                 [self.R if k == j else half for k in range(3)]]
                for j in range(3)
            ],
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _junction_masks(n: int, m: int):
    ax = np.arange(-n, n + 1)
    i1, i2, i3 = np.meshgrid(ax, ax, ax, indexing="ij")
    a1, a2, a3 = np.abs(i1), np.abs(i2), np.abs(i3)
    interior = ((a1 < n) & (a2 < m) & (a3 < m)) | ((a2 < n) & (a1 < m) & (a3 < m)) | (
        (a3 < n) & (a1 < m) & (a2 < m)
    )
    closed = ((a2 <= m) & (a3 <= m)) | ((a1 <= m) & (a3 <= m)) | ((a1 <= m) & (a2 <= m))
    faces = []
    for axis, sign in ((0, 1), (1, 1), (2, 1), (0, -1), (1, -1), (2, -1)):
        idx = (i1, i2, i3)
        others = [idx[k] for k in range(3) if k != axis]
        faces.append((idx[axis] == sign * n) & (np.abs(others[0]) < m) & (np.abs(others[1]) < m))
    return (i1, i2, i3), interior, closed, faces


def build_junction_grid(R: float, h: float) -> JunctionGrid:
    """Grid of ``Omega^R = L_1^R u L_2^R u L_3^R`` with spacing ``h``.

    ``R/h`` and ``1/(2h)`` must be integers so that the bar walls, the
    junction cube and the cut faces all fall on grid planes.
    """
    if R < 0.5 - _RTOL:
        raise GridError(f"R = {R!r} must be >= 1/2")
    m = _as_steps(0.5, h, "1/(2h)")
    n = _as_steps(R, h, "R/h")
    (i1, i2, i3), interior, closed, faces = _junction_masks(n, m)

    blocks = [np.argwhere(interior) - n]
    blocks.extend(np.argwhere(f) - n for f in faces)
    coords = np.concatenate(blocks).astype(np.int64)
    n_interior = blocks[0].shape[0]

    lookup = np.full(interior.shape, -1, dtype=np.int64)
    c = coords + n
    lookup[c[:, 0], c[:, 1], c[:, 2]] = np.arange(coords.shape[0])

    face_nodes = []
    start = n_interior
    for b in blocks[1:]:
        face_nodes.append(np.arange(start, start + b.shape[0]))
        start += b.shape[0]

    any_face = np.zeros_like(interior)
    for f in faces:
        any_face |= f
    wall = closed & ~interior & ~any_face
    return JunctionGrid(
        R=float(R), h=float(h), n=n, m=m, coords=coords, n_interior=n_interior,
        face_nodes=tuple(face_nodes), lookup=lookup, wall_mask=wall,
    )


def signed_permutation_map(grid: JunctionGrid, perm=(0, 1, 2), signs=(1, 1, 1)) -> np.ndarray:
    """Dof permutation induced by ``x -> (signs[k] * x[perm[k]])_k``.

    Every such map is a symmetry of the grid, so the result is a bijection
    of ``range(grid.n_total)``.
    """
    c = grid.coords
    image = np.stack([signs[k] * c[:, perm[k]] for k in range(3)], axis=1)
    out = grid.index_of(image)
    if np.any(out < 0):
        raise GridError("transformation does not map the grid onto itself")
    return out


def reflect_node(grid: JunctionGrid, node: int, plane: int) -> int:
    """Mirror of dof ``node`` across the coordinate plane ``x_plane = 0``.

    ``plane`` is the axis normal to the mirror: 0 for (Ox2x3), 1 for
    (Ox3x1), 2 for (Ox1x2).
    """
    ijk = grid.coords[node].copy()
    ijk[plane] = -ijk[plane]
    return grid.node_index(ijk)


@dataclass(frozen=True, eq=False)
class PeriodicSeam:
    """Matched nodes of the faces ``x_axis = -1/2`` and ``x_axis = +1/2``.

    ``minus_coords`` are the (eliminated) nodes on the ``-1/2`` face;
    ``plus_dofs`` are the dof indices of their partners on the ``+1/2`` face.
    """

    axis: int
    minus_coords: np.ndarray
    plus_dofs: np.ndarray

    def __len__(self) -> int:
        return int(self.plus_dofs.size)


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Grid of the periodicity cell ``omega^eps`` with quasi-periodic faces.

    Integer indices run over the canonical range ``(-N/2, N/2]`` per axis,
    ``N = 1/h``; the ``-1/2`` faces are represented through their partners.
    """

    eps: float
    h: float
    N: int
    w: int  # eps / (2h)
    coords: np.ndarray
    lookup: np.ndarray  # indexed by i + N/2 - 1
    periodic_pairs: tuple[PeriodicSeam, PeriodicSeam, PeriodicSeam]

    @property
    def n_total(self) -> int:
        return self.coords.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.coords * self.h

    def node_index(self, ijk) -> int:
        i = np.asarray(ijk, dtype=int) + self.N // 2 - 1
        if np.any(i < 0) or np.any(i >= self.N):
            return -1
        return int(self.lookup[tuple(i)])

    def summary(self) -> dict:
        return {
            "kind": "cell",
            "eps": self.eps,
            "h": self.h,
            "n_total": self.n_total,
            "periodic_pairs": [len(s) for s in self.periodic_pairs],
        }


def build_cell_grid(eps: float, h: float) -> CellGrid:
    """Grid of ``omega^eps`` (three bars of width ``eps`` in the unit cell)."""
    if not 0.0 < eps < 1.0:
        raise GridError(f"eps = {eps!r} must lie in (0, 1)")
    w = _as_steps(eps / 2, h, "eps/(2h)")
    half = _as_steps(0.5, h, "1/(2h)")
    N = 2 * half
    ax = np.arange(-half + 1, half + 1)
    i1, i2, i3 = np.meshgrid(ax, ax, ax, indexing="ij")
    a1, a2, a3 = np.abs(i1), np.abs(i2), np.abs(i3)
    inside = ((a2 < w) & (a3 < w)) | ((a1 < w) & (a3 < w)) | ((a1 < w) & (a2 < w))
    coords = (np.argwhere(inside) - half + 1).astype(np.int64)
    lookup = np.full(inside.shape, -1, dtype=np.int64)
    c = coords + half - 1
    lookup[c[:, 0], c[:, 1], c[:, 2]] = np.arange(coords.shape[0])

    seams = []
    for axis in range(3):
        plus = np.flatnonzero(coords[:, axis] == half)
        minus = coords[plus].copy()
        minus[:, axis] = -half
        seams.append(PeriodicSeam(axis=axis, minus_coords=minus, plus_dofs=plus))
    return CellGrid(
        eps=float(eps), h=float(h), N=N, w=w, coords=coords, lookup=lookup,
        periodic_pairs=tuple(seams),
    )
