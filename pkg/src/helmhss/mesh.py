"""Uniform right-triangulated meshes of the unit square.

Vertices are numbered lexicographically, ``v = iy*(n+1) + ix``, with
coordinates computed as ``i/n`` so that nested meshes share bit-identical
vertex coordinates. Each lattice square is split along the diagonal from
its lower-left to its upper-right corner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    n: int
    vertices: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)
    boundary_edges: np.ndarray = field(repr=False)
    edge_lengths: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def cell_areas(self) -> np.ndarray:
        """Signed areas of all cells (positive for counter-clockwise)."""
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_vertices(self) -> np.ndarray:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return np.flatnonzero((x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0))


@dataclass(frozen=True)
class MeshHierarchy:
    levels: tuple

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    @property
    def finest(self) -> Mesh:
        return self.levels[-1]

    @property
    def coarsest(self) -> Mesh:
        return self.levels[0]


@dataclass(frozen=True)
class DofMap:
    """Cell-to-dof connectivity for the CG1 or (DG0)^2 space on a mesh.

    DG0 vector dofs are interleaved: cell ``c`` owns ``2c`` (x-component)
    and ``2c+1`` (y-component).
    """

    space: str
    size: int
    cell_dofs: np.ndarray = field(repr=False)


def build_mesh(n: int) -> Mesh:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"cells per direction must be a positive integer, got {n!r}")
    n = int(n)
    idx = np.arange(n + 1)
    coords = idx / n
    iy, ix = np.meshgrid(idx, idx, indexing="ij")
    vertices = np.column_stack([coords[ix.ravel()], coords[iy.ravel()]])

    sx, sy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (sy * (n + 1) + sx).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([v00, v10, v11])
    cells[1::2] = np.column_stack([v00, v11, v01])

    # counter-clockwise walk: bottom, right, top, left
    bottom = np.column_stack([idx[:-1], idx[1:]])
    right = np.column_stack([idx[:-1] * (n + 1) + n, idx[1:] * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + idx[1:], n * (n + 1) + idx[:-1]])
    left = np.column_stack([idx[1:] * (n + 1), idx[:-1] * (n + 1)])
    edges = np.vstack([bottom, right, top, left]).astype(np.int64)
    lengths = np.full(edges.shape[0], 1.0 / n)
    return Mesh(n, vertices, cells, edges, lengths)


def build_hierarchy(n_fine: int, levels: int) -> MeshHierarchy:
    """Nested meshes from coarsest to finest, halving resolution per level."""
    if levels < 1:
        raise ValueError(f"need at least one level, got {levels}")
    factor = 2 ** (levels - 1)
    if n_fine < 1 or n_fine % factor != 0:
        raise ValueError(
            f"n_fine={n_fine} is not divisible by 2**(levels-1)={factor}; "
            f"cannot coarsen {levels - 1} times"
        )
    n_coarse = n_fine // factor
    return MeshHierarchy(tuple(build_mesh(n_coarse * 2**i) for i in range(levels)))


def resolution_for(k: float, c0: float = 1.0, levels: int = 1) -> int:
    """Cells per direction ``ceil(c0 k^1.5)``, rounded up to a multiple of 2^(levels-1)."""
    if k < 1 or c0 <= 0:
        raise ValueError(f"need k >= 1 and c0 > 0, got k={k}, c0={c0}")
    # slack absorbs k**1.5 landing a few ulps above an integer
    n = math.ceil(c0 * k**1.5 - 1e-9)
    factor = 2 ** (max(levels, 1) - 1)
    return -(-n // factor) * factor


def cg1_dofmap(mesh: Mesh) -> DofMap:
    return DofMap("CG1", mesh.num_vertices, mesh.cells)


def dg0_vector_dofmap(mesh: Mesh) -> DofMap:
    c = np.arange(mesh.num_cells)
    return DofMap("DG0^2", 2 * mesh.num_cells, np.column_stack([2 * c, 2 * c + 1]))
