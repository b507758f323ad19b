"""Structured triangulation of the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform mesh of (0,1)^2 with ``2 n^2`` right triangles.

    Nodes are numbered row by row (``index = j*(n+1) + i`` for the node at
    ``(i/n, j/n)``). Every cell is cut along its bottom-left to top-right
    diagonal, and all triangles are counterclockwise.
    """

    n: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.nodes[:, 1]

    def triangle_areas(self) -> np.ndarray:
        """Signed areas; positive for counterclockwise triangles."""
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def node_index(self, i: int, j: int) -> int:
        return j * (self.n + 1) + i


def build_unit_square_mesh(n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"mesh subdivision n must be a positive integer, got {n!r}")
    n = int(n)
    ticks = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ticks, ticks)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    sw = (j * (n + 1) + i).ravel()
    se = sw + 1
    ne = sw + n + 2
    nw = sw + n + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    col = np.tile(np.arange(n + 1), n + 1)
    row = np.repeat(np.arange(n + 1), n + 1)
    boundary = (col == 0) | (col == n) | (row == 0) | (row == n)

    for arr in (nodes, triangles, boundary):
        arr.setflags(write=False)
    return Mesh(n=n, nodes=nodes, triangles=triangles, boundary_mask=boundary)


def interior_nodes(mesh: Mesh) -> np.ndarray:
    return np.flatnonzero(~mesh.boundary_mask)


def boundary_nodes(mesh: Mesh) -> np.ndarray:
    return np.flatnonzero(mesh.boundary_mask)
