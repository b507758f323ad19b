"""P1 finite elements on a :class:`~pme_inverse.mesh.Mesh`.

Stiffness matrices are ``scipy.sparse.csr_matrix`` objects with sorted column
indices. The mass matrix is always lumped (vertex quadrature), so it is just a
vector of nodal weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, boundary_nodes, interior_nodes

RTOL = 1e-10
ATOL = 1e-14

NORMS = ("l1", "l2", "linf")


class SolverError(RuntimeError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a P1 function."""

    mesh: Mesh
    values: np.ndarray
    name: str = field(default="")

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.num_nodes,):
            raise ValueError(
                f"field has {values.size} values but the mesh has {self.mesh.num_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"field {self.name!r} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values, name: str | None = None) -> "ScalarField":
        return ScalarField(self.mesh, values, self.name if name is None else name)


def _gradients(mesh: Mesh):
    """Constant gradients of the three hat functions on every triangle.

    Returns ``(grads, areas)`` with ``grads`` of shape (n_tri, 3, 2).
    """
    p = mesh.nodes[mesh.triangles]
    areas = mesh.triangle_areas()
    # grad phi_i = rot90(p_k - p_j) / (2A) for (i, j, k) cyclic
    edges = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / (2.0 * areas)[:, None, None]
    return grads, areas


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    grads, areas = _gradients(mesh)
    local = np.einsum("tid,tjd->tij", grads, grads) * areas[:, None, None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.num_nodes
    K = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    # cancellation leaves ~1e-16 on hypotenuse couplings; those are exact zeros
    K.data[np.abs(K.data) < 1e-12 * np.abs(K.data).max()] = 0.0
    K.eliminate_zeros()
    K.sort_indices()
    return K


def assemble_lumped_mass(mesh: Mesh) -> np.ndarray:
    areas = mesh.triangle_areas()
    weights = np.zeros(mesh.num_nodes)
    np.add.at(weights, mesh.triangles.ravel(), np.repeat(areas / 3.0, 3))
    return weights


def _checked_solve(A: sp.spmatrix, b: np.ndarray, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    if A.shape[0] == 0:
        return np.zeros(0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    A = A.tocsc()
    tol = max(rtol * bnorm, atol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.MatrixRankWarning)
        x = np.atleast_1d(spla.spsolve(A, b))
        r = b - A @ x
        if not np.all(np.isfinite(x)) or np.linalg.norm(r) > tol:
            # one round of iterative refinement before giving up
            x = x + np.atleast_1d(spla.spsolve(A, r))
            r = b - A @ x
        res = np.linalg.norm(r)
        if not np.all(np.isfinite(x)) or res > tol:
            raise SolverError("linear solve failed to converge", float(res))
    return x


def solve_dirichlet_system(A, b, boundary, boundary_values) -> np.ndarray:
    """Solve ``A x = b`` with ``x`` prescribed on ``boundary``.

    The boundary rows and columns are eliminated and the interior block is
    solved directly. Raises :class:`SolverError` if the relative residual of
    the reduced system exceeds ``RTOL``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    g = np.asarray(boundary_values, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,) or g.shape != (n,):
        raise ValueError("A must be square and match b and boundary_values")
    is_bd = np.zeros(n, dtype=bool)
    is_bd[np.asarray(boundary, dtype=np.int64)] = True
    inner = np.flatnonzero(~is_bd)
    bd = np.flatnonzero(is_bd)

    x = np.zeros(n)
    x[bd] = g[bd]
    rhs = b[inner] - A[inner][:, bd] @ g[bd]
    x[inner] = _checked_solve(A[inner][:, inner], rhs)
    return x


class PoissonSolver:
    """Factorized discrete ``(-Delta)^{-1}`` with zero Dirichlet data.

    Reuse one instance when many sources are mapped on the same mesh.
    """

    def __init__(self, mesh: Mesh, stiffness=None, mass=None):
        self.mesh = mesh
        self.stiffness = assemble_stiffness(mesh) if stiffness is None else stiffness
        self.mass = assemble_lumped_mass(mesh) if mass is None else mass
        self.inner = interior_nodes(mesh)
        self._K = self.stiffness[self.inner][:, self.inner].tocsc()
        self._lu = spla.splu(self._K) if self.inner.size else None

    def solve_values(self, source: np.ndarray) -> np.ndarray:
        rhs = (self.mass * source)[self.inner]
        w = np.zeros(self.mesh.num_nodes)
        if self._lu is None:
            return w
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            return w
        x = self._lu.solve(rhs)
        res = np.linalg.norm(rhs - self._K @ x)
        if not np.all(np.isfinite(x)) or res > max(RTOL * bnorm, ATOL):
            x = _checked_solve(self._K, rhs)
        w[self.inner] = x
        return w

    def solve(self, source: ScalarField, name: str = "w") -> ScalarField:
        return ScalarField(self.mesh, self.solve_values(source.values), name)


def solve_poisson(mesh: Mesh, source: ScalarField) -> ScalarField:
    """Return w with ``-Delta w = source`` in the lumped P1 sense, w = 0 on the boundary."""
    if source.mesh is not mesh:
        raise ValueError("source is defined on a different mesh")
    K = assemble_stiffness(mesh)
    M = assemble_lumped_mass(mesh)
    w = solve_dirichlet_system(K, M * source.values, boundary_nodes(mesh), np.zeros(mesh.num_nodes))
    return ScalarField(mesh, w, "w")


def field_norm(field, mass: np.ndarray, which: str = "l1") -> float:
    """Vertex-quadrature norm of a nodal field (``l1``, ``l2`` or ``linf``)."""
    v = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
    which = which.lower()
    if which == "l1":
        return float(np.dot(mass, np.abs(v)))
    if which == "l2":
        return float(np.sqrt(np.dot(mass, v * v)))
    if which == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unknown norm {which!r}; expected one of {NORMS}")
