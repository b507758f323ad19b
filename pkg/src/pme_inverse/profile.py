"""Stationary profile of the porous medium equation.

The profile ``f`` is the positive solution of ``-Delta f^gamma = f/(gamma-1)``
with ``f = 0`` on the boundary. ``(tau + t)^(-1/(gamma-1)) f`` then solves the
time-dependent problem exactly, which makes it the reference solution for the
forward solver and the source of synthetic late-time measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import PoissonSolver, ScalarField
from .mesh import Mesh, interior_nodes


class ProfileNotConverged(RuntimeError):
    def __init__(self, iterations: int, change: float, residual: float):
        super().__init__(
            f"profile iteration did not converge after {iterations} iterations "
            f"(last relative change {change:.3e}, relative defect {residual:.3e})"
        )
        self.iterations = iterations
        self.change = change
        self.residual = residual


@dataclass(frozen=True, eq=False)
class ProfileResult:
    f: ScalarField
    gamma: float
    iterations: int
    residual: float
    change: float

    @property
    def mesh(self) -> Mesh:
        return self.f.mesh


def _root(v: np.ndarray, gamma: float) -> np.ndarray:
    return np.maximum(v, 0.0) ** (1.0 / gamma)


def profile_defect(solver: PoissonSolver, v: np.ndarray, gamma: float) -> float:
    """Relative interior defect ``|K v - M f/(gamma-1)| / |M f/(gamma-1)|`` with ``f = v^(1/gamma)``."""
    inner = solver.inner
    load = (solver.mass * _root(v, gamma) / (gamma - 1.0))[inner]
    defect = solver.stiffness[inner] @ v - load
    scale = np.linalg.norm(load)
    return float(np.linalg.norm(defect) / scale) if scale > 0 else 0.0


def solve_profile(mesh: Mesh, gamma: float, tol: float = 1e-10, max_iter: int = 10000) -> ProfileResult:
    """Fixed-point iteration ``v <- (-Delta)^{-1}(v^(1/gamma)/(gamma-1))`` on ``v = f^gamma``.

    Starts from ``v = (-Delta)^{-1} 1`` and stops once both the relative sup-norm
    change between iterates and the relative defect are at most ``tol``.
    """
    if not gamma > 1.0:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    solver = PoissonSolver(mesh)
    v = solver.solve_values(np.ones(mesh.num_nodes))
    change = residual = np.inf
    if interior_nodes(mesh).size == 0:
        change = residual = 0.0
    it = 0
    while it < max_iter and not (change <= tol and residual <= tol):
        v_new = solver.solve_values(_root(v, gamma) / (gamma - 1.0))
        vmax = np.max(np.abs(v_new))
        change = float(np.max(np.abs(v_new - v)) / vmax) if vmax > 0 else 0.0
        v = v_new
        residual = profile_defect(solver, v, gamma)
        it += 1
    if not (change <= tol and residual <= tol):
        raise ProfileNotConverged(it, change, residual)
    f = ScalarField(mesh, _root(v, gamma), "f")
    return ProfileResult(f=f, gamma=float(gamma), iterations=it, residual=residual, change=change)


def separation_solution(profile: ProfileResult, tau: float, t: float) -> ScalarField:
    """Nodal values of ``(tau + t)^(-1/(gamma-1)) f``."""
    if not tau > 0 or t < 0:
        raise ValueError("need tau > 0 and t >= 0")
    factor = (tau + t) ** (-1.0 / (profile.gamma - 1.0))
    return profile.f.with_values(factor * profile.f.values, name="U")
