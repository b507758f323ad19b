"""Forward solver for ``u_t = Delta u^gamma`` with zero Dirichlet data.

Space: P1 elements with lumped mass. Time: semi-implicit Euler where the
nonlinearity is lagged, ``u^gamma ~ (u^n)^(gamma-1) u^(n+1)``, so each step is a
single nonsymmetric linear solve

    (M/dt + K D_n) u^(n+1) = (M/dt) u^n,   D_n = diag((u^n)^(gamma-1)).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import ScalarField, SolverError, _checked_solve, assemble_lumped_mass, assemble_stiffness, field_norm
from .mesh import Mesh, build_unit_square_mesh, interior_nodes

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


class ForwardError(RuntimeError):
    def __init__(self, message: str, step: int, time: float):
        super().__init__(f"step {step} (t = {time:.6g}): {message}")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class ForwardConfig:
    gamma: float
    n: int
    T: float
    dt: float | None = None
    u0_spec: str = "poly_bump(10)"
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.dt is None:
            object.__setattr__(self, "dt", 1.0 / self.n)
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"T/dt = {steps!r} is not an integer number of steps")
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    @property
    def step_count(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True, eq=False)
class ForwardResult:
    u_T: ScalarField
    step_count: int
    times: np.ndarray
    max_history: np.ndarray
    min_history: np.ndarray
    mass_history: np.ndarray
    snapshots: dict = field(default_factory=dict)


def parse_u0_spec(spec: str) -> tuple[str, dict]:
    """Split ``"name(a, key=b)"`` into the name and keyword parameters.

    ``file:PATH`` is accepted as a reference to a field file.
    """
    spec = spec.strip()
    if spec.startswith("file:"):
        return "file", {"path": spec[5:]}
    m = _SPEC_RE.match(spec)
    if not m:
        raise ValueError(f"cannot parse initial-data spec {spec!r}")
    name, body = m.groups()
    positional = {"poly_bump": ["c"], "scaled_profile": ["tau", "gamma"]}
    if name not in positional:
        raise ValueError(f"unknown initial-data formula {name!r}")
    params = {}
    args = [a.strip() for a in body.split(",") if a.strip()]
    for k, arg in enumerate(args):
        if "=" in arg:
            key, val = (s.strip() for s in arg.split("=", 1))
        else:
            if k >= len(positional[name]):
                raise ValueError(f"too many arguments in {spec!r}")
            key, val = positional[name][k], arg
        if key not in positional[name]:
            raise ValueError(f"{name} has no parameter {key!r}")
        params[key] = float(val)
    return name, params


def initial_field(mesh: Mesh, u0_spec: str, gamma: float | None = None) -> ScalarField:
    """Interpolate the initial datum named by ``u0_spec`` at the mesh nodes.

    Known formulas: ``poly_bump(c)`` is ``c x y (1-x) (1-y)``;
    ``scaled_profile(tau)`` is ``tau^(-1/(gamma-1)) f`` with ``f`` the stationary
    profile (``gamma`` from the argument list or the ``gamma`` keyword);
    ``file:PATH`` reads a field file written on the same mesh.
    """
    name, params = parse_u0_spec(u0_spec)
    if name == "poly_bump":
        c = params.get("c", 10.0)
        x, y = mesh.x, mesh.y
        values = c * x * y * (1 - x) * (1 - y)
    elif name == "scaled_profile":
        from .profile import solve_profile

        g = params.get("gamma", gamma)
        if g is None:
            raise ValueError("scaled_profile needs gamma")
        tau = params.get("tau", 1.0)
        if not tau > 0:
            raise ValueError("scaled_profile needs tau > 0")
        prof = solve_profile(mesh, g)
        values = tau ** (-1.0 / (g - 1.0)) * prof.f.values
    else:
        from .io import read_field

        loaded = read_field(Path(params["path"]))
        if loaded.mesh.num_nodes != mesh.num_nodes or not np.allclose(loaded.mesh.nodes, mesh.nodes):
            raise ValueError(
                f"field file has {loaded.mesh.num_nodes} nodes, expected {mesh.num_nodes} for n={mesh.n}"
            )
        values = loaded.values
    values = np.array(values, dtype=float)
    values[mesh.boundary_mask] = 0.0
    if np.any(values < 0):
        raise ValueError("initial data must be nonnegative")
    return ScalarField(mesh, values, "u0")


class _Stepper:
    """Interior-reduced operators shared by all steps of one run."""

    def __init__(self, mesh: Mesh, K=None, M=None):
        self.mesh = mesh
        K = assemble_stiffness(mesh) if K is None else sp.csr_matrix(K)
        M = assemble_lumped_mass(mesh) if M is None else np.asarray(M, dtype=float)
        self.inner = interior_nodes(mesh)
        self.K = K[self.inner][:, self.inner].tocsr()
        self.K.sort_indices()
        self.m = M[self.inner]
        self._diag_pos = np.array(
            [self.K.indptr[r] + np.searchsorted(self.K.indices[self.K.indptr[r]:self.K.indptr[r + 1]], r)
             for r in range(self.K.shape[0])],
            dtype=np.int64,
        )

    def step(self, u: np.ndarray, dt: float, gamma: float) -> np.ndarray:
        ui = u[self.inner]
        d = ui ** (gamma - 1.0)
        A = self.K.copy()
        A.data *= d[A.indices]
        A.data[self._diag_pos] += self.m / dt
        x = _checked_solve(A, self.m / dt * ui)
        out = np.zeros_like(u)
        out[self.inner] = np.maximum(x, 0.0)
        return out


def advance_step(u_n: ScalarField, dt: float, gamma: float, K, M) -> ScalarField:
    """One semi-implicit Euler step; negative nodal undershoots are clamped to 0."""
    if np.any(u_n.values < 0):
        raise ValueError("u_n must be nonnegative")
    stepper = _Stepper(u_n.mesh, K, M)
    values = stepper.step(np.asarray(u_n.values), dt, gamma)
    if not np.all(np.isfinite(values)):
        raise ForwardError("non-finite values", 1, dt)
    return u_n.with_values(values, name="u")


def solve_forward(config: ForwardConfig, mesh: Mesh | None = None, u0: ScalarField | None = None) -> ForwardResult:
    mesh = build_unit_square_mesh(config.n) if mesh is None else mesh
    if u0 is None:
        u0 = initial_field(mesh, config.u0_spec, config.gamma)
    stepper = _Stepper(mesh)
    M = assemble_lumped_mass(mesh)
    steps = config.step_count
    dt = config.dt

    times = dt * np.arange(steps + 1)
    max_h = np.empty(steps + 1)
    min_h = np.empty(steps + 1)
    mass_h = np.empty(steps + 1)
    wanted = {int(round(t / dt)): t for t in config.snapshot_times}
    snapshots = {}

    u = np.array(u0.values, dtype=float)
    for k in range(steps + 1):
        if k > 0:
            try:
                u = stepper.step(u, dt, config.gamma)
            except SolverError as exc:
                raise ForwardError(str(exc), k, times[k]) from exc
            if not np.all(np.isfinite(u)):
                raise ForwardError("non-finite values", k, times[k])
        max_h[k] = u.max()
        min_h[k] = u.min()
        mass_h[k] = field_norm(u, M, "l1")
        if k in wanted:
            snapshots[wanted[k]] = ScalarField(mesh, u.copy(), f"u(t={wanted[k]:g})")

    return ForwardResult(
        u_T=ScalarField(mesh, u, "u_T"),
        step_count=steps,
        times=times,
        max_history=max_h,
        min_history=min_h,
        mass_history=mass_h,
        snapshots=snapshots,
    )
