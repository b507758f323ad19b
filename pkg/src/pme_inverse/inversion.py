"""Recovery of the exponent gamma from one late-time snapshot ``u_T``.

With ``w = (-Delta)^{-1} u_T`` the field

    F(alpha) = (alpha - 1) (1 + T) u_T^alpha - w

is asymptotically small at ``alpha = gamma``. :func:`recover_gamma` minimizes
``|F(alpha)|`` over ``alpha_min <= alpha <= gamma_c`` by a coarse scan followed
by golden-section refinement of the best bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import NORMS, PoissonSolver, ScalarField, field_norm

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
TIE_TOL = 1e-14


class EndpointMinimumError(RuntimeError):
    """The coarse scan has no interior minimum.

    ``end`` is ``"upper"`` when the smallest sample is at ``gamma_c`` and
    ``"lower"`` when it is at ``alpha_min``. The curve rises steeply just above
    ``alpha = 1``, so a lower-end minimum also means the interior minimum lies
    beyond ``gamma_c`` (or gamma is below ``alpha_min``).
    """

    def __init__(self, alpha: float, end: str = "upper"):
        if end == "upper":
            msg = f"gamma_c too small: objective is smallest at the upper end alpha = {alpha:g}"
        else:
            msg = (f"gamma_c too small: no interior minimum, objective is smallest at the lower end "
                   f"alpha = {alpha:g}")
        super().__init__(msg)
        self.alpha = alpha
        self.end = end


@dataclass(frozen=True)
class InversionConfig:
    alpha_min: float = 1.001
    gamma_c: float = 20.0
    grid_step: float = 0.05
    refine_tol: float = 1e-4
    norm: str = "l1"
    clamp_negative_measurements: bool = True

    def __post_init__(self):
        if not 1.0 < self.alpha_min < self.gamma_c:
            raise ValueError("need 1 < alpha_min < gamma_c")
        if not self.grid_step > 0 or not self.refine_tol > 0:
            raise ValueError("grid_step and refine_tol must be positive")
        object.__setattr__(self, "norm", self.norm.lower())
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")

    def grid(self) -> np.ndarray:
        count = int(math.floor((self.gamma_c - self.alpha_min) / self.grid_step + 1e-9))
        alphas = self.alpha_min + self.grid_step * np.arange(count + 1)
        if self.gamma_c - alphas[-1] > 1e-9 * self.grid_step:
            alphas = np.append(alphas, self.gamma_c)
        else:
            alphas[-1] = self.gamma_c
        return alphas


@dataclass(frozen=True, eq=False)
class InversionReport:
    gamma_m: float
    objective_at_min: float
    curve: list
    w_field: ScalarField
    norm_used: str
    T: float
    config: InversionConfig
    probes: list = field(default_factory=list)
    bracket: tuple = (math.nan, math.nan)
    warnings: tuple = ()


def prepare_measurement(u_T: ScalarField, clamp: bool = True) -> ScalarField:
    if np.any(u_T.values < 0):
        if not clamp:
            raise ValueError("measurement has negative nodal values and clamping is disabled")
        return u_T.with_values(np.maximum(u_T.values, 0.0))
    return u_T


def objective_field(alpha: float, u_T: ScalarField, w: ScalarField, T: float) -> ScalarField:
    if not alpha > 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if u_T.mesh is not w.mesh and u_T.values.shape != w.values.shape:
        raise ValueError("u_T and w live on different meshes")
    if np.any(u_T.values < 0):
        raise ValueError("u_T has negative nodal values")
    values = (alpha - 1.0) * (1.0 + T) * u_T.values ** alpha - w.values
    return ScalarField(u_T.mesh, values, "F")


def objective_norm(alpha, u_T, w, T, mass, norm="l1") -> float:
    return field_norm(objective_field(alpha, u_T, w, T), mass, norm)


def sample_curve(u_T, w, T, alphas, mass, norm="l1") -> list:
    return [(float(a), objective_norm(a, u_T, w, T, mass, norm)) for a in alphas]


def golden_section(fun, lo: float, hi: float, tol: float):
    """Minimize a unimodal ``fun`` on ``[lo, hi]``; returns every probe as (x, f(x))."""
    probes = []

    def ev(x):
        fx = fun(x)
        probes.append((x, fx))
        return fx

    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = ev(x1), ev(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = ev(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = ev(x2)
    ev(0.5 * (lo + hi))
    return probes, (lo, hi)


def recover_gamma(u_T: ScalarField, T: float, config: InversionConfig | None = None,
                  solver: PoissonSolver | None = None) -> InversionReport:
    """Estimate gamma from ``u_T`` measured at time ``T``.

    Raises :class:`EndpointMinimumError` when the coarse scan bottoms out at
    either end of ``[alpha_min, gamma_c]``; a constant curve (zero data) is
    reported with a warning instead.
    """
    config = InversionConfig() if config is None else config
    if not T > 0:
        raise ValueError("T must be positive")
    mesh = u_T.mesh
    u_T = prepare_measurement(u_T, config.clamp_negative_measurements)
    solver = PoissonSolver(mesh) if solver is None else solver
    mass = solver.mass
    w = solver.solve(u_T)

    def obj(a):
        return objective_norm(a, u_T, w, T, mass, config.norm)

    alphas = config.grid()
    curve = [(float(a), obj(a)) for a in alphas]
    values = np.array([v for _, v in curve])
    # ties are judged relative to the curve scale; u_T can be ~1e-33 at late times
    k = int(np.flatnonzero(values <= values.min() + TIE_TOL * values.max())[0])
    flat = values.max() - values.min() <= TIE_TOL * values.max()
    if k == len(alphas) - 1:
        raise EndpointMinimumError(config.gamma_c, "upper")
    if k == 0 and not flat:
        raise EndpointMinimumError(config.alpha_min, "lower")

    lo = alphas[max(k - 1, 0)]
    hi = alphas[k + 1]
    probes, bracket = golden_section(obj, float(lo), float(hi), config.refine_tol)

    best_a, best_v = curve[k]
    for a, v in probes:
        if v < best_v:
            best_a, best_v = a, v

    warnings = []
    if not np.any(u_T.values > 0):
        warnings.append("degenerate measurement: u_T is identically zero")
    elif flat:
        warnings.append("degenerate measurement: objective is constant over the scan")
    return InversionReport(
        gamma_m=float(best_a),
        objective_at_min=float(best_v),
        curve=curve,
        w_field=w,
        norm_used=config.norm,
        T=float(T),
        config=config,
        probes=probes,
        bracket=bracket,
        warnings=tuple(warnings),
    )
