"""
Brute-force reference minimizers used to certify the analytic solver.

Slow on purpose: dense log-spaced grids plus a few passes of local grid
refinement, evaluated with numpy.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from cropaware.common import InvalidArgument
from cropaware.losses import BetaLike, beta_value, huber_array
from cropaware.solver import DimCase, DimKind

# Bracket shrink factor per refinement pass.
REFINE_SHRINK = 100.0
# Points per axis of the coarse 2-D grid in oracle_o2.
O2_AXIS_POINTS = 400


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 10_000
    refine_passes: int = 3
    omega_span: float = 16.0

    def __post_init__(self) -> None:
        if self.grid_points < 100:
            raise InvalidArgument(f"grid_points must be >= 100, got {self.grid_points}")
        if self.refine_passes < 0:
            raise InvalidArgument(f"refine_passes must be >= 0, got {self.refine_passes}")
        if not (math.isfinite(self.omega_span) and self.omega_span > 0):
            raise InvalidArgument(f"omega_span must be positive, got {self.omega_span!r}")


def _xi_grid(w: np.ndarray, omega_p: float, omega_hat: float, b: float) -> np.ndarray:
    return huber_array((w - omega_hat) / 2.0, b) + huber_array(np.log(w) - math.log(omega_p), b)


def _o1_search(omega_p: float, omega_hat: float, omega0: float, b: float, cfg: OracleConfig) -> Tuple[float, float, List[float]]:
    hi = cfg.omega_span * max(omega0, abs(omega_hat), omega_p, 1.0)
    log_lo, log_hi = math.log(omega0), math.log(hi)
    grid = np.exp(np.linspace(log_lo, log_hi, cfg.grid_points))
    grid[0] = omega0
    vals = _xi_grid(grid, omega_p, omega_hat, b)
    i = int(np.argmin(vals))
    best_w, best_v = float(grid[i]), float(vals[i])
    trace = [best_v]

    half_span = (log_hi - log_lo) / 2.0
    for _ in range(cfg.refine_passes):
        half_span /= REFINE_SHRINK
        centre = math.log(best_w)
        lo = max(log_lo, centre - half_span)
        grid = np.exp(np.linspace(lo, centre + half_span, cfg.grid_points))
        grid = grid[grid >= omega0]
        if grid.size:
            vals = _xi_grid(grid, omega_p, omega_hat, b)
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_w, best_v = float(grid[i]), float(vals[i])
        trace.append(best_v)
    return best_w, best_v, trace


def oracle_o1(
    omega_p: float, omega_hat: float, a1: float, b1: float, beta: BetaLike, cfg: OracleConfig = OracleConfig()
) -> Tuple[float, float]:
    """(ω, ξ(ω)) of the best grid point of O1 on [ω0, span * max(ω0, |ω̂|, ω_P, 1)]."""
    omega0 = b1 - a1
    if not omega0 > 0 or not omega_p > 0:
        raise InvalidArgument(f"oracle_o1 needs b1 > a1 and omega_p > 0, got a1={a1!r} b1={b1!r} omega_p={omega_p!r}")
    w, v, _ = _o1_search(omega_p, omega_hat, omega0, beta_value(beta), cfg)
    return w, v


def oracle_o1_trace(
    omega_p: float, omega_hat: float, a1: float, b1: float, beta: BetaLike, cfg: OracleConfig = OracleConfig()
) -> List[float]:
    """Best objective after the coarse grid and after each refinement pass."""
    omega0 = b1 - a1
    if not omega0 > 0 or not omega_p > 0:
        raise InvalidArgument(f"oracle_o1 needs b1 > a1 and omega_p > 0, got a1={a1!r} b1={b1!r} omega_p={omega_p!r}")
    return _o1_search(omega_p, omega_hat, omega0, beta_value(beta), cfg)[2]


def _o2_values(u: np.ndarray, v: np.ndarray, delta_p: float, omega_p: float, a2: float, b2: float, b: float):
    # u, v: how far the left / right edges reach past a2 / b2.
    left = a2 - u
    right = b2 + v
    omega = right - left
    delta = (left + right) / 2.0
    vals = huber_array(delta - delta_p, b) + huber_array(np.log(omega) - math.log(omega_p), b)
    return delta, omega, vals


def oracle_o2(
    delta_p: float, omega_p: float, a2: float, b2: float, beta: BetaLike, cfg: OracleConfig = OracleConfig()
) -> Tuple[float, float, float]:
    """
    Brute-force minimizer of the two-sided problem over the exact feasible
    set {left edge <= a2, right edge >= b2}, parameterized by the two
    nonnegative edge extensions.
    """
    if not b2 - a2 > 0 or not omega_p > 0:
        raise InvalidArgument(f"oracle_o2 needs b2 > a2 and omega_p > 0, got a2={a2!r} b2={b2!r} omega_p={omega_p!r}")
    b = beta_value(beta)
    if delta_p - omega_p / 2.0 <= a2 and delta_p + omega_p / 2.0 >= b2:
        return delta_p, omega_p, 0.0

    scale = max(b2 - a2, omega_p, abs(delta_p - a2), abs(b2 - delta_p), 1.0)
    axis = np.concatenate(([0.0], np.geomspace(1e-9 * scale, cfg.omega_span * scale, O2_AXIS_POINTS - 1)))
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    delta, omega, vals = _o2_values(uu.ravel(), vv.ravel(), delta_p, omega_p, a2, b2, b)
    i = int(np.argmin(vals))
    best = (float(delta[i]), float(omega[i]), float(vals[i]))

    # Edges of the feasible set, searched as 1-D problems.
    omega0 = b2 - a2
    for omega_hat, side in ((2.0 * (delta_p - a2), 1), (2.0 * (b2 - delta_p), 2)):
        w, val, _ = _o1_search(omega_p, omega_hat, omega0, b, cfg)
        if val < best[2]:
            d = a2 + w / 2.0 if side == 1 else b2 - w / 2.0
            best = (d, w, val)

    # Local refinement of the 2-D grid around the incumbent.
    u0 = a2 - (best[0] - best[1] / 2.0)
    v0 = (best[0] + best[1] / 2.0) - b2
    radius = cfg.omega_span * scale
    for _ in range(cfg.refine_passes):
        radius /= REFINE_SHRINK
        us = np.clip(np.linspace(u0 - radius, u0 + radius, 201), 0.0, None)
        vs = np.clip(np.linspace(v0 - radius, v0 + radius, 201), 0.0, None)
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        delta, omega, vals = _o2_values(uu.ravel(), vv.ravel(), delta_p, omega_p, a2, b2, b)
        i = int(np.argmin(vals))
        if vals[i] < best[2]:
            best = (float(delta[i]), float(omega[i]), float(vals[i]))
            u0 = float(uu.ravel()[i])
            v0 = float(vv.ravel()[i])
    return best


def oracle_dimension(
    case: DimCase, delta_p: float, omega_p: float, beta: BetaLike, cfg: OracleConfig = OracleConfig()
) -> Tuple[float, float, float]:
    """Brute-force (δ, ω, objective) for one dimension of the full CABB problem."""
    b = beta_value(beta)
    if case.kind == DimKind.SINGLETON:
        d, w = case.delta_g, case.omega_g
        val = huber_array(np.array([delta_p - d]), b)[0] + huber_array(np.array([math.log(omega_p) - math.log(w)]), b)[0]
        return d, w, float(val)
    if case.kind == DimKind.RIGHT_OPEN:
        w, val = oracle_o1(omega_p, 2.0 * (delta_p - case.a), case.a, case.b, b, cfg)
        return case.a + w / 2.0, w, val
    if case.kind == DimKind.LEFT_OPEN:
        w, val = oracle_o1(omega_p, 2.0 * (case.b - delta_p), case.a, case.b, b, cfg)
        return case.b - w / 2.0, w, val
    return oracle_o2(delta_p, omega_p, case.a, case.b, b, cfg)
