"""
Exact solver for the crop-aware bounding box (CABB) loss.

Per dimension the feasible set of the relaxed ground truth is one of four
shapes. A fixed side pins one box edge, an open side only requires the box to
reach past the crop edge. Each shape reduces to a single-variable problem in
the box size ω:

    O1: min_ω ℓ((ω - ω̂)/2) + ℓ(log ω - log ω_P)   s.t. ω >= ω0
    O2: two-sided version, solved by activating each side in turn.

O1 is non-convex, but on a small set of candidate intervals either ξ' or
σ(ω) = ω ξ'(ω) is increasing, so each interval is searched for the sign
change of a monotone surrogate and the best candidate wins.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

from cropaware.common import DEFAULT_EPS, DEGENERATE_OMEGA, OMEGA_FLOOR, InvalidArgument, edge_tol
from cropaware.geometry import Box, CropRect, Delta, crop_box
from cropaware.losses import BetaLike, HuberParam, beta_value, huber_unchecked, l_bb, l_bb_grad

logger = logging.getLogger(__name__)

SQRT32 = 4.0 * math.sqrt(2.0)


class DimKind(str, Enum):
    SINGLETON = "singleton"
    LEFT_OPEN = "left_open"
    RIGHT_OPEN = "right_open"
    BOTH_OPEN = "both_open"


@dataclass(frozen=True)
class DimCase:
    """
    Feasible set of one dimension, in anchor units.

    RIGHT_OPEN: left edge fixed at a, right edge must reach b.
    LEFT_OPEN: right edge fixed at b, left edge must reach a.
    BOTH_OPEN: both edges must reach past [a, b].
    SINGLETON: (delta_g, omega_g) is the only feasible point; a and b are unused.
    """

    kind: DimKind
    delta_g: float
    omega_g: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if not self.omega_g > 0:
            raise InvalidArgument(f"omega_g must be positive, got {self.omega_g!r}")
        if self.kind != DimKind.SINGLETON and not (self.b - self.a > DEGENERATE_OMEGA):
            raise InvalidArgument(
                f"Degenerate {self.kind.value} case: b - a = {self.b - self.a!r} (a={self.a!r}, b={self.b!r})"
            )

    @property
    def omega0(self) -> float:
        if self.kind == DimKind.SINGLETON:
            return self.omega_g
        return self.b - self.a


@dataclass(frozen=True)
class SolverConfig:
    beta: HuberParam = field(default_factory=HuberParam)
    eps: float = DEFAULT_EPS
    # Largest accepted ratio ω* / max(ω0, ω̂, ω_P) before a result is reported as suspicious.
    omega_cap: float = 16.0

    def __post_init__(self) -> None:
        if not isinstance(self.beta, HuberParam):
            object.__setattr__(self, "beta", HuberParam(float(self.beta)))
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise InvalidArgument(f"eps must be positive, got {self.eps!r}")
        if not (math.isfinite(self.omega_cap) and self.omega_cap > 1):
            raise InvalidArgument(f"omega_cap must exceed 1, got {self.omega_cap!r}")


@dataclass(frozen=True)
class CandidateInterval:
    label: str
    lo: float
    hi: float
    # "xi_prime" or "sigma": which increasing surrogate drives the root search.
    surrogate: str

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


@dataclass(frozen=True)
class CabbSolution:
    delta_star: Delta
    loss: float
    per_dim_case: Tuple[DimKind, DimKind]
    grad_delta: Tuple[float, float]
    grad_omega: Tuple[float, float]
    per_dim_branch: Tuple[str, str]
    dim_cases: Tuple[DimCase, DimCase]


def _check_omega(omega: float, name: str = "omega") -> None:
    if not omega > 0:
        raise InvalidArgument(f"{name} must be positive, got {omega!r}")


def _clamp_unit(x: float) -> float:
    return 1.0 if x > 1.0 else (-1.0 if x < -1.0 else x)


def xi(omega: float, omega_p: float, omega_hat: float, beta: BetaLike) -> float:
    """O1 objective ξ(ω) = ℓ((ω - ω̂)/2) + ℓ(log ω - log ω_P)."""
    _check_omega(omega)
    _check_omega(omega_p, "omega_p")
    b = beta_value(beta)
    return huber_unchecked((omega - omega_hat) / 2.0, b) + huber_unchecked(math.log(omega) - math.log(omega_p), b)


def eta(omega: float, omega_p: float, beta: BetaLike) -> float:
    _check_omega(omega)
    _check_omega(omega_p, "omega_p")
    b = beta_value(beta)
    return _clamp_unit((math.log(omega) - math.log(omega_p)) / b) / omega


def xi_prime(omega: float, omega_p: float, omega_hat: float, beta: BetaLike) -> float:
    b = beta_value(beta)
    return 0.5 * _clamp_unit((omega - omega_hat) / (2.0 * b)) + eta(omega, omega_p, b)


def sigma_fn(omega: float, omega_p: float, omega_hat: float, beta: BetaLike) -> float:
    return omega * xi_prime(omega, omega_p, omega_hat, beta)


def find_min(lo: float, hi: float, phi: Callable[[float], float], eps: float = DEFAULT_EPS) -> Optional[float]:
    """
    Minimize ξ on [lo, hi] given an increasing φ whose sign matches ξ'.

    Returns None when lo > hi so callers can skip empty candidate intervals.
    """
    if lo > hi:
        return None
    f_lo = phi(lo)
    if f_lo >= 0:
        return lo
    f_hi = phi(hi)
    if f_hi <= 0:
        return hi
    tol = eps * max(1.0, abs(lo) + abs(hi))
    # Illinois false position. Every fourth step bisects instead if the
    # bracket has not halved since the previous checkpoint.
    side = 0
    step = 0
    checkpoint = hi - lo
    while hi - lo > tol:
        step += 1
        bisect = False
        if step % 4 == 0:
            bisect = hi - lo > 0.5 * checkpoint
            checkpoint = hi - lo
        mid = 0.5 * (lo + hi) if bisect else (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        v = phi(mid)
        if v == 0:
            return mid
        if v > 0:
            hi, f_hi = mid, v
            if side > 0 and not bisect:
                f_lo *= 0.5
            side = 1
        else:
            lo, f_lo = mid, v
            if side < 0 and not bisect:
                f_hi *= 0.5
            side = -1
    return 0.5 * (lo + hi)


def o1_surrogates(
    omega_p: float, omega_hat: float, b: float
) -> Tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]:
    """
    (ξ', σ, ξ) of one O1 problem as closures over a validated beta.

    These skip the argument checks of xi_prime / sigma_fn / xi and are what the
    solver searches.
    """
    log_p = math.log(omega_p)
    inv_b = 1.0 / b
    half_inv_b = 0.5 * inv_b

    def d_xi(w: float) -> float:
        t = (w - omega_hat) * half_inv_b
        t = 1.0 if t > 1.0 else (-1.0 if t < -1.0 else t)
        s = (math.log(w) - log_p) * inv_b
        s = 1.0 if s > 1.0 else (-1.0 if s < -1.0 else s)
        return 0.5 * t + s / w

    def sigma(w: float) -> float:
        return w * d_xi(w)

    def value(w: float) -> float:
        return huber_unchecked((w - omega_hat) / 2.0, b) + huber_unchecked(math.log(w) - log_p, b)

    return d_xi, sigma, value


def o1_candidate_intervals(omega_p: float, omega_hat: float, omega0: float, beta: BetaLike) -> List[CandidateInterval]:
    """
    Intervals of [ω0, ω̂] that can hold an interior minimizer of O1 when
    max(ω0, ω_P) < ω̂, each with the surrogate that is increasing on it.
    Empty intervals are kept so callers can inspect them.
    """
    b = beta_value(beta)
    e_b = math.exp(b) * omega_p
    e_1 = math.e * omega_p
    out = [
        CandidateInterval("J1", max(omega0, omega_p), min(math.exp(min(b, 1.0)) * omega_p, omega_hat), "xi_prime"),
        CandidateInterval("J2", max(omega0, 2.0 * math.sqrt(b), omega_hat - 2.0 * b, e_b), omega_hat, "xi_prime"),
    ]
    lo = max(omega0, omega_hat - 2.0 * b, e_1)
    hi = min(e_b, omega_hat)
    if omega_hat <= SQRT32:
        out.append(CandidateInterval("J3", lo, hi, "sigma"))
    else:
        root = math.sqrt(1.0 - 32.0 / (omega_hat * omega_hat))
        nu1 = omega_hat / 4.0 * (1.0 - root)
        nu2 = omega_hat / 4.0 * (1.0 + root)
        out.append(CandidateInterval("J4", lo, min(hi, nu1), "sigma"))
        out.append(CandidateInterval("J5", max(lo, nu2), hi, "sigma"))
    return out


def _solve_o1(omega_p: float, omega_hat: float, omega0: float, b: float, eps: float) -> Tuple[float, str]:
    if not omega0 > DEGENERATE_OMEGA:
        raise InvalidArgument(f"O1 needs omega0 > {DEGENERATE_OMEGA}, got {omega0!r}")
    _check_omega(omega_p, "omega_p")

    d_xi, sigma, value = o1_surrogates(omega_p, omega_hat, b)
    lower = max(omega0, omega_hat)

    if lower < omega_p:
        w = find_min(lower, omega_p, d_xi, eps)
        return w, ("boundary" if w == omega0 else "a")

    if max(omega0, omega_p) < omega_hat:
        best_w, best_v, best_tag = omega0, value(omega0), "boundary"
        v_hat = value(omega_hat)
        if v_hat < best_v:
            best_w, best_v, best_tag = omega_hat, v_hat, "hat"
        for iv in o1_candidate_intervals(omega_p, omega_hat, omega0, b):
            phi = d_xi if iv.surrogate == "xi_prime" else sigma
            w = find_min(max(iv.lo, OMEGA_FLOOR), iv.hi, phi, eps)
            if w is None:
                continue
            v = value(w)
            if v < best_v:
                best_w, best_v, best_tag = w, v, iv.label
        return best_w, best_tag

    if omega_hat == omega_p and omega_p > omega0:
        # Both terms vanish at ω_P and it is feasible.
        return omega_p, "tie"

    return omega0, "boundary"


def solve_o1(omega_p: float, omega_hat: float, a1: float, b1: float, cfg: Optional[SolverConfig] = None) -> float:
    """Global minimizer ω* >= ω0 = b1 - a1 of the O1 objective."""
    cfg = cfg or SolverConfig()
    omega0 = b1 - a1
    if not omega0 > 0:
        raise InvalidArgument(f"O1 needs b1 > a1, got a1={a1!r}, b1={b1!r}")
    w, tag = _solve_o1(omega_p, omega_hat, omega0, cfg.beta.beta, cfg.eps)
    _check_cap(w, omega_p, omega_hat, omega0, cfg)
    logger.debug("solve_o1 omega_p=%r omega_hat=%r omega0=%r -> %r (%s)", omega_p, omega_hat, omega0, w, tag)
    return w


def _check_cap(w: float, omega_p: float, omega_hat: float, omega0: float, cfg: SolverConfig) -> None:
    ref = max(omega0, omega_hat, omega_p)
    if w > cfg.omega_cap * ref:
        logger.warning("O1 solution %r exceeds omega_cap * %r; inputs omega_p=%r omega_hat=%r", w, ref, omega_p, omega_hat)


def _solve_o2(delta_p: float, omega_p: float, a2: float, b2: float, b: float, eps: float) -> Tuple[float, float, str]:
    if not b2 - a2 > 0:
        raise InvalidArgument(f"O2 needs b2 > a2, got a2={a2!r}, b2={b2!r}")
    _check_omega(omega_p, "omega_p")
    hat1 = 2.0 * (delta_p - a2)
    hat2 = 2.0 * (b2 - delta_p)
    if omega_p >= max(hat1, hat2):
        return delta_p, omega_p, "unconstrained"

    omega0 = b2 - a2
    w1, tag1 = _solve_o1(omega_p, hat1, omega0, b, eps)
    w2, tag2 = _solve_o1(omega_p, hat2, omega0, b, eps)
    log_p = math.log(omega_p)
    v1 = huber_unchecked((w1 - hat1) / 2.0, b) + huber_unchecked(math.log(w1) - log_p, b)
    v2 = huber_unchecked((w2 - hat2) / 2.0, b) + huber_unchecked(math.log(w2) - log_p, b)
    if v1 <= v2:
        return a2 + w1 / 2.0, w1, f"side1:{tag1}"
    return b2 - w2 / 2.0, w2, f"side2:{tag2}"


def solve_o2(
    delta_p: float, omega_p: float, a2: float, b2: float, cfg: Optional[SolverConfig] = None
) -> Tuple[float, float]:
    """Minimizer (δ*, ω*) of the two-sided problem where both box edges must cover [a2, b2]."""
    cfg = cfg or SolverConfig()
    d, w, tag = _solve_o2(delta_p, omega_p, a2, b2, cfg.beta.beta, cfg.eps)
    logger.debug("solve_o2 delta_p=%r omega_p=%r [%r, %r] -> (%r, %r) %s", delta_p, omega_p, a2, b2, d, w, tag)
    return d, w


def classify_dimension(
    c_g: float,
    d_g: float,
    d_c: float,
    c_a: float,
    d_a: float,
    *,
    pin_left: bool = False,
    pin_right: bool = False,
) -> DimCase:
    """
    Feasible-set shape of one dimension from the cropped box (c_g, d_g) in crop
    coordinates, the crop extent d_c and the anchor (c_a, d_a).

    pin_left / pin_right force a side touching the crop to stay fixed.
    """
    if not (d_g > 0 and d_c > 0 and d_a > 0):
        raise InvalidArgument(f"classify_dimension needs positive sizes, got d_g={d_g!r}, d_c={d_c!r}, d_a={d_a!r}")
    tol = edge_tol(d_c)
    left = c_g - d_g / 2.0
    right = c_g + d_g / 2.0
    if left < -tol or right > d_c + tol:
        raise InvalidArgument(f"Cropped box [{left!r}, {right!r}] lies outside the crop [0, {d_c!r}]")

    delta_g = (c_g - c_a) / d_a
    omega_g = d_g / d_a
    left_open = left <= tol and not pin_left
    right_open = right >= d_c - tol and not pin_right

    if left_open and right_open:
        return DimCase(DimKind.BOTH_OPEN, delta_g, omega_g, -c_a / d_a, (d_c - c_a) / d_a)
    if right_open:
        return DimCase(DimKind.RIGHT_OPEN, delta_g, omega_g, delta_g - omega_g / 2.0, (d_c - c_a) / d_a)
    if left_open:
        return DimCase(DimKind.LEFT_OPEN, delta_g, omega_g, -c_a / d_a, delta_g + omega_g / 2.0)
    return DimCase(DimKind.SINGLETON, delta_g, omega_g)


def solve_dimension(case: DimCase, delta_p: float, omega_p: float, cfg: Optional[SolverConfig] = None) -> Tuple[float, float, str]:
    """(δ*, ω*, branch) for one dimension."""
    cfg = cfg or SolverConfig()
    b = cfg.beta.beta
    if case.kind == DimKind.SINGLETON:
        return case.delta_g, case.omega_g, "fixed"
    if case.kind == DimKind.RIGHT_OPEN:
        omega_hat = 2.0 * (delta_p - case.a)
        w, tag = _solve_o1(omega_p, omega_hat, case.omega0, b, cfg.eps)
        _check_cap(w, omega_p, omega_hat, case.omega0, cfg)
        return case.a + w / 2.0, w, tag
    if case.kind == DimKind.LEFT_OPEN:
        omega_hat = 2.0 * (case.b - delta_p)
        w, tag = _solve_o1(omega_p, omega_hat, case.omega0, b, cfg.eps)
        _check_cap(w, omega_p, omega_hat, case.omega0, cfg)
        return case.b - w / 2.0, w, tag
    return _solve_o2(delta_p, omega_p, case.a, case.b, b, cfg.eps)


def _image_pins(
    g: Box, crop: CropRect, image_extent: Tuple[float, float], origin: Tuple[float, float]
) -> Tuple[Tuple[bool, bool], Tuple[bool, bool]]:
    # g and crop are in crop coordinates; the image spans [-origin, extent - origin].
    gl, gt, gr, gb = g.corners
    pins = []
    for lo, hi, d_c, size, o in ((gl, gr, crop.width, image_extent[0], origin[0]), (gt, gb, crop.height, image_extent[1], origin[1])):
        tol = edge_tol(max(d_c, size))
        not_cut_lo = lo >= -tol
        not_cut_hi = hi <= d_c + tol
        inside_image_lo = lo > -o + tol
        inside_image_hi = hi < size - o - tol
        pins.append((not_cut_lo and inside_image_lo, not_cut_hi and inside_image_hi))
    return pins[0], pins[1]


def cabb_loss(
    p: Delta,
    g_original: Box,
    anchor: Box,
    crop: CropRect,
    cfg: Optional[SolverConfig] = None,
    image_extent: Optional[Tuple[float, float]] = None,
) -> CabbSolution:
    """
    CABB loss of prediction p: the standard box loss against the closest
    (encoded) box whose crop matches the cropped ground truth.

    The gradient treats the inner minimizer as constant.
    """
    cfg = cfg or SolverConfig()
    g_local, a_local = g_original, anchor
    if not crop.at_origin:
        g_local = g_original.translate(-crop.x0, -crop.y0)
        a_local = anchor.translate(-crop.x0, -crop.y0)
    local_crop = crop.local()

    cropped = crop_box(g_local, local_crop)
    if cropped is None:
        raise InvalidArgument("Ground truth does not intersect the crop")

    pins = ((False, False), (False, False))
    if image_extent is not None:
        pins = _image_pins(g_local, local_crop, image_extent, (crop.x0, crop.y0))

    cases: List[DimCase] = []
    solved: List[Tuple[float, float, str]] = []
    for axis in (0, 1):
        case = classify_dimension(
            cropped.center(axis),
            cropped.dim(axis),
            local_crop.extent(axis),
            a_local.center(axis),
            a_local.dim(axis),
            pin_left=pins[axis][0],
            pin_right=pins[axis][1],
        )
        cases.append(case)
        solved.append(solve_dimension(case, p.delta(axis), p.omega(axis), cfg))

    delta_star = Delta(solved[0][0], solved[1][0], solved[0][1], solved[1][1])
    beta = cfg.beta.beta
    grad_delta, grad_omega = l_bb_grad(p, delta_star, beta)
    return CabbSolution(
        delta_star=delta_star,
        loss=l_bb(p, delta_star, beta),
        per_dim_case=(cases[0].kind, cases[1].kind),
        grad_delta=grad_delta,
        grad_omega=grad_omega,
        per_dim_branch=(solved[0][2], solved[1][2]),
        dim_cases=(cases[0], cases[1]),
    )


def constraint_violation(case: DimCase, delta: float, omega: float) -> float:
    """Largest amount by which (δ, ω) breaks the constraints of its dimension case."""
    left = delta - omega / 2.0
    right = delta + omega / 2.0
    if case.kind == DimKind.SINGLETON:
        return max(abs(delta - case.delta_g), abs(omega - case.omega_g))
    if case.kind == DimKind.RIGHT_OPEN:
        return max(abs(left - case.a), case.b - right, 0.0)
    if case.kind == DimKind.LEFT_OPEN:
        return max(abs(right - case.b), left - case.a, 0.0)
    return max(left - case.a, case.b - right, 0.0)
