import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from cropaware.common import DEFAULT_BETA, InvalidArgument
from cropaware.geometry import Delta


@dataclass(frozen=True)
class HuberParam:
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise InvalidArgument(f"Huber beta must be positive, got {self.beta!r}")


BetaLike = Union[HuberParam, float]


def beta_value(beta: BetaLike) -> float:
    if type(beta) is float and 0.0 < beta < math.inf:
        return beta
    if isinstance(beta, HuberParam):
        return beta.beta
    return HuberParam(float(beta)).beta


def huber_unchecked(z: float, b: float) -> float:
    """huber() for a beta already known to be positive and finite."""
    a = abs(z)
    return z * z / (2.0 * b) if a <= b else a - b / 2.0


def huber_prime_unchecked(z: float, b: float) -> float:
    x = z / b
    return 1.0 if x > 1.0 else (-1.0 if x < -1.0 else x)


def huber(z: float, beta: BetaLike = DEFAULT_BETA) -> float:
    return huber_unchecked(z, beta_value(beta))


def huber_prime(z: float, beta: BetaLike = DEFAULT_BETA) -> float:
    return huber_prime_unchecked(z, beta_value(beta))


def huber_array(z: np.ndarray, beta: BetaLike = DEFAULT_BETA) -> np.ndarray:
    b = beta_value(beta)
    a = np.abs(z)
    return np.where(a <= b, z * z / (2.0 * b), a - b / 2.0)


def huber_prime_array(z: np.ndarray, beta: BetaLike = DEFAULT_BETA) -> np.ndarray:
    return np.clip(np.asarray(z, dtype=float) / beta_value(beta), -1.0, 1.0)


def _log_ratio(omega_p: float, omega_g: float) -> float:
    if not (omega_p > 0 and omega_g > 0):
        raise InvalidArgument(f"omega must be positive, got {omega_p!r} and {omega_g!r}")
    return math.log(omega_p) - math.log(omega_g)


def _l_bb_dim(delta_p: float, omega_p: float, delta_g: float, omega_g: float, b: float) -> float:
    return huber_unchecked(delta_p - delta_g, b) + huber_unchecked(_log_ratio(omega_p, omega_g), b)


def l_bb_dim(delta_p: float, omega_p: float, delta_g: float, omega_g: float, beta: BetaLike = DEFAULT_BETA) -> float:
    return _l_bb_dim(delta_p, omega_p, delta_g, omega_g, beta_value(beta))


def l_bb(p: Delta, g: Delta, beta: BetaLike = DEFAULT_BETA) -> float:
    """Standard per-box smooth-L1 regression loss in (δ, log ω) space."""
    b = beta_value(beta)
    return _l_bb_dim(p.dx, p.wx, g.dx, g.wx, b) + _l_bb_dim(p.dy, p.wy, g.dy, g.wy, b)


def l_bb_grad(
    p: Delta, g: Delta, beta: BetaLike = DEFAULT_BETA
) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Gradient of l_bb in the prediction: ((∂/∂δx, ∂/∂δy), (∂/∂ωx, ∂/∂ωy))."""
    b = beta_value(beta)
    grad_delta = (huber_prime_unchecked(p.dx - g.dx, b), huber_prime_unchecked(p.dy - g.dy, b))
    grad_omega = (
        huber_prime_unchecked(_log_ratio(p.wx, g.wx), b) / p.wx,
        huber_prime_unchecked(_log_ratio(p.wy, g.wy), b) / p.wy,
    )
    return grad_delta, grad_omega
