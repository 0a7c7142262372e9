import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from cropaware.common import InvalidArgument


@dataclass(frozen=True)
class PyramidSpec:
    level_min: int = 2
    level_max: int = 6
    canonical_level: int = 4
    canonical_scale: float = 224.0

    def __post_init__(self) -> None:
        if not (self.level_min <= self.canonical_level <= self.level_max):
            raise InvalidArgument(
                f"Need level_min <= canonical_level <= level_max, got {self.level_min}, {self.canonical_level}, {self.level_max}"
            )
        if not (math.isfinite(self.canonical_scale) and self.canonical_scale > 0):
            raise InvalidArgument(f"canonical_scale must be positive, got {self.canonical_scale!r}")

    @property
    def levels(self) -> Tuple[int, ...]:
        return tuple(range(self.level_min, self.level_max + 1))


def level_for(scale: float, spec: PyramidSpec = PyramidSpec()) -> int:
    """Pyramid level of an object of size sqrt(area) = scale."""
    if not scale > 0:
        raise InvalidArgument(f"scale must be positive, got {scale!r}")
    raw = spec.canonical_level + math.floor(math.log2(scale / spec.canonical_scale))
    return min(max(raw, spec.level_min), spec.level_max)


def level_band(level: int, spec: PyramidSpec = PyramidSpec()) -> Tuple[float, float]:
    """[lo, hi) range of scales assigned to `level` by the unclamped rule."""
    if not spec.level_min <= level <= spec.level_max:
        raise InvalidArgument(f"level {level} outside [{spec.level_min}, {spec.level_max}]")
    lo = spec.canonical_scale * 2.0 ** (level - spec.canonical_level)
    return lo, 2.0 * lo


def target_sigma(instance_scale: float, target_level: int, spec: PyramidSpec, u: float) -> float:
    """
    Scale factor sending an object of size instance_scale to the point of the
    level band at log-fraction u in [0, 1). Nudged by ulps so level_for agrees.
    """
    if not instance_scale > 0:
        raise InvalidArgument(f"instance_scale must be positive, got {instance_scale!r}")
    lo, _ = level_band(target_level, spec)
    sigma = lo * 2.0 ** u / instance_scale
    for _ in range(64):
        level = level_for(sigma * instance_scale, spec)
        if level < target_level:
            sigma = math.nextafter(sigma, math.inf)
        elif level > target_level:
            sigma = math.nextafter(sigma, 0.0)
        else:
            break
    return sigma


def clamp_sigma(sigma: float, r_th: Tuple[float, float]) -> Tuple[float, bool]:
    lo, hi = r_th
    if sigma < lo:
        return lo, True
    if sigma > hi:
        return hi, True
    return sigma, False


def sigma_for_instance(
    instance_scale: float,
    target_level: int,
    spec: PyramidSpec,
    rng: np.random.Generator,
    r_th: Tuple[float, float] = (0.25, 4.0),
) -> float:
    """Scale factor placing the instance at target_level, clamped to r_th."""
    sigma = target_sigma(instance_scale, target_level, spec, float(rng.random()))
    return clamp_sigma(sigma, r_th)[0]
