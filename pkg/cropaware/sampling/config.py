import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Optional, Tuple

from cropaware.common import InvalidArgument
from cropaware.geometry import CropRect


class SampleMode(str, Enum):
    CUS = "cus"
    ISUS = "isus"


def _check_range(name: str, r: Tuple[float, float]) -> None:
    lo, hi = r
    if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo <= hi):
        raise InvalidArgument(f"{name} must satisfy 0 < lo <= hi, got {r!r}")


@dataclass(frozen=True)
class SamplerConfig:
    s0: float = 2400.0
    # Clamp range of the instance-driven scale factor (things, ISUS).
    r_th: Tuple[float, float] = (0.25, 4.0)
    # Uniform scale range for stuff draws and for every CUS draw.
    r_st: Tuple[float, float] = (0.8, 1.25)
    # (width, height) in pixels.
    crop: Tuple[int, int] = (1024, 1024)
    seed: int = 0
    # Relative weights of the pyramid levels drawn by ISUS; None means uniform.
    level_weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.s0) and self.s0 > 0):
            raise InvalidArgument(f"s0 must be positive, got {self.s0!r}")
        _check_range("r_th", self.r_th)
        _check_range("r_st", self.r_st)
        if not (int(self.crop[0]) > 0 and int(self.crop[1]) > 0):
            raise InvalidArgument(f"crop must be positive, got {self.crop!r}")
        if self.level_weights is not None:
            if any(w < 0 for w in self.level_weights) or sum(self.level_weights) <= 0:
                raise InvalidArgument(f"level_weights must be nonnegative with a positive sum, got {self.level_weights!r}")

    def with_overrides(self, **kwargs) -> "SamplerConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass(frozen=True)
class SampleDecision:
    index: int
    class_id: int
    image_id: int
    is_thing: bool
    # Image resize to s0 applied before σ.
    resize: float
    sigma: float
    # Crop in the coordinates of the image after resize and σ.
    crop_rect: CropRect
    instance_id: Optional[int] = None
    target_level: Optional[int] = None
    clamped: bool = False

    @property
    def total_scale(self) -> float:
        return self.resize * self.sigma


DATASET_PRESETS: Dict[str, Tuple[SamplerConfig, SampleMode]] = {
    "mvd": (SamplerConfig(s0=2400.0, r_st=(0.8, 1.25), crop=(1024, 1024)), SampleMode.ISUS),
    "idd": (SamplerConfig(s0=1080.0, r_st=(0.5, 2.0), crop=(512, 512)), SampleMode.ISUS),
    "cityscapes": (SamplerConfig(s0=1024.0, r_st=(0.5, 2.0), crop=(512, 512)), SampleMode.ISUS),
    # Scale-augmentation ablation: plain class-uniform sampling over the wide range.
    "mvd-wide-cus": (SamplerConfig(s0=2400.0, r_st=(0.25, 4.0), crop=(1024, 1024)), SampleMode.CUS),
}


def preset(name: str) -> Tuple[SamplerConfig, SampleMode]:
    try:
        return DATASET_PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"Unknown sampler preset {name!r}, expected one of {sorted(DATASET_PRESETS)}")
