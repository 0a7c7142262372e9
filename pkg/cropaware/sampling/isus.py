from typing import Optional, Sequence

import numpy as np

from cropaware.annotations import AnnotationSet, Category, ImageInfo
from cropaware.common import InvalidArgument
from cropaware.sampling.config import SampleDecision, SamplerConfig
from cropaware.sampling.crops import crop_around, pick_region
from cropaware.sampling.cus import draw_cus
from cropaware.sampling.pyramid import PyramidSpec, clamp_sigma, target_sigma


def draw_level(spec: PyramidSpec, weights: Optional[Sequence[float]], rng: np.random.Generator) -> int:
    levels = spec.levels
    if weights is None:
        return levels[int(rng.integers(len(levels)))]
    if len(weights) != len(levels):
        raise InvalidArgument(f"level_weights has {len(weights)} entries for {len(levels)} pyramid levels")
    p = np.asarray(weights, dtype=float)
    return levels[int(rng.choice(len(levels), p=p / p.sum()))]


def draw_isus(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    category: Category,
    image: ImageInfo,
    rng: np.random.Generator,
    index: int,
) -> SampleDecision:
    if not category.is_thing:
        return draw_cus(aset, cfg, spec, category, image, rng, index)

    resize = cfg.s0 / min(image.width, image.height)
    instance = pick_region(aset.by_image_category[(image.id, category.id)], True, rng)
    level = draw_level(spec, cfg.level_weights, rng)
    raw = target_sigma(instance.scale * resize, level, spec, float(rng.random()))
    sigma, clamped = clamp_sigma(raw, cfg.r_th)
    crop = crop_around(instance, image, resize * sigma, cfg.crop, rng)
    return SampleDecision(
        index=index,
        class_id=category.id,
        image_id=image.id,
        is_thing=True,
        resize=resize,
        sigma=sigma,
        crop_rect=crop,
        instance_id=instance.id,
        target_level=level,
        clamped=clamped,
    )
