import numpy as np

from cropaware.annotations import AnnotationSet, Category, ImageInfo
from cropaware.sampling.config import SampleDecision, SamplerConfig
from cropaware.sampling.crops import crop_around, pick_region
from cropaware.sampling.pyramid import PyramidSpec


def draw_cus(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    category: Category,
    image: ImageInfo,
    rng: np.random.Generator,
    index: int,
) -> SampleDecision:
    resize = cfg.s0 / min(image.width, image.height)
    sigma = float(rng.uniform(cfg.r_st[0], cfg.r_st[1]))
    region = pick_region(aset.by_image_category[(image.id, category.id)], category.is_thing, rng)
    crop = crop_around(region, image, resize * sigma, cfg.crop, rng)
    return SampleDecision(
        index=index,
        class_id=category.id,
        image_id=image.id,
        is_thing=category.is_thing,
        resize=resize,
        sigma=sigma,
        crop_rect=crop,
        instance_id=region.id if category.is_thing else None,
    )
