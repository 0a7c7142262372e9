"""
Class-uniform (CUS) and instance scale-uniform (ISUS) sampling simulators.

Only annotation geometry is used; no pixels are read. Draw i of a run uses
its own stream seeded with (seed, i), so runs are reproducible and can be
sharded across processes.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

import numpy as np

from cropaware.annotations import Annotation, AnnotationSet
from cropaware.common import DataError, InvalidArgument, chunks
from cropaware.geometry import crop_box
from cropaware.sampling.config import DATASET_PRESETS, SampleDecision, SampleMode, SamplerConfig, preset
from cropaware.sampling.cus import draw_cus
from cropaware.sampling.isus import draw_isus
from cropaware.sampling.pyramid import PyramidSpec, level_band, level_for, sigma_for_instance, target_sigma

logger = logging.getLogger(__name__)

__all__ = [
    "DATASET_PRESETS",
    "PyramidSpec",
    "SampleDecision",
    "SampleMode",
    "SamplerConfig",
    "check_sampleable",
    "decision_level",
    "draw_sample",
    "level_band",
    "level_for",
    "level_histogram",
    "preset",
    "selected_scale",
    "sigma_for_instance",
    "simulate",
    "target_sigma",
]

DRAWERS = {
    SampleMode.CUS: draw_cus,
    SampleMode.ISUS: draw_isus,
}

LEVEL_MEASURES = ("scaled", "cropped")


def check_sampleable(aset: AnnotationSet) -> None:
    if not aset.images or not aset.categories:
        raise DataError("Dataset has no images or no categories to sample from")
    for c in aset.categories:
        if not aset.images_by_category.get(c.id):
            raise DataError(f"Class {c.id} ({c.name}) does not appear in any image")


def draw_sample(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    mode: SampleMode,
    rng: np.random.Generator,
    index: int = 0,
) -> SampleDecision:
    """One draw: uniform class, uniform image containing it, then the mode-specific scale and crop."""
    category = aset.categories[int(rng.integers(len(aset.categories)))]
    image_ids = aset.images_by_category.get(category.id)
    if not image_ids:
        raise DataError(f"Class {category.id} ({category.name}) does not appear in any image")
    image = aset.image_by_id[image_ids[int(rng.integers(len(image_ids)))]]
    return DRAWERS[SampleMode(mode)](aset, cfg, spec, category, image, rng, index)


def _simulate_range(args) -> List[SampleDecision]:
    aset, cfg, spec, mode, indices = args
    return [draw_sample(aset, cfg, spec, mode, np.random.default_rng([cfg.seed, i]), i) for i in indices]


def simulate(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    mode: SampleMode,
    n_draws: int,
    workers: int = 1,
) -> List[SampleDecision]:
    if n_draws < 1:
        raise InvalidArgument(f"n_draws must be >= 1, got {n_draws}")
    check_sampleable(aset)
    shards = [(aset, cfg, spec, mode, part) for part in chunks(range(n_draws), 5000)]
    if workers <= 1 or len(shards) <= 1:
        out = [d for s in shards for d in _simulate_range(s)]
    else:
        out = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_simulate_range, shards):
                out.extend(res)
    clamped = sum(1 for d in out if d.clamped)
    logger.info("Simulated %d %s draws (%d clamped)", len(out), SampleMode(mode).value, clamped)
    return out


def selected_scale(decision: SampleDecision, ann: Annotation) -> float:
    """Object scale of the selected instance after resize and σ."""
    return decision.sigma * (ann.scale * decision.resize)


def decision_level(aset: AnnotationSet, decision: SampleDecision, spec: PyramidSpec, measure: str = "scaled") -> Optional[int]:
    if not decision.is_thing or decision.instance_id is None:
        return None
    ann = aset.annotation_by_id[decision.instance_id]
    if measure == "cropped":
        cropped = crop_box(ann.box.scaled(decision.total_scale), decision.crop_rect)
        if cropped is not None:
            return level_for(cropped.scale, spec)
    return level_for(selected_scale(decision, ann), spec)


def level_histogram(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    mode: SampleMode,
    n_draws: int,
    measure: str = "scaled",
    workers: int = 1,
    decisions: Optional[List[SampleDecision]] = None,
) -> Dict[int, int]:
    """Pyramid level of the selected instance, counted over the thing draws."""
    if measure not in LEVEL_MEASURES:
        raise InvalidArgument(f"measure must be one of {LEVEL_MEASURES}, got {measure!r}")
    if decisions is None:
        decisions = simulate(aset, cfg, spec, mode, n_draws, workers)
    counts = {level: 0 for level in spec.levels}
    for d in decisions:
        level = decision_level(aset, d, spec, measure)
        if level is not None:
            counts[level] += 1
    return counts
