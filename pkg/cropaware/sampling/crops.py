from typing import Sequence, Tuple

import numpy as np

from cropaware.annotations import Annotation, ImageInfo
from cropaware.geometry import Box, CropRect


def point_in_box(box: Box, rng: np.random.Generator) -> Tuple[float, float]:
    l, t, r, b = box.corners
    return float(rng.uniform(l, r)), float(rng.uniform(t, b))


def place_crop(point: Tuple[float, float], image_w: float, image_h: float, crop: Tuple[int, int]) -> CropRect:
    """Crop centered on point, shifted to fit inside the image and shrunk if the image is smaller."""
    cw = min(float(crop[0]), image_w)
    ch = min(float(crop[1]), image_h)
    x0 = min(max(point[0] - cw / 2.0, 0.0), image_w - cw)
    y0 = min(max(point[1] - ch / 2.0, 0.0), image_h - ch)
    return CropRect(cw, ch, x0, y0)


def pick_region(anns: Sequence[Annotation], is_thing: bool, rng: np.random.Generator) -> Annotation:
    """Instance uniformly for things; stuff segment weighted by bbox area."""
    if is_thing or len(anns) == 1:
        return anns[int(rng.integers(len(anns)))]
    areas = np.array([a.bbox[2] * a.bbox[3] for a in anns], dtype=float)
    return anns[int(rng.choice(len(anns), p=areas / areas.sum()))]


def crop_around(ann: Annotation, image: ImageInfo, total_scale: float, crop: Tuple[int, int], rng: np.random.Generator) -> CropRect:
    point = point_in_box(ann.box.scaled(total_scale), rng)
    return place_crop(point, image.width * total_scale, image.height * total_scale, crop)
