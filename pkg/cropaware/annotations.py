"""
Annotation metadata: a minimal subset of the usual detection JSON layout.

    {"images":      [{"id", "width", "height", "file_name"?}],
     "annotations": [{"id", "image_id", "category_id", "bbox": [x, y, w, h], "area"?}],
     "categories":  [{"id", "name", "isthing" | "is_thing"?}]}

Unknown fields are ignored. Object scale is sqrt(bbox area) everywhere.
"""

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Tuple

import numpy as np

from cropaware.common import DataError, InvalidArgument
from cropaware.geometry import Box

logger = logging.getLogger(__name__)

BBOX_TOL = 1e-6


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: float
    height: float
    file_name: str = ""


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    is_thing: bool = True


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    bbox: Tuple[float, float, float, float]
    area: float

    @property
    def box(self) -> Box:
        return Box.from_xywh(*self.bbox)

    @property
    def scale(self) -> float:
        return math.sqrt(self.bbox[2] * self.bbox[3])


@dataclass(frozen=True)
class AnnotationSet:
    images: Tuple[ImageInfo, ...]
    annotations: Tuple[Annotation, ...]
    categories: Tuple[Category, ...]

    def __post_init__(self) -> None:
        _validate(self)

    @cached_property
    def image_by_id(self) -> Dict[int, ImageInfo]:
        return {im.id: im for im in self.images}

    @cached_property
    def category_by_id(self) -> Dict[int, Category]:
        return {c.id: c for c in self.categories}

    @cached_property
    def annotation_by_id(self) -> Dict[int, Annotation]:
        return {a.id: a for a in self.annotations}

    @cached_property
    def images_by_category(self) -> Dict[int, Tuple[int, ...]]:
        out: Dict[int, List[int]] = {c.id: [] for c in self.categories}
        for a in self.annotations:
            ids = out[a.category_id]
            if not ids or ids[-1] != a.image_id:
                ids.append(a.image_id)
        return {k: tuple(sorted(set(v))) for k, v in out.items()}

    @cached_property
    def by_image_category(self) -> Dict[Tuple[int, int], Tuple[Annotation, ...]]:
        out: Dict[Tuple[int, int], List[Annotation]] = {}
        for a in self.annotations:
            out.setdefault((a.image_id, a.category_id), []).append(a)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def things_by_image(self) -> Dict[int, Tuple[Annotation, ...]]:
        out: Dict[int, List[Annotation]] = {im.id: [] for im in self.images}
        for a in self.annotations:
            if self.category_by_id[a.category_id].is_thing:
                out[a.image_id].append(a)
        return {k: tuple(v) for k, v in out.items()}

    def thing_annotations(self) -> List[Annotation]:
        return [a for a in self.annotations if self.category_by_id[a.category_id].is_thing]


def _dupes(ids: List[int]) -> List[int]:
    seen, out = set(), []
    for i in ids:
        if i in seen:
            out.append(i)
        seen.add(i)
    return out


def _validate(aset: AnnotationSet) -> None:
    for kind, ids in (
        ("image", [im.id for im in aset.images]),
        ("annotation", [a.id for a in aset.annotations]),
        ("category", [c.id for c in aset.categories]),
    ):
        d = _dupes(ids)
        if d:
            raise DataError(f"Duplicate {kind} id {d[0]}")

    images = {im.id: im for im in aset.images}
    categories = {c.id for c in aset.categories}
    for im in aset.images:
        if not (im.width > 0 and im.height > 0):
            raise DataError(f"Image {im.id} has non-positive size {im.width}x{im.height}")

    for a in aset.annotations:
        im = images.get(a.image_id)
        if im is None:
            raise DataError(f"Annotation {a.id} references missing image {a.image_id}")
        if a.category_id not in categories:
            raise DataError(f"Annotation {a.id} references missing category {a.category_id}")
        x, y, w, h = a.bbox
        if not (w > 0 and h > 0):
            raise DataError(f"Annotation {a.id} has an empty bbox {a.bbox}")
        if not a.area > 0:
            raise DataError(f"Annotation {a.id} has non-positive area {a.area}")
        tol_x = BBOX_TOL * max(1.0, im.width)
        tol_y = BBOX_TOL * max(1.0, im.height)
        if x < -tol_x or y < -tol_y or x + w > im.width + tol_x or y + h > im.height + tol_y:
            raise DataError(f"Annotation {a.id} bbox {a.bbox} exceeds image {im.id} bounds {im.width}x{im.height}")


def _record_id(rec: Any) -> Any:
    return rec.get("id", "?") if isinstance(rec, dict) else "?"


def _records(raw: Dict[str, Any], key: str) -> List[Dict[str, Any]]:
    recs = raw.get(key)
    if recs is None:
        return []
    if not isinstance(recs, list):
        raise DataError(f"\"{key}\" must be a list of objects, got {type(recs).__name__}")
    for rec in recs:
        if not isinstance(rec, dict):
            raise DataError(f"\"{key}\" holds a non-object entry {rec!r}")
    return recs


def annotations_from_dict(raw: Dict[str, Any]) -> AnnotationSet:
    if not isinstance(raw, dict):
        raise DataError("Annotation file must hold a JSON object")

    images: List[ImageInfo] = []
    for rec in _records(raw, "images"):
        try:
            images.append(ImageInfo(int(rec["id"]), float(rec["width"]), float(rec["height"]), str(rec.get("file_name") or "")))
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise DataError(f"Bad image record {_record_id(rec)}: {e!r}")

    categories: List[Category] = []
    for rec in _records(raw, "categories"):
        try:
            flag = rec.get("isthing", rec.get("is_thing", True))
            categories.append(Category(int(rec["id"]), str(rec.get("name") or rec["id"]), bool(flag)))
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise DataError(f"Bad category record {_record_id(rec)}: {e!r}")

    annotations: List[Annotation] = []
    for rec in _records(raw, "annotations"):
        try:
            bbox = rec["bbox"]
            if len(bbox) != 4:
                raise ValueError(f"bbox needs 4 numbers, got {len(bbox)}")
            x, y, w, h = (float(v) for v in bbox)
            area = float(rec["area"]) if rec.get("area") is not None else w * h
            annotations.append(Annotation(int(rec["id"]), int(rec["image_id"]), int(rec["category_id"]), (x, y, w, h), area))
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise DataError(f"Bad annotation record {_record_id(rec)}: {e!r}")

    return AnnotationSet(tuple(images), tuple(annotations), tuple(categories))


def annotations_to_dict(aset: AnnotationSet) -> Dict[str, Any]:
    return {
        "images": [{"id": im.id, "width": im.width, "height": im.height, "file_name": im.file_name} for im in aset.images],
        "annotations": [
            {"id": a.id, "image_id": a.image_id, "category_id": a.category_id, "bbox": list(a.bbox), "area": a.area}
            for a in aset.annotations
        ],
        "categories": [{"id": c.id, "name": c.name, "isthing": int(c.is_thing)} for c in aset.categories],
    }


def load_annotations(path: str) -> AnnotationSet:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise DataError(f"Cannot read annotations {path}: {e}")
    except json.JSONDecodeError as e:
        raise DataError(f"Annotations {path} are not valid JSON: {e}")
    aset = annotations_from_dict(raw)
    logger.info(
        "Loaded %d images, %d annotations, %d categories from %s",
        len(aset.images), len(aset.annotations), len(aset.categories), path,
    )
    return aset


def save_annotations(aset: AnnotationSet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(annotations_to_dict(aset), f, indent=2)


# =========================
# Synthetic datasets
# =========================


@dataclass(frozen=True)
class SynthSpec:
    n_images: int = 100
    n_classes_thing: int = 8
    n_classes_stuff: int = 4
    # Thing instances; stuff segments come on top, stuff_per_image per image.
    n_instances: int = 1000
    # Log-normal object scale (sqrt area, px). The default is heavy on small objects.
    scale_log_mean: float = math.log(48.0)
    scale_log_sigma: float = 1.0
    image_size: Tuple[int, int] = (2048, 1536)
    stuff_per_image: int = 2
    min_scale: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_images", "n_classes_thing", "n_instances", "image_size"):
            value = getattr(self, name)
            values = value if isinstance(value, tuple) else (value,)
            if any(v < 1 for v in values):
                raise InvalidArgument(f"{name} must be positive, got {value!r}")
        if self.n_classes_stuff < 0 or self.stuff_per_image < 0:
            raise InvalidArgument("Stuff counts cannot be negative")
        if self.n_instances < self.n_classes_thing:
            raise InvalidArgument(f"n_instances ({self.n_instances}) must cover every thing class ({self.n_classes_thing})")
        if self.n_classes_stuff and self.n_images * self.stuff_per_image < self.n_classes_stuff:
            raise InvalidArgument("Not enough stuff segments to cover every stuff class")
        if not self.scale_log_sigma >= 0:
            raise InvalidArgument(f"scale_log_sigma must be >= 0, got {self.scale_log_sigma!r}")


def _place(rng: np.random.Generator, w: float, h: float, width: float, height: float) -> Tuple[float, float, float, float]:
    w = max(0.01, min(round(w, 2), width))
    h = max(0.01, min(round(h, 2), height))
    x = math.floor(rng.uniform(0.0, width - w) * 100.0) / 100.0
    y = math.floor(rng.uniform(0.0, height - h) * 100.0) / 100.0
    return x, y, w, h


def synth_dataset(spec: SynthSpec = SynthSpec()) -> AnnotationSet:
    rng = np.random.default_rng(spec.seed)
    width, height = float(spec.image_size[0]), float(spec.image_size[1])
    images = tuple(ImageInfo(i + 1, width, height, f"synth_{i + 1:06d}.jpg") for i in range(spec.n_images))

    things = [Category(k + 1, f"thing_{k + 1}", True) for k in range(spec.n_classes_thing)]
    stuff = [Category(spec.n_classes_thing + k + 1, f"stuff_{k + 1}", False) for k in range(spec.n_classes_stuff)]

    n = spec.n_instances
    classes = np.concatenate([np.arange(spec.n_classes_thing), rng.integers(spec.n_classes_thing, size=n - spec.n_classes_thing)])
    image_idx = rng.integers(spec.n_images, size=n)
    max_scale = 0.9 * min(width, height)
    scales = np.clip(np.exp(rng.normal(spec.scale_log_mean, spec.scale_log_sigma, size=n)), spec.min_scale, max_scale)
    aspect = np.sqrt(np.exp(rng.normal(0.0, 0.35, size=n)))

    annotations: List[Annotation] = []
    for i in range(n):
        bbox = _place(rng, float(scales[i] * aspect[i]), float(scales[i] / aspect[i]), width, height)
        annotations.append(Annotation(len(annotations) + 1, int(image_idx[i]) + 1, things[int(classes[i])].id, bbox, bbox[2] * bbox[3]))

    if stuff:
        for i, im in enumerate(images):
            for j in range(spec.stuff_per_image):
                cat = stuff[(i * spec.stuff_per_image + j) % len(stuff)]
                bbox = _place(rng, width * rng.uniform(0.3, 1.0), height * rng.uniform(0.2, 0.6), width, height)
                annotations.append(Annotation(len(annotations) + 1, im.id, cat.id, bbox, bbox[2] * bbox[3]))

    return AnnotationSet(images, tuple(annotations), tuple(things + stuff))
