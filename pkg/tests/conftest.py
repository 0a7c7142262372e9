from typing import Iterable, Tuple

import pytest

from cropaware.annotations import Annotation, AnnotationSet, Category, ImageInfo, SynthSpec, synth_dataset


@pytest.fixture
def make_set():
    """Build an AnnotationSet from (image_id, category_id, bbox) triples."""

    def _make(
        images: Iterable[Tuple[int, float, float]],
        categories: Iterable[Tuple[int, bool]],
        boxes: Iterable[Tuple[int, int, Tuple[float, float, float, float]]],
    ) -> AnnotationSet:
        anns = tuple(
            Annotation(i + 1, image_id, cat_id, bbox, bbox[2] * bbox[3]) for i, (image_id, cat_id, bbox) in enumerate(boxes)
        )
        return AnnotationSet(
            tuple(ImageInfo(i, w, h) for i, w, h in images),
            anns,
            tuple(Category(c, f"class_{c}", thing) for c, thing in categories),
        )

    return _make


@pytest.fixture(scope="session")
def synth_small() -> AnnotationSet:
    return synth_dataset(SynthSpec(n_images=20, n_instances=200, seed=7))
