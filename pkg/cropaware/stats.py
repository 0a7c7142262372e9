import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cropaware.annotations import AnnotationSet
from cropaware.common import InvalidArgument
from cropaware.geometry import crop_box, iou
from cropaware.sampling import PyramidSpec, SampleDecision, SampleMode, SamplerConfig, level_for, simulate

logger = logging.getLogger(__name__)

DEFAULT_SCALE_EDGES = (0.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0)


@dataclass(frozen=True)
class ScaleHistogram:
    bin_edges: Tuple[float, ...]
    counts: Tuple[int, ...]
    # Instances outside [first edge, last edge].
    below: int = 0
    above: int = 0


@dataclass(frozen=True)
class CropIouRow:
    size_lo: float
    size_hi: float
    count: int
    mean_iou: float


def _check_edges(edges: Sequence[float]) -> np.ndarray:
    arr = np.asarray(edges, dtype=float)
    if arr.ndim != 1 or arr.size < 2 or not np.all(np.diff(arr) > 0) or not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"Bin edges must be a strictly increasing sequence of at least two numbers, got {list(edges)}")
    if arr[0] < 0:
        raise InvalidArgument("Bin edges cannot be negative")
    return arr


def scale_histogram(aset: AnnotationSet, bin_edges: Sequence[float] = DEFAULT_SCALE_EDGES, things_only: bool = True) -> ScaleHistogram:
    """Histogram of object scale sqrt(bbox area); the last bin includes its right edge."""
    edges = _check_edges(bin_edges)
    anns = aset.thing_annotations() if things_only else list(aset.annotations)
    scales = np.array([a.scale for a in anns], dtype=float)
    counts, _ = np.histogram(scales, bins=edges)
    below = int(np.sum(scales < edges[0]))
    above = int(np.sum(scales > edges[-1]))
    if below or above:
        logger.info("scale_histogram: %d instances below and %d above the bin range", below, above)
    return ScaleHistogram(tuple(float(e) for e in edges), tuple(int(c) for c in counts), below, above)


def raw_level_histogram(aset: AnnotationSet, spec: PyramidSpec, s0: float) -> Dict[int, int]:
    """Pyramid levels of every thing instance after the s0 resize, with no augmentation."""
    counts = {level: 0 for level in spec.levels}
    for a in aset.thing_annotations():
        im = aset.image_by_id[a.image_id]
        resize = s0 / min(im.width, im.height)
        counts[level_for(a.scale * resize, spec)] += 1
    return counts


def crop_iou_by_size(
    aset: AnnotationSet,
    cfg: SamplerConfig,
    spec: PyramidSpec,
    mode: SampleMode,
    n_draws: int,
    size_bin_edges: Sequence[float] = DEFAULT_SCALE_EDGES,
    workers: int = 1,
    decisions: Optional[List[SampleDecision]] = None,
) -> List[CropIouRow]:
    """
    Mean IoU between each scaled thing box and its cropped version, bucketed by
    the scaled box size. Only boxes intersecting the crop count; empty buckets
    are left out.
    """
    edges = _check_edges(size_bin_edges)
    if decisions is None:
        decisions = simulate(aset, cfg, spec, mode, n_draws, workers)

    sums = np.zeros(edges.size - 1)
    counts = np.zeros(edges.size - 1, dtype=int)
    for d in decisions:
        for a in aset.things_by_image[d.image_id]:
            scaled = a.box.scaled(d.total_scale)
            cropped = crop_box(scaled, d.crop_rect)
            if cropped is None:
                continue
            size = scaled.scale
            if size < edges[0] or size > edges[-1]:
                continue
            k = min(int(np.searchsorted(edges, size, side="right")) - 1, edges.size - 2)
            sums[k] += iou(cropped, scaled)
            counts[k] += 1

    return [
        CropIouRow(float(edges[k]), float(edges[k + 1]), int(counts[k]), float(sums[k] / counts[k]))
        for k in range(edges.size - 1)
        if counts[k] > 0
    ]


def iou_trend_violations(rows: Sequence[CropIouRow]) -> List[Tuple[float, float]]:
    """Size buckets whose mean IoU rises above the previous bucket's."""
    out = []
    for prev, cur in zip(rows, rows[1:]):
        if cur.mean_iou > prev.mean_iou + 1e-12:
            out.append((cur.size_lo, cur.size_hi))
    return out
