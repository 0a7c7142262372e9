import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from statistics import fmean
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from cropaware.common import DEFAULT_BETA, DEFAULT_EPS, InvalidArgument, chunks, fmt_float, parse_floats, percentile
from cropaware.geometry import Box, CropRect, Delta, crop_box, encode, format_box, format_delta, parse_box, parse_delta, sample_rho_member
from cropaware.losses import HuberParam, l_bb, l_bb_dim
from cropaware.oracle import OracleConfig, oracle_dimension
from cropaware.solver import CabbSolution, DimKind, SolverConfig, cabb_loss, constraint_violation

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

RECORD_KEYS = ("gt", "anchor", "crop", "origin", "image", "pred", "beta")
KIND_PAIRS: List[Tuple[DimKind, DimKind]] = list(itertools.product(DimKind, DimKind))

# ====== FUZZ / BENCH SETTINGS ======
FUZZ_BETAS = (1.0 / 9.0, 1.0)
OMEGA_P_RANGE = (1e-2, 1e2)
BENCH_FLOOR = 20_000
BENCH_TARGET = 100_000
# ===================================


@dataclass(frozen=True)
class InstanceRecord:
    """One solvable CABB instance; text form is a single replayable line."""

    gt: Box
    anchor: Box
    crop: CropRect
    pred: Delta
    beta: float = DEFAULT_BETA
    image: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        HuberParam(self.beta)
        if self.image is not None and not (self.image[0] > 0 and self.image[1] > 0):
            raise InvalidArgument(f"image extent must be positive, got {self.image!r}")

    @classmethod
    def parse(cls, line: str, box_format: str = "center") -> "InstanceRecord":
        fields: Dict[str, str] = {}
        for token in str(line or "").split():
            key, sep, value = token.partition("=")
            if not sep or key not in RECORD_KEYS:
                raise InvalidArgument(f"Unknown instance field {token!r}; expected key=value with keys {RECORD_KEYS}")
            fields[key] = value

        missing = [k for k in ("gt", "anchor", "crop", "pred") if k not in fields]
        if missing:
            raise InvalidArgument(f"Instance line is missing {', '.join(missing)}: {line!r}")

        w, h = parse_floats(fields["crop"], 2, "crop")
        x0, y0 = parse_floats(fields["origin"], 2, "origin") if "origin" in fields else (0.0, 0.0)
        image = None
        if "image" in fields:
            iw, ih = parse_floats(fields["image"], 2, "image")
            image = (iw, ih)
        beta = parse_floats(fields["beta"], 1, "beta")[0] if "beta" in fields else DEFAULT_BETA

        return cls(
            gt=parse_box(fields["gt"], box_format),
            anchor=parse_box(fields["anchor"], box_format),
            crop=CropRect(w, h, x0, y0),
            pred=parse_delta(fields["pred"]),
            beta=beta,
            image=image,
        )

    def to_line(self) -> str:
        parts = [
            f"gt={format_box(self.gt)}",
            f"anchor={format_box(self.anchor)}",
            f"crop={fmt_float(self.crop.width)},{fmt_float(self.crop.height)}",
        ]
        if not self.crop.at_origin:
            parts.append(f"origin={fmt_float(self.crop.x0)},{fmt_float(self.crop.y0)}")
        if self.image is not None:
            parts.append(f"image={fmt_float(self.image[0])},{fmt_float(self.image[1])}")
        parts.append(f"pred={format_delta(self.pred)}")
        parts.append(f"beta={fmt_float(self.beta)}")
        return " ".join(parts)

    def solver_config(self, eps: float = DEFAULT_EPS) -> SolverConfig:
        return _config_for(self.beta, eps)

    def solve(self, cfg: Optional[SolverConfig] = None) -> CabbSolution:
        return cabb_loss(self.pred, self.gt, self.anchor, self.crop, cfg or self.solver_config(), self.image)

    def cropped_encoding(self) -> Delta:
        """Encoding of the cropped ground truth, the target of the standard loss."""
        cropped = crop_box(self.gt, self.crop)
        if cropped is None:
            raise InvalidArgument("Ground truth does not intersect the crop")
        return encode(cropped, self.anchor)

    def l_bb_cropped(self) -> float:
        return l_bb(self.pred, self.cropped_encoding(), self.beta)

    def with_pred(self, pred: Delta) -> "InstanceRecord":
        return replace(self, pred=pred)


@lru_cache(maxsize=64)
def _config_for(beta: float, eps: float) -> SolverConfig:
    return SolverConfig(beta=HuberParam(beta), eps=eps)


# =========================
# Random instances
# =========================


def _random_axis(rng: np.random.Generator, kind: DimKind, extent: float) -> Tuple[float, float]:
    margin = 0.02 * extent
    if kind == DimKind.SINGLETON:
        d = extent * rng.uniform(0.05, 0.6)
        lo = rng.uniform(margin, extent - d - margin)
        return lo, lo + d
    if kind == DimKind.RIGHT_OPEN:
        lo = rng.uniform(margin, 0.9 * extent)
        return lo, extent * (1.0 + rng.uniform(0.0, 1.0))
    if kind == DimKind.LEFT_OPEN:
        hi = rng.uniform(0.1 * extent, extent - margin)
        return -extent * rng.uniform(0.0, 1.0), hi
    return -extent * rng.uniform(0.0, 1.0), extent * (1.0 + rng.uniform(0.0, 1.0))


def random_record(
    rng: np.random.Generator,
    beta: float = DEFAULT_BETA,
    kinds: Optional[Tuple[DimKind, DimKind]] = None,
) -> InstanceRecord:
    """
    Random instance whose x / y dimensions fall in the requested feasible-set
    kinds. Prediction sizes are log-uniform over OMEGA_P_RANGE.
    """
    if kinds is None:
        kinds = KIND_PAIRS[int(rng.integers(len(KIND_PAIRS)))]
    extents = (float(rng.uniform(64.0, 1024.0)), float(rng.uniform(64.0, 1024.0)))

    spans = [_random_axis(rng, k, e) for k, e in zip(kinds, extents)]
    gt = Box.from_corners(spans[0][0], spans[1][0], spans[0][1], spans[1][1])
    crop = CropRect(extents[0], extents[1])

    anchor_c = [float(rng.uniform(-0.2 * e, 1.2 * e)) for e in extents]
    anchor_d = [e * math.exp(rng.uniform(math.log(0.02), math.log(2.0))) for e in extents]
    anchor = Box(anchor_c[0], anchor_c[1], anchor_d[0], anchor_d[1])

    target = encode(crop_box(gt, crop), anchor)
    lo, hi = math.log(OMEGA_P_RANGE[0]), math.log(OMEGA_P_RANGE[1])
    omegas = [math.exp(rng.uniform(lo, hi)) for _ in range(2)]
    deltas = [target.delta(axis) + rng.uniform(-3.0, 3.0) * max(1.0, target.omega(axis)) for axis in (0, 1)]
    pred = Delta(deltas[0], deltas[1], omegas[0], omegas[1])
    return InstanceRecord(gt=gt, anchor=anchor, crop=crop, pred=pred, beta=beta)


def stratified_records(n: int, seed: int, betas: Sequence[float] = FUZZ_BETAS) -> List[InstanceRecord]:
    """n instances cycling through every (x kind, y kind) pair and every β; instance i uses its own stream."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if not betas:
        raise InvalidArgument("At least one beta is required")
    out: List[InstanceRecord] = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        kinds = KIND_PAIRS[i % len(KIND_PAIRS)]
        beta = betas[(i // len(KIND_PAIRS)) % len(betas)]
        out.append(random_record(rng, beta, kinds))
    return out


def feasible_record(rng: np.random.Generator, beta: float = DEFAULT_BETA, kinds: Optional[Tuple[DimKind, DimKind]] = None) -> InstanceRecord:
    """Instance whose prediction encodes a random member of the crop-aware set."""
    rec = random_record(rng, beta, kinds)
    x = sample_rho_member(rec.gt, rec.crop, rng)
    return rec.with_pred(encode(x, rec.anchor))


# =========================
# Batch evaluation
# =========================


def _map_ordered(fn: Callable[[Sequence[T]], List[R]], items: Sequence[T], workers: int, size: int) -> List[R]:
    parts = list(chunks(items, size))
    out: List[R] = []
    if workers <= 1 or len(parts) <= 1:
        for part in parts:
            out.extend(fn(part))
        return out
    return _run_parallel(fn, parts, workers)


def _solve_chunk(records: Sequence[InstanceRecord]) -> List[CabbSolution]:
    return [r.solve() for r in records]


def solve_batch(records: Sequence[InstanceRecord], workers: int = 1, chunk_size: int = 512) -> List[CabbSolution]:
    """Solve every record, in input order."""
    return _map_ordered(_solve_chunk, records, workers, chunk_size)


# =========================
# Fuzz certification
# =========================


@dataclass(frozen=True)
class FuzzOutcome:
    kinds: Tuple[str, str]
    beta: float
    # Solver objective minus oracle objective, worst dimension.
    gap: float
    feasibility: float
    # L_CABB minus the standard loss against the cropped ground truth.
    lower_bound_gap: float
    singleton_exact: bool
    line: str

    def violations(self, tol: float, feas_tol: float = 1e-7, lb_tol: float = 1e-12) -> List[str]:
        out: List[str] = []
        if self.gap > tol:
            out.append(f"oracle gap {self.gap:.3e}")
        if self.feasibility > feas_tol:
            out.append(f"feasibility {self.feasibility:.3e}")
        if self.lower_bound_gap > lb_tol:
            out.append(f"lower bound {self.lower_bound_gap:.3e}")
        if not self.singleton_exact:
            out.append("singleton loss differs from standard loss")
        return out


def fuzz_one(record: InstanceRecord, oracle_cfg: OracleConfig = OracleConfig(), eps: float = DEFAULT_EPS) -> FuzzOutcome:
    sol = record.solve(record.solver_config(eps))
    gap = -math.inf
    feas = 0.0
    for axis, case in enumerate(sol.dim_cases):
        d, w = sol.delta_star.delta(axis), sol.delta_star.omega(axis)
        ours = l_bb_dim(record.pred.delta(axis), record.pred.omega(axis), d, w, record.beta)
        _, _, ref = oracle_dimension(case, record.pred.delta(axis), record.pred.omega(axis), record.beta, oracle_cfg)
        gap = max(gap, ours - ref)
        feas = max(feas, constraint_violation(case, d, w))

    standard = record.l_bb_cropped()
    singleton = all(k == DimKind.SINGLETON for k in sol.per_dim_case)
    return FuzzOutcome(
        kinds=(sol.per_dim_case[0].value, sol.per_dim_case[1].value),
        beta=record.beta,
        gap=gap,
        feasibility=feas,
        lower_bound_gap=sol.loss - standard,
        singleton_exact=(not singleton) or sol.loss == standard or (not record.crop.at_origin and abs(sol.loss - standard) <= 1e-12),
        line=record.to_line(),
    )


def _fuzz_chunk(args: Tuple[Sequence[InstanceRecord], OracleConfig]) -> List[FuzzOutcome]:
    records, cfg = args
    return [fuzz_one(r, cfg) for r in records]


def run_fuzz(records: Sequence[InstanceRecord], oracle_cfg: OracleConfig = OracleConfig(), workers: int = 1) -> List[FuzzOutcome]:
    parts = [(part, oracle_cfg) for part in chunks(records, 64)]
    if workers <= 1:
        return [o for p in parts for o in _fuzz_chunk(p)]
    return _run_parallel(_fuzz_chunk, parts, workers)


def _run_parallel(fn: Callable[[T], List[R]], parts: Sequence[T], workers: int) -> List[R]:
    out: List[R] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(fn, parts):
            out.extend(res)
    return out


# =========================
# Gradient check
# =========================


@dataclass(frozen=True)
class GradcheckOutcome:
    # Worst relative error over probes with a stable branch signature.
    max_rel_error: float
    # Worst relative error over every probe.
    raw_max_rel_error: float
    skipped: int
    line: str


def _signature(sol: CabbSolution, pred: Delta, beta: float) -> Tuple:
    regions = []
    for axis in (0, 1):
        dd = pred.delta(axis) - sol.delta_star.delta(axis)
        dw = math.log(pred.omega(axis)) - math.log(sol.delta_star.omega(axis))
        regions.append((abs(dd) <= beta, abs(dw) <= beta))
    return sol.per_dim_case, sol.per_dim_branch, tuple(regions)


def _bump(p: Delta, component: int, step: float) -> Delta:
    values = list(p.as_tuple())
    values[component] += step
    return Delta(*values)


def gradcheck_one(record: InstanceRecord, h: float = 1e-5, eps: float = DEFAULT_EPS) -> GradcheckOutcome:
    """Compare the envelope gradient with central differences of the re-solved loss."""
    cfg = record.solver_config(eps)
    base = record.solve(cfg)
    analytic = (*base.grad_delta, *base.grad_omega)
    sig = _signature(base, record.pred, record.beta)

    worst, raw_worst, skipped = 0.0, 0.0, 0
    for component in range(4):
        plus_p, minus_p = _bump(record.pred, component, h), _bump(record.pred, component, -h)
        plus = record.with_pred(plus_p).solve(cfg)
        minus = record.with_pred(minus_p).solve(cfg)
        numeric = (plus.loss - minus.loss) / (2.0 * h)
        err = abs(analytic[component] - numeric) / max(1.0, abs(analytic[component]))
        raw_worst = max(raw_worst, err)
        if _signature(plus, plus_p, record.beta) != sig or _signature(minus, minus_p, record.beta) != sig:
            skipped += 1
            continue
        worst = max(worst, err)
    return GradcheckOutcome(max_rel_error=worst, raw_max_rel_error=raw_worst, skipped=skipped, line=record.to_line())


def _gradcheck_chunk(args: Tuple[Sequence[InstanceRecord], float]) -> List[GradcheckOutcome]:
    records, h = args
    return [gradcheck_one(r, h) for r in records]


def run_gradcheck(records: Sequence[InstanceRecord], h: float = 1e-5, workers: int = 1) -> List[GradcheckOutcome]:
    if not h > 0:
        raise InvalidArgument(f"h must be positive, got {h!r}")
    parts = [(part, h) for part in chunks(records, 64)]
    if workers <= 1:
        return [o for p in parts for o in _gradcheck_chunk(p)]
    return _run_parallel(_gradcheck_chunk, parts, workers)


# =========================
# Throughput benchmark
# =========================


@dataclass(frozen=True)
class BenchReport:
    n: int
    batch: int
    workers: int
    seconds: float
    solves_per_sec: float
    batch_ms_mean: float
    batch_ms_p50: float
    batch_ms_p95: float
    per_box_us: float

    def passes(self, floor: float = BENCH_FLOOR) -> bool:
        return self.solves_per_sec >= floor

    @property
    def met_target(self) -> bool:
        return self.solves_per_sec >= BENCH_TARGET


def _timed_chunk(records: Sequence[InstanceRecord]) -> List[float]:
    t0 = time.perf_counter()
    for r in records:
        cabb_loss(r.pred, r.gt, r.anchor, r.crop, r.solver_config(), r.image)
    return [(time.perf_counter() - t0) * 1000.0]


def run_bench(records: Sequence[InstanceRecord], batch: int = 512, workers: int = 1, warmup: int = 256) -> BenchReport:
    if not records:
        raise InvalidArgument("Benchmark needs at least one instance")
    if batch < 1:
        raise InvalidArgument(f"batch must be >= 1, got {batch}")

    _timed_chunk(records[:warmup])

    t0 = time.perf_counter()
    batch_ms = _map_ordered(_timed_chunk, records, workers, batch)
    seconds = time.perf_counter() - t0

    n = len(records)
    return BenchReport(
        n=n,
        batch=batch,
        workers=workers,
        seconds=seconds,
        solves_per_sec=n / seconds if seconds > 0 else math.inf,
        batch_ms_mean=fmean(batch_ms),
        batch_ms_p50=percentile(batch_ms, 50),
        batch_ms_p95=percentile(batch_ms, 95),
        per_box_us=seconds / n * 1e6,
    )
