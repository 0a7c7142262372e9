import math
import os
from typing import Iterator, List, Optional, Sequence, TypeVar

from dotenv import load_dotenv

load_dotenv()

T = TypeVar("T")

# ====== SETTINGS ======
# Edge comparisons (crop touching, bbox bounds) are done with this relative slack.
EDGE_TOL = 1e-9
# ω values are floored here before taking a log.
OMEGA_FLOOR = 1e-12
# Crops narrower than this (in anchor units) are rejected as degenerate.
DEGENERATE_OMEGA = 1e-9

DEFAULT_BETA = 1.0
DEFAULT_EPS = 1e-7
# =======================


class CabbError(Exception):
    """Base class for every error raised by the cropaware package."""


class InvalidArgument(CabbError, ValueError):
    pass


class DataError(CabbError):
    pass


def get_env(name: str, default: Optional[str] = None) -> str:
    v = os.getenv(name)
    if v is not None and v.strip():
        return v.strip()
    if default is not None:
        return default
    raise RuntimeError(f"Missing required environment variable: {name}")


def get_env_int(name: str, default: int) -> int:
    raw = get_env(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError(f"Environment variable {name} is not an integer: {raw!r}")


def get_env_float(name: str, default: float) -> float:
    raw = get_env(name, repr(float(default)))
    try:
        return float(raw)
    except ValueError:
        raise RuntimeError(f"Environment variable {name} is not a number: {raw!r}")


def default_workers() -> int:
    return max(1, get_env_int("CABB_WORKERS", 1))


def default_beta() -> float:
    return get_env_float("CABB_BETA", DEFAULT_BETA)


def default_output_dir() -> str:
    return get_env("CABB_OUTPUT_DIR", "out")


def require_positive(name: str, value: float) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0:
        raise InvalidArgument(f"{name} must be a positive finite number, got {value!r}")
    return v


def require_finite(name: str, value: float) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise InvalidArgument(f"{name} must be finite, got {value!r}")
    return v


def edge_tol(scale: float) -> float:
    return EDGE_TOL * max(1.0, abs(scale))


def chunks(seq: Sequence[T], size: int = 500) -> Iterator[Sequence[T]]:
    for i in range(0, len(seq), size):
        yield seq[i: i + size]


def percentile(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile, q in [0, 100]."""
    if not values:
        return 0.0
    ordered: List[float] = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


def parse_floats(text: str, count: Optional[int] = None, what: str = "value") -> List[float]:
    parts = [p.strip() for p in str(text or "").split(",")]
    try:
        out = [float(p) for p in parts if p]
    except ValueError:
        raise InvalidArgument(f"Could not parse {what} from {text!r}")
    if count is not None and len(out) != count:
        raise InvalidArgument(f"Expected {count} comma-separated numbers for {what}, got {text!r}")
    if any(not math.isfinite(x) for x in out):
        raise InvalidArgument(f"Non-finite number in {what}: {text!r}")
    return out


def fmt_float(x: float) -> str:
    # Shortest text that round-trips exactly; used for replayable instance lines.
    return repr(float(x))
