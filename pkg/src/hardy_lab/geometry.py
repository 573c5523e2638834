"""Rectangle with an alternating Dirichlet/free partition of its left side.

The domain is ``[0, a] x [0, b]``.  The left side ``x1 = 0`` is cut into
``N`` periods of length ``eps = b / N``; each period starts with a closed
Dirichlet piece of length ``eps * delta`` followed by a free piece.  Points
of the rectangle are classified into horizontal strips: ``PI1`` when their
height faces a Dirichlet piece (interface lines included) and ``PI2``
otherwise.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import ConfigurationError, DomainError


class SegmentKind(str, enum.Enum):
    DIRICHLET = "D"
    FREE = "F"


class StripClass(str, enum.Enum):
    PI1 = "Pi1"
    PI2 = "Pi2"


@dataclass(frozen=True)
class GeometryConfig:
    a: float = 1.0
    b: float = 1.0
    N: int = 8
    delta: float = 0.5

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be a positive finite length, got {v!r}")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ConfigurationError(f"N must be an integer >= 1, got {self.N!r}")
        if not (isinstance(self.delta, (int, float)) and 0.0 < self.delta <= 1.0):
            raise ConfigurationError(f"delta must lie in (0, 1], got {self.delta!r}")

    @property
    def epsilon(self) -> float:
        return self.b / self.N

    @property
    def dirichlet_length(self) -> float:
        """Length of one Dirichlet piece."""
        return self.epsilon * self.delta

    @property
    def shift(self) -> float:
        """Offset ``(1 - delta) * eps / 2`` added to the distance on PI2."""
        return (1.0 - self.delta) * self.epsilon / 2.0

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "N": int(self.N), "delta": self.delta}

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryConfig":
        unknown = set(data) - {"a", "b", "N", "delta"}
        if unknown:
            raise ConfigurationError(f"unknown geometry key(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class BoundarySegment:
    lo: float
    hi: float
    kind: SegmentKind

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class PointDistances:
    rho: float
    r2: float
    rho_eps: float
    strip: StripClass


def build_partition(config: GeometryConfig) -> List[BoundarySegment]:
    """Ordered list of the boundary pieces tiling ``[0, b]`` on ``x1 = 0``."""
    eps = config.epsilon
    segments = []
    for i in range(config.N):
        lo = i * eps
        hi = (i + 1) * eps if i < config.N - 1 else config.b
        if config.delta >= 1.0:
            segments.append(BoundarySegment(lo, hi, SegmentKind.DIRICHLET))
            continue
        mid = lo + eps * config.delta
        segments.append(BoundarySegment(lo, mid, SegmentKind.DIRICHLET))
        segments.append(BoundarySegment(mid, hi, SegmentKind.FREE))
    return segments


def _period_offset(x2, config: GeometryConfig):
    """Period index and offset of ``x2`` inside its period (vectorized)."""
    eps = config.epsilon
    x2 = np.asarray(x2, dtype=float)
    # snap values within rounding of a period start onto that period
    k = np.clip(np.floor(x2 / eps + 1e-10), 0, config.N - 1)
    return k, np.maximum(x2 - k * eps, 0.0)


def strip_mask_pi2(x2, config: GeometryConfig) -> np.ndarray:
    """Boolean array, true where ``x2`` faces a free piece (strip PI2)."""
    if config.delta >= 1.0:
        return np.zeros(np.shape(x2), dtype=bool)
    _, r = _period_offset(x2, config)
    # closed Dirichlet pieces: the interface lines belong to PI1
    return r > config.dirichlet_length * (1.0 + 1e-12)


def rho_eps_field(x1, x2, config: GeometryConfig) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    return x1 + np.where(strip_mask_pi2(x2, config), config.shift, 0.0)


def r2_field(x1, x2, config: GeometryConfig) -> np.ndarray:
    """Distance to the Dirichlet set, vectorized over points."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if config.delta >= 1.0:
        return np.abs(x1) + 0.0 * x2
    k, r = _period_offset(x2, config)
    d_len = config.dirichlet_length
    above = r - d_len
    # the next period's Dirichlet piece starts at (k + 1) * eps, when it exists
    below_next = np.where(k + 1 < config.N, config.epsilon - r, np.inf)
    dy = np.where(r <= d_len, 0.0, np.minimum(above, below_next))
    return np.hypot(x1, dy)


def distances(x, config: GeometryConfig) -> PointDistances:
    x1, x2 = float(x[0]), float(x[1])
    if not (0.0 <= x1 <= config.a and 0.0 <= x2 <= config.b):
        raise DomainError(f"point {(x1, x2)} lies outside [0, {config.a}] x [0, {config.b}]")
    pi2 = bool(strip_mask_pi2(x2, config))
    return PointDistances(
        rho=x1,
        r2=float(r2_field(x1, x2, config)),
        rho_eps=x1 + (config.shift if pi2 else 0.0),
        strip=StripClass.PI2 if pi2 else StripClass.PI1,
    )


def segments_to_csv(segments: Iterable[BoundarySegment], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lo", "hi", "kind"])
        for s in segments:
            writer.writerow([repr(s.lo), repr(s.hi), s.kind.value])
