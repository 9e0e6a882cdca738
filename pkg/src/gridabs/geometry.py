"""Euclidean primitives shared by every other module: balls, axis-aligned
boxes, inflation, point-to-set distance and convex projection.

All operations are pure and stateless; arrays are treated as immutable.
Functions accepting points are batch-aware: a leading axis of shape
``(..., n)`` is broadcast through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float vector, optionally checking dimension."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    return v


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball ``{y : |y - center| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise ValueError(f"ball radius must be nonnegative, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol: float = 0.0) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + tol


@dataclass(frozen=True, eq=False)
class Box:
    """Closed axis-aligned box ``[lower_1, upper_1] x ... x [lower_n, upper_n]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower)
        hi = as_vector(self.upper, dim=lo.shape[0])
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        ok_lo = np.all(x >= self.lower - tol, axis=-1)
        ok_hi = np.all(x <= self.upper + tol, axis=-1)
        return ok_lo & ok_hi

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.lower, self.upper, size=shape)


def inflate(region: Ball | Box, c: float) -> Ball | Box:
    """Grow a region outward by ``c``.

    For a ball this is the exact Minkowski sum with ``B(c)``.  For a box the
    per-axis growth is an outer approximation of the Minkowski sum (the true
    sum has rounded corners), which preserves overapproximation semantics.
    """
    c = float(c)
    if c < 0:
        raise ValueError(f"inflation constant must be nonnegative, got {c}")
    if isinstance(region, Ball):
        return Ball(region.center, region.radius + c)
    if isinstance(region, Box):
        return Box(region.lower - c, region.upper + c)
    raise TypeError(f"cannot inflate {type(region).__name__}")


def distance_to_box(x, box: Box) -> np.ndarray | float:
    """Exact Euclidean distance from ``x`` to a closed box (0 inside)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != box.dim:
        raise ValueError(f"dimension mismatch: point {x.shape[-1]}, box {box.dim}")
    nearest = np.clip(x, box.lower, box.upper)
    d = np.linalg.norm(x - nearest, axis=-1)
    return float(d) if d.ndim == 0 else d


def distance_to_set(x, region: Ball | Box) -> np.ndarray | float:
    """Euclidean distance ``inf {|x - y| : y in region}`` (0 for members)."""
    if isinstance(region, Box):
        return distance_to_box(x, region)
    if isinstance(region, Ball):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != region.dim:
            raise ValueError(
                f"dimension mismatch: point {x.shape[-1]}, ball {region.dim}"
            )
        d = np.maximum(np.linalg.norm(x - region.center, axis=-1) - region.radius, 0.0)
        return float(d) if d.ndim == 0 else d
    raise TypeError(f"cannot take distance to {type(region).__name__}")


def project(x, region: Ball | Box) -> np.ndarray:
    """Euclidean projection onto a nonempty convex region.

    Idempotent and 1-Lipschitz; the identity on members.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(region, Box):
        return np.clip(x, region.lower, region.upper)
    if isinstance(region, Ball):
        offset = x - region.center
        norm = np.linalg.norm(offset, axis=-1, keepdims=True)
        # scale > 1 only outside the ball; inside, the point is returned as is
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > region.radius, region.radius / norm, 1.0)
        scale = np.where(np.isfinite(scale), scale, 1.0)
        return region.center + offset * scale
    raise TypeError(f"cannot project onto {type(region).__name__}")


def ball_intersects_box(ball: Ball, box: Box, tol: float = 0.0) -> bool:
    """True iff the closed ball meets the closed box, within ``tol`` slack."""
    return bool(distance_to_box(ball.center, box) <= ball.radius + tol)
