"""Spherical primitives: sampling, angles, caps and the loss function.

Positions are plain ``numpy`` arrays of shape ``(3,)`` (one node) or
``(n, 3)`` (many nodes) whose norm is the sphere radius. Distances inside
loss and bound formulas use the "loss distance" ``2*pi*R*angle``; the
physical geodesic is ``R*angle`` and is exposed separately.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.rng import as_generator

RADIUS_RTOL = 1e-9


def sample_uniform_sphere(n: int, radius: float, seed) -> np.ndarray:
    """Draw ``n`` points uniformly on the sphere of the given radius.

    Uses normalized 3D standard normals, which is exactly uniform.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise InvalidConfigError(f"n must be >= 1, got {n}")
    if not radius > 0:
        raise InvalidConfigError(f"radius must be > 0, got {radius}")
    rng = as_generator(seed)
    g = rng.standard_normal((n, 3))
    norms = np.linalg.norm(g, axis=1)
    # a zero vector has probability zero; redraw defensively anyway
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(g, axis=1)
    return radius * g / norms[:, None]


def spherical_angle(a, b) -> float:
    """Central angle between two points on the same sphere, in [0, pi]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ra = float(np.linalg.norm(a))
    rb = float(np.linalg.norm(b))
    if ra == 0.0 or rb == 0.0:
        raise InvalidInputError("zero vector is not a point on a sphere")
    if abs(ra - rb) > RADIUS_RTOL * max(ra, rb):
        raise InvalidInputError(f"points lie on different spheres ({ra} vs {rb})")
    cross = np.linalg.norm(np.cross(a, b))
    return float(math.atan2(cross, float(np.dot(a, b))))


def angles_to(points: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Vectorised central angles from each row of ``points`` to ``target``.

    No radius check; callers pass positions from a single network.
    """
    points = np.atleast_2d(points)
    tx, ty, tz = target
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    dots = x * tx + y * ty + z * tz
    cx = y * tz - z * ty
    cy = z * tx - x * tz
    cz = x * ty - y * tx
    return np.arctan2(np.sqrt(cx * cx + cy * cy + cz * cz), dots)


def cap_area(theta: float, radius: float) -> float:
    """Area of a spherical cap of half-angle ``theta``: 2 pi R^2 (1 - cos theta)."""
    if not 0.0 <= theta <= math.pi:
        raise InvalidInputError(f"cap angle must be in [0, pi], got {theta}")
    # 2 sin^2(t/2) is 1 - cos t without cancellation at small t
    return 2.0 * math.pi * radius**2 * 2.0 * math.sin(theta / 2.0) ** 2


def cap_angle(area: float, radius: float) -> float:
    """Inverse of :func:`cap_area`; areas past the full sphere clamp to pi."""
    if not area > 0:
        raise InvalidInputError(f"cap area must be > 0, got {area}")
    frac = area / (4.0 * math.pi * radius**2)
    if frac >= 1.0:
        return math.pi
    # 1 - cos t = 2 frac  ->  sin(t/2) = sqrt(frac)
    return 2.0 * math.asin(math.sqrt(frac))


def half_angle_area_ratio(theta: float) -> float:
    """(1 - cos(theta/2)) / (1 - cos theta), which lies in (1/4, 1/2]."""
    if not 0.0 < theta <= math.pi:
        raise InvalidInputError(f"theta must be in (0, pi], got {theta}")
    # half-angle identities keep full precision as theta -> 0
    s4 = math.sin(theta / 4.0)
    s2 = math.sin(theta / 2.0)
    return (s4 * s4) / (s2 * s2)


def path_loss(angle, d: float, radius: float):
    """Power gain ``min(1, (2 pi R angle)^-d)``; accepts scalars or arrays."""
    if not d > 0:
        raise InvalidConfigError(f"path-loss exponent must be > 0, got {d}")
    dist = 2.0 * math.pi * radius * np.asarray(angle, dtype=float)
    with np.errstate(divide="ignore"):
        gain = np.where(dist <= 1.0, 1.0, np.power(np.maximum(dist, 1.0), -d))
    if gain.ndim == 0:
        return float(gain)
    return gain


def loss_at_distance(distance, d: float):
    """``min(1, D^-d)`` for a distance already in loss-distance units."""
    if not d > 0:
        raise InvalidConfigError(f"path-loss exponent must be > 0, got {d}")
    D = np.asarray(distance, dtype=float)
    gain = np.where(D <= 1.0, 1.0, np.power(np.maximum(D, 1.0), -d))
    if gain.ndim == 0:
        return float(gain)
    return gain


def loss_distance(angle, radius: float):
    """``2 pi R angle``, the distance convention used inside loss formulas."""
    return 2.0 * math.pi * radius * angle


def geodesic_distance(angle, radius: float):
    """Great-circle distance ``R angle`` in meters."""
    return radius * angle


@dataclass(frozen=True)
class SphericalCap:
    center: np.ndarray
    half_angle: float
    radius: float

    @property
    def area(self) -> float:
        return cap_area(self.half_angle, self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Mask of points strictly inside the cap."""
        return angles_to(points, self.center) < self.half_angle
