"""Oriented-rectangle geometry: corners, SAT overlap, two-circle clearance.

All functions are pure and operate in double precision.  Touching polygons
(zero gap) count as overlapping -- the safety-conservative tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.heading})")
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class OrientedRect:
    center: Pose2D
    length: float
    width: float

    def __post_init__(self):
        if not (self.length >= self.width > 0.0):
            raise ValueError(f"need length >= width > 0, got {self.length} x {self.width}")


def corners(rect: OrientedRect, scale: float = 1.0) -> np.ndarray:
    """Corner points of the rectangle inflated by ``scale``, CCW, shape (4, 2)."""
    if scale < 1.0:
        raise ValueError(f"scale must be >= 1, got {scale}")
    hl = 0.5 * rect.length * scale
    hw = 0.5 * rect.width * scale
    c, s = math.cos(rect.center.heading), math.sin(rect.center.heading)
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([rect.center.x, rect.center.y])


def _edge_normals(poly: np.ndarray) -> np.ndarray:
    edges = np.roll(poly, -1, axis=0) - poly
    return np.stack([-edges[:, 1], edges[:, 0]], axis=1)


def sat_intersects(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis overlap test for two convex polygons (touching counts).

    Polygons are (n, 2) corner arrays in CCW order; a rectangle only
    contributes two distinct axes but testing all four edges is harmless.
    """
    for axes_src in (a, b):
        normals = _edge_normals(axes_src)
        pa = a @ normals.T
        pb = b @ normals.T
        if np.any(pa.max(axis=0) < pb.min(axis=0)) or np.any(pb.max(axis=0) < pa.min(axis=0)):
            return False
    return True


def cover_circles(rect: OrientedRect) -> tuple[np.ndarray, float]:
    """Two-disc cover of a vehicle rectangle.

    Circle centers sit at +-length/4 along the heading axis from the center;
    radius r = sqrt((l/4)^2 + (w/2)^2) covers each half of the box.
    Returns (centers of shape (2, 2), radius).
    """
    c, s = math.cos(rect.center.heading), math.sin(rect.center.heading)
    off = 0.25 * rect.length
    ctr = np.array([rect.center.x, rect.center.y])
    centers = np.array([ctr + off * np.array([c, s]), ctr - off * np.array([c, s])])
    radius = math.hypot(0.25 * rect.length, 0.5 * rect.width)
    return centers, radius


def vehicle_clearance(ev: OrientedRect, sv: OrientedRect) -> float:
    """Shortest circle-based distance d_veh = d_min - r_EV - r_SV.

    d_min is the minimum of the four center-to-center distances between the
    two-disc covers of each vehicle.  Negative means the covers overlap.
    """
    ca, ra = cover_circles(ev)
    cb, rb = cover_circles(sv)
    d = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=2)
    return float(d.min() - ra - rb)
