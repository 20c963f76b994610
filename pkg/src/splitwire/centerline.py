"""Span frame, centerline parabola and relative (cross-section) coordinates.

A span segment is described in a horizontal frame: ``w`` runs along the
principal horizontal direction of the points, ``d`` is the signed offset to
the left of it. The centerline is the least-squares parabola ``z(w)``; the
relative coordinate of a point is ``(d, z - z(w))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InsufficientDataError
from .pointcloud_io import PointCloud

# condition-number ceiling for the scaled normal matrices
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SpanFrame:
    origin: tuple[float, float]
    direction: tuple[float, float]

    @property
    def perp(self) -> tuple[float, float]:
        ux, uy = self.direction
        return (-uy, ux)

    def to_world(self, w, d):
        """Map frame coordinates back to horizontal ``(x, y)`` arrays."""
        w = np.asarray(w, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        ux, uy = self.direction
        px, py = self.perp
        x = self.origin[0] + w * ux + d * px
        y = self.origin[1] + w * uy + d * py
        return x, y


@dataclass(frozen=True)
class Projection:
    """Per-point ``(w, d, z)`` arrays in input order."""

    w: np.ndarray
    d: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.w)


@dataclass(frozen=True)
class ParabolaModel:
    """``z = A w**2 + B w + C``."""

    A: float
    B: float
    C: float

    def __call__(self, w):
        w = np.asarray(w, dtype=np.float64)
        return (self.A * w + self.B) * w + self.C

    def as_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C}


def fit_span_frame(cloud: PointCloud) -> SpanFrame:
    """Fit the principal horizontal line through the horizontal centroid.

    The direction is the dominant eigenvector of the 2x2 horizontal scatter
    matrix. Its sign makes the point of largest ``|w|`` (last index on ties)
    project to positive ``w``.
    """
    n = len(cloud)
    if n < 2:
        raise DegenerateGeometryError(f"span frame needs at least 2 points, got {n}")
    xy = cloud.xyz[:, :2]
    # offsets from a member point are exact for nearby coordinates, so the
    # centroid keeps full precision even at large map coordinates
    origin = xy[0] + (xy - xy[0]).mean(axis=0)
    centered = xy - origin
    scatter = centered.T @ centered
    _, vecs = np.linalg.eigh(scatter)
    u = vecs[:, 1]
    u = u / np.hypot(u[0], u[1])
    w = centered @ u
    if w.max() - w.min() <= 1e-6:
        raise DegenerateGeometryError("points are horizontally coincident")
    mag = np.abs(w)
    anchor = np.flatnonzero(mag == mag.max())[-1]
    if w[anchor] < 0:
        u = -u
    return SpanFrame((float(origin[0]), float(origin[1])), (float(u[0]), float(u[1])))


def project(cloud: PointCloud, frame: SpanFrame) -> Projection:
    dx = cloud.xyz[:, 0] - frame.origin[0]
    dy = cloud.xyz[:, 1] - frame.origin[1]
    ux, uy = frame.direction
    px, py = frame.perp
    return Projection(dx * ux + dy * uy, dx * px + dy * py, cloud.xyz[:, 2].copy())


def _scaled(w: np.ndarray) -> tuple[np.ndarray, float, float]:
    lo, hi = float(w.min()), float(w.max())
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return (w - center) / half, center, half


def _solve_normal(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    normal = design.T @ design
    if np.linalg.cond(normal) > MAX_CONDITION:
        raise DegenerateGeometryError("normal matrix is singular to working precision")
    return np.linalg.solve(normal, design.T @ target)


def fit_parabola(w, z) -> ParabolaModel:
    """Least-squares parabola through ``(w, z)`` samples.

    The normal equations are formed in ``w`` centered and scaled to [-1, 1];
    coefficients are converted back to the original ``w``.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if len(w) != len(z):
        raise ValueError("w and z differ in length")
    if len(w) < 3 or len(np.unique(w)) < 3:
        raise InsufficientDataError(
            f"parabola fit needs 3 distinct w values, got {len(np.unique(w))} of {len(w)} points"
        )
    t, c, s = _scaled(w)
    a, b, e = _solve_normal(np.column_stack([t * t, t, np.ones_like(t)]), z)
    A = a / (s * s)
    B = b / s - 2.0 * a * c / (s * s)
    C = a * c * c / (s * s) - b * c / s + e
    return ParabolaModel(float(A), float(B), float(C))


def fit_line(w, d) -> tuple[float, float]:
    """Least-squares ``d = d0 + d1 * w``; returns ``(d0, d1)``."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    if len(w) < 2 or len(np.unique(w)) < 2:
        raise InsufficientDataError("line fit needs 2 distinct w values")
    t, c, s = _scaled(w)
    b, e = _solve_normal(np.column_stack([t, np.ones_like(t)]), d)
    return float(e - b * c / s), float(b / s)


def relative_coords(projected: Projection, model: ParabolaModel) -> np.ndarray:
    """Return an ``(n, 2)`` array of ``(d, r)`` with ``r = z - model(w)``."""
    r = projected.z - model(projected.w)
    return np.column_stack([projected.d, r])


@dataclass(frozen=True)
class Centerline:
    frame: SpanFrame
    projection: Projection
    parabola: ParabolaModel
    coords: np.ndarray


def compute_centerline(cloud: PointCloud) -> Centerline:
    """Frame, projection, parabola and relative coordinates in one pass."""
    frame = fit_span_frame(cloud)
    proj = project(cloud, frame)
    model = fit_parabola(proj.w, proj.z)
    return Centerline(frame, proj, model, relative_coords(proj, model))
