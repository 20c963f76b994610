"""Per-sub-conductor least-squares wire models and bundle cross-section geometry."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .centerline import ParabolaModel, SpanFrame, fit_line, fit_parabola, project
from .errors import ContractError, InsufficientDataError, ParameterError
from .pointcloud_io import PointCloud


@dataclass(frozen=True)
class WireModel:
    """One sub-conductor: ``z = parabola(w)`` and ``d = d0 + d1 * w`` in ``frame``."""

    frame: SpanFrame
    parabola: ParabolaModel
    offset_line: tuple[float, float]
    rmse: float
    support: int

    def offset(self, w):
        d0, d1 = self.offset_line
        return d0 + d1 * np.asarray(w, dtype=np.float64)


@dataclass(frozen=True)
class BundleGeometry:
    k: int
    centers: np.ndarray
    pairwise_distances: np.ndarray
    min_adjacent_spacing: Optional[float]

    def distance_matrix(self) -> np.ndarray:
        out = np.zeros((self.k, self.k))
        iu = np.triu_indices(self.k, 1)
        out[iu] = self.pairwise_distances
        return out + out.T


def fit_wire(w, d, z, frame: SpanFrame) -> WireModel:
    """Fit a wire model to frame coordinates of one sub-conductor."""
    w = np.asarray(w, dtype=np.float64)
    if len(w) < 3:
        raise InsufficientDataError(f"wire fit needs at least 3 points, got {len(w)}")
    parabola = fit_parabola(w, z)
    d0, d1 = fit_line(w, d)
    rz = np.asarray(z) - parabola(w)
    rd = np.asarray(d) - (d0 + d1 * w)
    rmse = float(np.sqrt(np.mean(rz * rz + rd * rd)))
    return WireModel(frame, parabola, (d0, d1), rmse, len(w))


def fit_subconductor(cloud: PointCloud, labels, cluster_id: int, frame: SpanFrame) -> WireModel:
    """Fit the points of ``cloud`` carrying ``cluster_id``.

    The vertical profile is a least-squares parabola in ``w``; the
    horizontal offset is a least-squares line, so slightly non-parallel
    sub-conductors are still captured. ``rmse`` combines both residuals.
    """
    labels = np.asarray(labels)
    if len(labels) != len(cloud):
        raise ContractError(f"{len(labels)} labels for {len(cloud)} points")
    mask = labels == cluster_id
    count = int(mask.sum())
    if count < 3:
        raise InsufficientDataError(f"cluster {cluster_id} has {count} points; need 3")
    proj = project(cloud.subset(mask), frame)
    return fit_wire(proj.w, proj.d, proj.z, frame)


def bundle_geometry(models: Sequence[WireModel], w_mid: float) -> BundleGeometry:
    """Cross-section centers at ``w_mid`` and their pairwise spacings.

    Centers are ``(d, z - mean z)`` at ``w_mid``. The adjacent spacing is the
    smallest nonzero center distance; it is ``None`` for a single wire.
    """
    if not models:
        raise ContractError("bundle geometry needs at least one wire model")
    frame = models[0].frame
    if any(m.frame != frame for m in models[1:]):
        raise ContractError("wire models do not share one span frame")
    d = np.array([float(m.offset(w_mid)) for m in models])
    z = np.array([float(m.parabola(w_mid)) for m in models])
    centers = np.column_stack([d, z - z.mean()])
    k = len(models)
    dists = np.array(
        [float(np.hypot(*(centers[i] - centers[j]))) for i, j in combinations(range(k), 2)]
    )
    nonzero = dists[dists > 0]
    spacing = float(nonzero.min()) if len(nonzero) else None
    return BundleGeometry(k, centers, dists, spacing)


def sample_wire(model: WireModel, w_start: float, w_end: float, step: float) -> np.ndarray:
    """Evaluate a wire every ``step`` along ``w``, endpoints included, as world ``(m, 3)`` points."""
    if not step > 0:
        raise ParameterError(f"step must be positive, got {step}")
    if not w_start < w_end:
        raise ParameterError(f"empty sampling range [{w_start}, {w_end}]")
    count = int(np.floor((w_end - w_start) / step * (1 + 1e-12)))
    w = w_start + step * np.arange(count + 1)
    w = w[w < w_end - 1e-9 * step]
    w = np.append(w, w_end)
    x, y = model.frame.to_world(w, model.offset(w))
    return np.column_stack([x, y, model.parabola(w)])
