"""End-to-end extraction: centerline, clustering, per-wire fits, report."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .centerline import Centerline, compute_centerline
from .dpc import ClusterResult, Decision, DpcParams, assign, decide, select_centers
from .errors import DegenerateGeometryError, InsufficientDataError, ParameterError
from .pointcloud_io import NOISE_LABEL, PointCloud
from .wire_fit import BundleGeometry, WireModel, bundle_geometry, fit_subconductor

log = logging.getLogger(__name__)

DEFAULT_SEGMENT_LENGTH = 10.0
# spans up to this fraction over the window length are kept whole
SEGMENT_SLACK = 0.01


@dataclass(frozen=True)
class Segment:
    """The processed window of the input and its centerline."""

    mask: np.ndarray
    cloud: PointCloud
    centerline: Centerline
    windowed: bool

    @property
    def w_range(self) -> tuple[float, float]:
        w = self.centerline.projection.w
        return float(w.min()), float(w.max())


@dataclass(frozen=True)
class WireFit:
    label: int
    model: Optional[WireModel]
    error: Optional[str] = None


@dataclass(frozen=True)
class Extraction:
    segment: Segment
    clusters: ClusterResult
    labels: np.ndarray
    wires: list[WireFit]
    geometry: Optional[BundleGeometry]


def select_segment(cloud: PointCloud, segment_length: float = DEFAULT_SEGMENT_LENGTH) -> Segment:
    """Centerline of the cloud, restricted to the central ``segment_length`` window in ``w``."""
    if len(cloud) == 0:
        raise InsufficientDataError("input has 0 points")
    if not segment_length > 0:
        raise ParameterError(f"segment_length must be positive, got {segment_length}")
    line = compute_centerline(cloud)
    w = line.projection.w
    lo, hi = float(w.min()), float(w.max())
    mask = np.ones(len(cloud), dtype=bool)
    if hi - lo <= segment_length * (1.0 + SEGMENT_SLACK):
        return Segment(mask, cloud, line, False)
    mid = 0.5 * (lo + hi)
    mask = np.abs(w - mid) <= 0.5 * segment_length
    log.warning(
        "span covers %.3f m in w; processing the central %.3f m window (%d of %d points)",
        hi - lo, segment_length, int(mask.sum()), len(cloud),
    )
    sub = cloud.subset(mask)
    return Segment(mask, sub, compute_centerline(sub), True)


def decision_graph(cloud: PointCloud, d_c: float, segment_length: float = DEFAULT_SEGMENT_LENGTH) -> Decision:
    """Normalized decision graph of the cloud's relative coordinates.

    A single point has no span frame; its relative coordinate is taken as
    the origin, giving an all-zero decision row.
    """
    if len(cloud) == 1:
        return decide(np.zeros((1, 2)), d_c)
    return decide(select_segment(cloud, segment_length).centerline.coords, d_c)


def extract(cloud: PointCloud, params: DpcParams = DpcParams(),
            segment_length: float = DEFAULT_SEGMENT_LENGTH) -> Extraction:
    segment = select_segment(cloud, segment_length)
    decision = decide(segment.centerline.coords, params.d_c)
    _, centers = select_centers(decision, params)
    clusters = assign(decision, centers, params)

    wires = []
    for label in range(clusters.k):
        try:
            model = fit_subconductor(segment.cloud, clusters.labels, label, segment.centerline.frame)
            wires.append(WireFit(label, model))
        except (InsufficientDataError, DegenerateGeometryError) as exc:
            log.warning("cluster %d not fitted: %s", label, exc)
            wires.append(WireFit(label, None, str(exc)))

    models = [wf.model for wf in wires if wf.model is not None]
    if not models:
        raise InsufficientDataError("no cluster had enough points for a wire fit")
    lo, hi = segment.w_range
    geometry = bundle_geometry(models, 0.5 * (lo + hi))

    labels = np.full(len(cloud), NOISE_LABEL, dtype=np.int64)
    labels[segment.mask] = clusters.labels
    return Extraction(segment, clusters, labels, wires, geometry)


def _r9(value):
    return float(f"{float(value):.9g}")


def report(result: Extraction, params: dict) -> dict:
    """JSON-ready summary; floats rounded to 9 significant digits."""
    seg = result.segment
    frame = seg.centerline.frame
    lo, hi = seg.w_range
    geo = result.geometry
    fitted = [wf.label for wf in result.wires if wf.model is not None]
    clusters = []
    for wf in result.wires:
        entry = {
            "label": wf.label,
            "center_index": int(np.flatnonzero(seg.mask)[result.clusters.centers[wf.label]]),
            "support": int(np.sum(result.clusters.labels == wf.label)),
        }
        if wf.model is None:
            entry.update({"error": wf.error, "parabola": None, "offset_line": None, "rmse": None})
        else:
            m = wf.model
            entry.update({
                "parabola": {k: _r9(v) for k, v in m.parabola.as_dict().items()},
                "offset_line": {"d0": _r9(m.offset_line[0]), "d1": _r9(m.offset_line[1])},
                "rmse": _r9(m.rmse),
            })
        clusters.append(entry)
    return {
        "params": params,
        "span_frame": {
            "origin": [_r9(v) for v in frame.origin],
            "direction": [_r9(v) for v in frame.direction],
        },
        "centerline": {
            **{k: _r9(v) for k, v in seg.centerline.parabola.as_dict().items()},
            "n_input": len(seg.mask),
            "n_processed": len(seg.cloud),
            "w_min": _r9(lo),
            "w_max": _r9(hi),
            "windowed": seg.windowed,
        },
        "clusters": clusters,
        "bundle_geometry": {
            "k": result.clusters.k,
            "fitted_labels": fitted,
            "w_mid": _r9(0.5 * (lo + hi)),
            "centers": [[_r9(a), _r9(b)] for a, b in geo.centers.tolist()],
            "pairwise_distances": [_r9(v) for v in geo.pairwise_distances.tolist()],
            "min_adjacent_spacing": None if geo.min_adjacent_spacing is None
            else _r9(geo.min_adjacent_spacing),
        },
    }
