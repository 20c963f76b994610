"""Density-peaks clustering with automatic cluster-count selection.

Works on 2D relative coordinates. Local density uses the Gaussian kernel
``exp(-(d/d_c)**2)``; separation ``delta`` is the distance to the nearest
point of higher density, where density ties are broken by lower index. The
two are max-normalized and multiplied into ``gamma``; the number of clusters
is the largest rank ``m`` at which sorted ``gamma`` drops by at least
``gamma_gap_threshold``.

Two computation paths are available. ``"exact"`` evaluates every pair.
``"grid"`` uses a :class:`~splitwire.grid.SpatialGrid` with cell size
``3 * d_c`` and drops kernel terms beyond that radius (each under
``exp(-9)``), and finds nearest denser points from k-d tree candidate
lists. ``"auto"`` picks exact up to ``EXACT_MAX_POINTS`` points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, NamedTuple, Optional

import numpy as np

from .errors import ContractError, InsufficientDataError, ParameterError
from .grid import SpatialGrid
from .pointcloud_io import NOISE_LABEL, fmt

EXACT_MAX_POINTS = 2048
RADIUS_FACTOR = 3.0

_ROW_CHUNK = 256
_FIRST_NEIGHBORS = 16
# cap on candidate-matrix entries per k-d tree query batch
_QUERY_BUDGET = 1 << 22


@dataclass(frozen=True)
class DpcParams:
    d_c: float = 0.05
    max_clusters: int = 8
    gamma_gap_threshold: float = 3.0
    noise_density_fraction: float = 0.0

    def __post_init__(self):
        if not self.d_c > 0:
            raise ParameterError(f"d_c must be positive, got {self.d_c}")
        if int(self.max_clusters) != self.max_clusters or self.max_clusters < 1:
            raise ParameterError(f"max_clusters must be a positive integer, got {self.max_clusters}")
        if not self.gamma_gap_threshold > 1:
            raise ParameterError(
                f"gamma_gap_threshold must exceed 1, got {self.gamma_gap_threshold}"
            )
        if not 0 <= self.noise_density_fraction < 1:
            raise ParameterError(
                f"noise_density_fraction must lie in [0, 1), got {self.noise_density_fraction}"
            )


class DecisionPoint(NamedTuple):
    rho: float
    delta: float
    rho_norm: float
    delta_norm: float
    gamma: float
    nearest_higher: Optional[int]


@dataclass(frozen=True)
class Decision:
    """Decision-graph quantities as parallel arrays.

    ``nearest_higher`` holds -1 for the density peak.
    """

    rho: np.ndarray
    delta: np.ndarray
    nearest_higher: np.ndarray
    rho_norm: np.ndarray
    delta_norm: np.ndarray
    gamma: np.ndarray

    def __len__(self) -> int:
        return len(self.rho)

    def __getitem__(self, i: int) -> DecisionPoint:
        nh = int(self.nearest_higher[i])
        return DecisionPoint(
            float(self.rho[i]),
            float(self.delta[i]),
            float(self.rho_norm[i]),
            float(self.delta_norm[i]),
            float(self.gamma[i]),
            None if nh < 0 else nh,
        )

    @property
    def peak(self) -> int:
        return int(np.flatnonzero(self.nearest_higher < 0)[0])


@dataclass(frozen=True)
class ClusterResult:
    k: int
    centers: np.ndarray
    labels: np.ndarray
    decision: Decision


def _as_coords(coords) -> np.ndarray:
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ContractError(f"expected (n, 2) coordinates, got shape {pts.shape}")
    return pts


def _choose(method: str, n: int) -> str:
    if method == "auto":
        return "exact" if n <= EXACT_MAX_POINTS else "grid"
    if method not in ("exact", "grid"):
        raise ParameterError(f"unknown method {method!r}")
    return method


def _row_distances(pts: np.ndarray, rows: slice) -> np.ndarray:
    dx = pts[rows, 0, None] - pts[None, :, 0]
    dy = pts[rows, 1, None] - pts[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def density_rank(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order points by descending density, lower index first on ties.

    Returns ``(order, rank)`` with ``rank[order] == arange(n)``; point ``j``
    is denser than ``i`` exactly when ``rank[j] < rank[i]``.
    """
    n = len(rho)
    order = np.lexsort((np.arange(n), -np.asarray(rho)))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    return order, rank


def local_density(coords, d_c: float, method: str = "auto") -> np.ndarray:
    """Gaussian-kernel local density of every point.

    On the exact path each point's kernel terms are sorted before summation,
    so the result does not depend on input order.
    """
    if not d_c > 0:
        raise ParameterError(f"d_c must be positive, got {d_c}")
    pts = _as_coords(coords)
    n = len(pts)
    rho = np.zeros(n)
    if n <= 1:
        return rho
    if _choose(method, n) == "exact":
        for lo in range(0, n, _ROW_CHUNK):
            hi = min(lo + _ROW_CHUNK, n)
            terms = np.exp(-((_row_distances(pts, slice(lo, hi)) / d_c) ** 2))
            terms[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
            terms.sort(axis=1)
            rho[lo:hi] = terms.sum(axis=1)
        return rho
    radius = RADIUS_FACTOR * d_c
    return SpatialGrid(pts, radius).gaussian_density(d_c, radius)


def separation_delta(coords, rho, method: str = "auto"):
    """Distance to the nearest denser point and that point's index.

    Returns ``(delta, nearest_higher)``. Distance ties go to the lower index.
    The density peak gets the largest distance to any other point and
    ``nearest_higher == -1``; a single point gets ``delta == 0``.
    """
    pts = _as_coords(coords)
    rho = np.asarray(rho, dtype=np.float64)
    n = len(pts)
    if len(rho) != n:
        raise ContractError(f"{len(rho)} densities for {n} points")
    delta = np.zeros(n)
    nearest = np.full(n, -1, dtype=np.int64)
    if n <= 1:
        return delta, nearest
    order, rank = density_rank(rho)
    top = order[0]

    if _choose(method, n) == "exact":
        pending = np.arange(n)
    else:
        pending = _tree_delta(pts, rank, top, delta, nearest)
    pending = pending[pending != top]
    for lo in range(0, len(pending), _ROW_CHUNK):
        rows = pending[lo:lo + _ROW_CHUNK]
        dist = _row_distances(pts, rows)
        dist[rank[None, :] >= rank[rows, None]] = np.inf
        j = np.argmin(dist, axis=1)
        nearest[rows] = j
        delta[rows] = dist[np.arange(len(rows)), j]

    delta[top] = _row_distances(pts, slice(top, top + 1)).max()
    return delta, nearest


def _tree_delta(pts, rank, top, delta, nearest):
    """Fill delta/nearest from growing k-nearest-neighbor candidate lists.

    Candidates come from a k-d tree; distances are recomputed with the same
    formula as the exhaustive path, so results match it exactly. A point is
    resolved once its nearest denser candidate is strictly closer than its
    k-th neighbor, since every point outside the list is at least that far.
    Returns the indices still needing an exhaustive search.
    """
    from scipy.spatial import cKDTree

    n = len(pts)
    tree = cKDTree(pts)
    pending = np.flatnonzero(np.arange(n) != top)
    k = _FIRST_NEIGHBORS
    while len(pending) >= _ROW_CHUNK and k < n:
        still = []
        step = max(1, _QUERY_BUDGET // k)
        for lo in range(0, len(pending), step):
            rows = pending[lo:lo + step]
            _, idx = tree.query(pts[rows], k=k)
            dx = pts[idx, 0] - pts[rows, 0, None]
            dy = pts[idx, 1] - pts[rows, 1, None]
            dist = np.sqrt(dx * dx + dy * dy)
            cand = np.where(rank[idx] < rank[rows, None], dist, np.inf)
            best = cand.min(axis=1)
            winner = np.where(cand == best[:, None], idx, n).min(axis=1)
            # margin covers last-bit differences between the tree's metric and ours
            ok = best < dist.max(axis=1) * (1.0 - 1e-9)
            delta[rows[ok]] = best[ok]
            nearest[rows[ok]] = winner[ok]
            still.append(rows[~ok])
        pending = np.concatenate(still)
        k *= 8
    return pending


def normalize_decision(rho, delta, nearest_higher) -> Decision:
    """Max-normalize rho and delta; gamma is their product."""
    rho = np.asarray(rho, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)

    def norm(v):
        top = v.max() if len(v) else 0.0
        return v / top if top > 0 else np.zeros_like(v)

    rho_norm = norm(rho)
    delta_norm = norm(delta)
    return Decision(
        rho, delta, np.asarray(nearest_higher, dtype=np.int64),
        rho_norm, delta_norm, rho_norm * delta_norm,
    )


def gamma_order(decision: Decision) -> np.ndarray:
    n = len(decision)
    return np.lexsort((np.arange(n), -decision.gamma))


def select_centers(decision: Decision, params: DpcParams) -> tuple[int, np.ndarray]:
    """Pick the cluster count from the largest gap in sorted gamma.

    ``k`` is the largest ``m <= max_clusters`` with ``g[m] > 0`` and
    ``g[m] >= threshold * g[m+1]`` (1-based, ``g[n+1] = 0``); 1 when no rank
    qualifies. Centers are the top-``k`` gamma points.
    """
    n = len(decision)
    if n == 0:
        return 0, np.zeros(0, dtype=np.int64)
    order = gamma_order(decision)
    g = np.append(decision.gamma[order], 0.0)
    k = 1
    for m in range(min(params.max_clusters, n), 0, -1):
        if g[m - 1] > 0 and g[m - 1] >= params.gamma_gap_threshold * g[m]:
            k = m
            break
    return k, order[:k].copy()


def assign(decision: Decision, centers, params: DpcParams) -> ClusterResult:
    """Label centers 0..k-1, then propagate labels down the nearest-higher links."""
    n = len(decision)
    centers = np.asarray(centers, dtype=np.int64).reshape(-1)
    if len(centers) == 0:
        raise ContractError("no cluster centers")
    if centers.min() < 0 or centers.max() >= n:
        raise ContractError(f"center index out of range for {n} points")
    if len(np.unique(centers)) != len(centers):
        raise ContractError("duplicate cluster centers")
    peak = decision.peak
    if peak not in set(centers.tolist()):
        raise ContractError(f"centers must include the density peak (point {peak})")

    labels = np.full(n, -2, dtype=np.int64)
    labels[centers] = np.arange(len(centers))
    order, _ = density_rank(decision.rho)
    lab = labels.tolist()
    nh = decision.nearest_higher.tolist()
    for i in order.tolist():
        if lab[i] < 0:
            lab[i] = lab[nh[i]]
    labels = np.array(lab, dtype=np.int64)
    if params.noise_density_fraction > 0:
        labels[decision.rho_norm < params.noise_density_fraction] = NOISE_LABEL
    return ClusterResult(len(centers), centers, labels, decision)


def decide(coords, d_c: float, method: str = "auto") -> Decision:
    """Density, separation and normalization, without center selection."""
    pts = _as_coords(coords)
    rho = local_density(pts, d_c, method)
    delta, nearest = separation_delta(pts, rho, method)
    return normalize_decision(rho, delta, nearest)


def cluster(coords, params: DpcParams = DpcParams(), method: str = "auto") -> ClusterResult:
    """Run the whole clustering: decision graph, automatic k, assignment."""
    pts = _as_coords(coords)
    if len(pts) == 0:
        raise InsufficientDataError("cannot cluster 0 points")
    decision = decide(pts, params.d_c, method)
    _, centers = select_centers(decision, params)
    return assign(decision, centers, params)


def decision_diagram_csv(decision: Decision, sink: IO[str]) -> None:
    sink.write("index,rho,delta,rho_norm,delta_norm,gamma\n")
    cols = zip(
        decision.rho.tolist(), decision.delta.tolist(), decision.rho_norm.tolist(),
        decision.delta_norm.tolist(), decision.gamma.tolist(),
    )
    for i, (rho, delta, rn, dn, g) in enumerate(cols):
        sink.write(f"{i},{fmt(rho)},{fmt(delta)},{fmt(rn)},{fmt(dn)},{fmt(g)}\n")
