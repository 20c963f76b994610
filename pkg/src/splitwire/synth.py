"""Synthetic bundle-conductor clouds and brute-force reference implementations.

Random numbers come from the PCG64 bit generator seeded with ``spec.seed``.
Raw 64-bit outputs are turned into doubles in [0, 1) as ``(u >> 11) * 2**-53``
and normals are produced by the Box-Muller transform, so a cloud depends only
on the seed and these two fixed formulas, not on numpy's distribution code.
Draw order: ``N`` uniforms for span positions, ``2N`` for noise, ``N`` for
the point shuffle, with ``N = k * points_per_wire``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .dpc import ClusterResult, Decision, DpcParams
from .errors import ContractError, ParameterError, SizeError
from .pointcloud_io import NOISE_LABEL, PointCloud

LAYOUTS = ("square", "regular_polygon", "pair", "single")
BRUTEFORCE_MAX_POINTS = 2000


def default_layout(k: int) -> str:
    return {1: "single", 2: "pair", 4: "square"}.get(k, "regular_polygon")


@dataclass(frozen=True)
class BundleSpec:
    k: int = 4
    spacing: float = 0.45
    layout: str = "square"
    span_length: float = 10.0
    sag: float = 0.3
    points_per_wire: int = 1000
    noise_sigma: float = 0.005
    seed: int = 0
    azimuth: float = 0.5
    origin: tuple[float, float] = (0.0, 0.0)
    height: float = 20.0

    def __post_init__(self):
        if not 1 <= self.k <= 8:
            raise ParameterError(f"k must be in 1..8, got {self.k}")
        if self.layout not in LAYOUTS:
            raise ParameterError(f"unknown layout {self.layout!r}")
        need = {"square": 4, "pair": 2, "single": 1}.get(self.layout)
        if need is not None and self.k != need:
            raise ParameterError(f"layout {self.layout!r} requires k = {need}, got {self.k}")
        if self.layout == "regular_polygon" and self.k < 2:
            raise ParameterError("regular_polygon layout requires k >= 2")
        if not self.spacing > 0:
            raise ParameterError("spacing must be positive")
        if not self.span_length > 0:
            raise ParameterError("span_length must be positive")
        if self.points_per_wire < 3:
            raise ParameterError("points_per_wire must be at least 3")
        if not self.noise_sigma >= 0:
            raise ParameterError("noise_sigma must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")


def layout_offsets(spec: BundleSpec) -> np.ndarray:
    """Cross-section ``(d, r)`` of each wire relative to the bundle center.

    Polygons have a horizontal bottom edge and side ``spacing``; the square
    layout is the axis-aligned polygon with k = 4.
    """
    s = spec.spacing
    if spec.layout == "single":
        return np.zeros((1, 2))
    if spec.layout == "pair":
        return np.array([[-s / 2, 0.0], [s / 2, 0.0]])
    if spec.layout == "square":
        h = s / 2
        return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    k = spec.k
    radius = s / (2.0 * math.sin(math.pi / k))
    angles = -math.pi / 2 + math.pi / k + 2.0 * math.pi * np.arange(k) / k
    pts = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return pts - pts.mean(axis=0)


def uniforms(bitgen: np.random.PCG64, count: int) -> np.ndarray:
    raw = bitgen.random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def box_muller(u1: np.ndarray, u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * math.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


@dataclass(frozen=True)
class BundleSample:
    """Generated bundle in frame coordinates, before mapping to world space."""

    w: np.ndarray
    coords: np.ndarray
    labels: np.ndarray


def sample_bundle(spec: BundleSpec) -> BundleSample:
    """Draw the bundle in its own frame: span position ``w`` and cross-section ``(d, r)``."""
    n_wire = spec.points_per_wire
    total = spec.k * n_wire
    bitgen = np.random.PCG64(spec.seed)
    w = (uniforms(bitgen, total) - 0.5) * spec.span_length
    u = uniforms(bitgen, 2 * total)
    nd, nr = box_muller(u[0::2], u[1::2])
    keys = uniforms(bitgen, total)

    labels = np.repeat(np.arange(spec.k), n_wire)
    coords = layout_offsets(spec)[labels] + spec.noise_sigma * np.column_stack([nd, nr])
    perm = np.argsort(keys, kind="stable")
    return BundleSample(w[perm], coords[perm], labels[perm])


def sag_profile(spec: BundleSpec, w) -> np.ndarray:
    """Bundle-center height: ``height`` at the span ends, ``height - sag`` mid-span."""
    w = np.asarray(w, dtype=np.float64)
    return spec.height - spec.sag + 4.0 * spec.sag * (w / spec.span_length) ** 2


def generate(spec: BundleSpec) -> PointCloud:
    """Labeled world-space cloud of ``spec.k`` parallel sagging wires."""
    sample = sample_bundle(spec)
    d, r = sample.coords[:, 0], sample.coords[:, 1]
    ux, uy = math.cos(spec.azimuth), math.sin(spec.azimuth)
    x = spec.origin[0] + sample.w * ux - d * uy
    y = spec.origin[1] + sample.w * uy + d * ux
    z = sag_profile(spec, sample.w) + r
    return PointCloud(np.column_stack([x, y, z]), sample.labels)


def dpc_bruteforce(coords, params: DpcParams = DpcParams()) -> ClusterResult:
    """Reference density-peaks clustering with plain pairwise loops.

    Same definitions as :func:`splitwire.dpc.cluster` with no truncation or
    indexing; meant for cross-checking on small inputs.
    """
    pts = [(float(a), float(b)) for a, b in np.asarray(coords, dtype=np.float64).reshape(-1, 2)]
    n = len(pts)
    if n > BRUTEFORCE_MAX_POINTS:
        raise SizeError(f"brute force limited to {BRUTEFORCE_MAX_POINTS} points, got {n}")
    if n == 0:
        raise ContractError("no points")

    def dist(i, j):
        dx = pts[j][0] - pts[i][0]
        dy = pts[j][1] - pts[i][1]
        return math.sqrt(dx * dx + dy * dy)

    rho = []
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                u = dist(i, j) / params.d_c
                acc += math.exp(-(u * u))
        rho.append(acc)

    def denser(j, i):
        return rho[j] > rho[i] or (rho[j] == rho[i] and j < i)

    delta = [0.0] * n
    nearest = [-1] * n
    for i in range(n):
        best, arg = math.inf, -1
        for j in range(n):
            if j != i and denser(j, i):
                d = dist(i, j)
                if d < best:
                    best, arg = d, j
        if arg >= 0:
            delta[i], nearest[i] = best, arg
        else:
            delta[i] = max((dist(i, j) for j in range(n) if j != i), default=0.0)

    rmax, dmax = max(rho), max(delta)
    rho_norm = [r / rmax if rmax > 0 else 0.0 for r in rho]
    delta_norm = [d / dmax if dmax > 0 else 0.0 for d in delta]
    gamma = [a * b for a, b in zip(rho_norm, delta_norm)]

    ranked = sorted(range(n), key=lambda i: (-gamma[i], i))
    g = [gamma[i] for i in ranked] + [0.0]
    k = 1
    for m in range(1, min(params.max_clusters, n) + 1):
        if g[m - 1] > 0 and g[m - 1] >= params.gamma_gap_threshold * g[m]:
            k = m
    centers = ranked[:k]

    labels = [-2] * n
    for c, i in enumerate(centers):
        labels[i] = c
    for i in sorted(range(n), key=lambda i: (-rho[i], i)):
        if labels[i] < 0:
            labels[i] = labels[nearest[i]]
    if params.noise_density_fraction > 0:
        labels = [NOISE_LABEL if rn < params.noise_density_fraction else lab
                  for lab, rn in zip(labels, rho_norm)]

    decision = Decision(
        np.array(rho), np.array(delta), np.array(nearest, dtype=np.int64),
        np.array(rho_norm), np.array(delta_norm), np.array(gamma),
    )
    return ClusterResult(k, np.array(centers, dtype=np.int64), np.array(labels, dtype=np.int64), decision)


def label_accuracy(predicted, truth) -> float:
    """Fraction of points matched under the best one-to-one relabeling of ``predicted``.

    Noise (-1) predictions never match. Exhaustive over id mappings for up to
    8 clusters; larger problems fall back to the Hungarian algorithm.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise ContractError(f"label lengths differ: {len(predicted)} vs {len(truth)}")
    n = len(truth)
    if n == 0:
        return 1.0
    valid = predicted != NOISE_LABEL
    p_ids = np.unique(predicted[valid])
    t_ids = np.unique(truth)
    table = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    np.add.at(
        table,
        (np.searchsorted(p_ids, predicted[valid]), np.searchsorted(t_ids, truth[valid])),
        1,
    )
    if len(p_ids) == 0:
        return 0.0
    if max(table.shape) > 8:
        from scipy.optimize import linear_sum_assignment

        rows, cols = linear_sum_assignment(-table)
        return float(table[rows, cols].sum()) / n
    if len(p_ids) > len(t_ids):
        table = table.T
    rows = range(table.shape[0])
    best = max(
        sum(int(table[r, c]) for r, c in zip(rows, perm))
        for perm in permutations(range(table.shape[1]), table.shape[0])
    )
    return best / n
