import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitwire.centerline import (
    ParabolaModel,
    Projection,
    SpanFrame,
    compute_centerline,
    fit_line,
    fit_parabola,
    fit_span_frame,
    project,
    relative_coords,
)
from splitwire.errors import DegenerateGeometryError, InsufficientDataError
from splitwire.pointcloud_io import PointCloud
from splitwire.synth import BundleSpec, generate, layout_offsets


def cloud_xy(xy, z=0.0):
    xy = np.asarray(xy, dtype=float)
    return PointCloud(np.column_stack([xy, np.full(len(xy), z)]))


def principal_direction_closed_form(xy):
    """Major axis of a 2x2 scatter via the double-angle formula."""
    c = xy - xy.mean(axis=0)
    sxx = float(c[:, 0] @ c[:, 0])
    syy = float(c[:, 1] @ c[:, 1])
    sxy = float(c[:, 0] @ c[:, 1])
    theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
    return np.array([math.cos(theta), math.sin(theta)])


def cramer_parabola(w, z):
    """Raw (unscaled) normal equations solved by Cramer's rule."""
    s = [float(np.sum(w**p)) for p in range(5)]
    t = [float(np.sum(z * w**p)) for p in range(3)]
    m = np.array([[s[4], s[3], s[2]], [s[3], s[2], s[1]], [s[2], s[1], s[0]]])
    rhs = np.array([t[2], t[1], t[0]])
    det = np.linalg.det(m)
    out = []
    for col in range(3):
        mc = m.copy()
        mc[:, col] = rhs
        out.append(np.linalg.det(mc) / det)
    return np.array(out)


# -- span frame ---------------------------------------------------------------

def test_frame_collinear_along_x():
    frame = fit_span_frame(cloud_xy([(0, 0), (1, 0), (2, 0)]))
    assert frame.origin == pytest.approx((1.0, 0.0), abs=1e-15)
    assert frame.direction == pytest.approx((1.0, 0.0), abs=1e-15)


def test_frame_radial_span_matches_radial_distance():
    pts = [(3, 4), (6, 8)]
    frame = fit_span_frame(cloud_xy(pts))
    assert frame.direction == pytest.approx((0.6, 0.8), abs=1e-12)
    proj = project(cloud_xy(pts), frame)
    radial = [math.hypot(x, y) for x, y in pts]
    assert proj.w[1] - proj.w[0] == pytest.approx(radial[1] - radial[0], abs=1e-12)
    assert proj.w[1] - proj.w[0] == pytest.approx(5.0, abs=1e-12)


def test_frame_matches_closed_form_eigenvector(rng):
    xy = rng.normal(size=(200, 2)) * [3.0, 0.7] @ np.array([[0.8, 0.6], [-0.6, 0.8]]) + [12.0, -4.0]
    frame = fit_span_frame(cloud_xy(xy))
    expected = principal_direction_closed_form(xy)
    assert abs(abs(np.dot(frame.direction, expected)) - 1.0) < 1e-12
    assert np.allclose(np.abs(frame.direction), np.abs(expected), atol=1e-9)
    assert np.allclose(frame.origin, xy.mean(axis=0), atol=1e-12)


def test_frame_direction_unit_norm_and_sign(rng):
    xy = rng.normal(size=(100, 2)) * [5.0, 0.2]
    frame = fit_span_frame(cloud_xy(xy))
    assert math.hypot(*frame.direction) == pytest.approx(1.0, abs=1e-12)
    w = project(cloud_xy(xy), frame).w
    assert w[np.argmax(np.abs(w))] > 0


@pytest.mark.parametrize("pts", [[(1, 1)], [(2, 3), (2, 3), (2, 3)]])
def test_frame_degenerate(pts):
    with pytest.raises(DegenerateGeometryError):
        fit_span_frame(cloud_xy(pts))


# -- projection -----------------------------------------------------------

def test_project_axis_aligned():
    frame = SpanFrame((0.0, 0.0), (1.0, 0.0))
    proj = project(PointCloud([[5.0, 0.0, 7.0], [5.0, 0.45, 7.0]]), frame)
    assert proj.w.tolist() == [5.0, 5.0]
    assert proj.d.tolist() == [0.0, 0.45]
    assert proj.z.tolist() == [7.0, 7.0]


def test_frame_round_trip(rng):
    xy = rng.uniform(-50, 50, size=(40, 2))
    frame = SpanFrame((3.0, -2.0), (0.28, 0.96))
    proj = project(cloud_xy(xy), frame)
    x, y = frame.to_world(proj.w, proj.d)
    assert np.allclose(np.column_stack([x, y]), xy, atol=1e-12, rtol=0)


def test_rigid_motion_equivariance(rng):
    n = 300
    w = rng.uniform(-5, 5, n)
    xyz = np.column_stack([w, rng.normal(0, 0.2, n), 20 + 0.01 * w**2 + rng.normal(0, 0.01, n)])
    a = 1.1
    rot = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    moved = xyz @ rot.T + [500.0, -300.0, 0.0]
    out = []
    for pts in (xyz, moved):
        cloud = PointCloud(pts)
        proj = project(cloud, fit_span_frame(cloud))
        out.append(np.column_stack([proj.w - proj.w.mean(), proj.d, proj.z]))
    assert np.allclose(out[0], out[1], atol=1e-9, rtol=0)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(finite, finite), min_size=2, max_size=10),
    st.floats(0, 2 * math.pi),
    st.tuples(finite, finite),
)
def test_projection_isometry(xy, angle, origin):
    frame = SpanFrame(origin, (math.cos(angle), math.sin(angle)))
    xy = np.array(xy)
    proj = project(cloud_xy(xy), frame)
    for i in range(len(xy)):
        for j in range(len(xy)):
            horiz = math.hypot(*(xy[i] - xy[j]))
            via = math.hypot(proj.w[i] - proj.w[j], proj.d[i] - proj.d[j])
            assert via == pytest.approx(horiz, abs=1e-12 * max(1.0, horiz) * 1e3)


# -- parabola ----------------------------------------------------------------

def test_parabola_exact_interpolation():
    w = np.array([-1.0, 0.0, 1.0, 2.0])
    m = fit_parabola(w, w**2)
    assert (m.A, m.B, m.C) == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)


def test_parabola_constant():
    m = fit_parabola([0.0, 1.0, 2.0, 5.0], [2.0] * 4)
    assert (m.A, m.B, m.C) == pytest.approx((0.0, 0.0, 2.0), abs=1e-12)


def test_parabola_matches_cramer_oracle(rng):
    w = rng.uniform(-5, 5, 500)
    z = 0.012 * w**2 - 0.03 * w + 19.7 + rng.normal(0, 0.005, 500)
    m = fit_parabola(w, z)
    assert np.allclose([m.A, m.B, m.C], cramer_parabola(w, z), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("w", [[0.0, 1.0], [0.0, 1.0, 1.0, 0.0]])
def test_parabola_insufficient(w):
    with pytest.raises(InsufficientDataError):
        fit_parabola(w, np.zeros(len(w)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 500.0), st.floats(-1e4, 1e4))
def test_parabola_normal_equation_orthogonality(seed, span, shift):
    rng = np.random.default_rng(seed)
    w = shift + rng.uniform(-span / 2, span / 2, 200)
    z = 0.001 * (w - shift) ** 2 + 30 + rng.normal(0, 0.05, 200)
    m = fit_parabola(w, z)
    r = z - m(w)
    wmax = np.abs(w).max()
    # residual scale times float error growth; the invariant's 1e-6 bounds are for unit-scale data
    scale = max(1.0, np.abs(z).max())
    assert abs(r.sum()) <= 1e-6 * scale
    assert abs((r * w).sum()) <= 1e-6 * wmax * scale
    assert abs((r * w * w).sum()) <= 1e-6 * wmax**2 * scale


def test_fit_line():
    w = np.array([0.0, 1.0, 2.0, 3.0])
    assert fit_line(w, 0.5 + 0.25 * w) == pytest.approx((0.5, 0.25), abs=1e-14)


# -- relative coordinates ------------------------------------------------------

def test_relative_identity_and_offset():
    model = ParabolaModel(0.01, 0.0, 10.0)
    proj = Projection(np.array([2.0, 2.0]), np.array([0.0, 0.0]), np.array([10.04, 10.49]))
    rel = relative_coords(proj, model)
    assert rel[0] == pytest.approx([0.0, 0.0], abs=1e-12)
    assert rel[1] == pytest.approx([0.0, 0.45], abs=1e-12)


def test_relative_coords_square_bundle(square_bundle):
    spec, cloud = square_bundle
    line = compute_centerline(cloud)
    sigma = spec.noise_sigma
    # the fitted frame may be mirrored, which maps the square onto itself
    vertices = layout_offsets(spec)
    for label in range(4):
        pts = line.coords[cloud.labels == label]
        mean = pts.mean(axis=0)
        vertex = vertices[np.argmin(np.hypot(*(vertices - mean).T))]
        assert np.hypot(*(mean - vertex)) < 3 * sigma
        assert np.mean(np.hypot(*(pts - vertex).T) < 3 * sigma) > 0.95


def test_relative_coords_mean_residual_zero(square_bundle):
    _, cloud = square_bundle
    assert abs(compute_centerline(cloud).coords[:, 1].mean()) < 1e-6


@pytest.mark.parametrize("shift", [(0.0, 0.0, 0.0), (1234.5, -987.25, 55.0), (-3e4, 2e4, -100.0)])
def test_relative_coords_translation_equivariant(square_bundle, shift):
    _, cloud = square_bundle
    base = compute_centerline(cloud).coords
    moved = compute_centerline(PointCloud(cloud.xyz + np.array(shift))).coords
    assert np.allclose(base, moved, atol=1e-9, rtol=0)


def test_noiseless_points_on_centerline_have_zero_relative_coords():
    spec = BundleSpec(k=1, layout="single", noise_sigma=0.0, points_per_wire=50, seed=3)
    coords = compute_centerline(generate(spec)).coords
    assert np.allclose(coords, 0.0, atol=1e-9)


def test_relative_coords_at_map_coordinates(square_bundle):
    _, cloud = square_bundle
    base = compute_centerline(cloud).coords
    shift = np.array([512345.0, 4212345.0, 250.0])
    moved = PointCloud(cloud.xyz + shift)
    rounding = np.max(np.abs((moved.xyz - shift) - cloud.xyz))
    # nothing beyond the rounding already present in the translated input
    assert np.max(np.abs(compute_centerline(moved).coords - base)) <= 3 * rounding
