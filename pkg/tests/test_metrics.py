import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyhitch.actions import ClearanceWarning, hold_plan
from polyhitch.geometry import WorkPlane
from polyhitch.hitch import CableSpec, balanced_configuration
from polyhitch.metrics import (
    DegenerateFitError,
    EmptySeriesError,
    ErrorSeries,
    Line,
    NoIntersectionError,
    estimate_vertices,
    fit_line,
    line_intersection,
    marker_samples,
    stats_to_csv,
    summary_stats,
    vertex_error_series,
)
from polyhitch.simulator import simulate

PLANE = WorkPlane.horizontal(0.5)


def _angle(u, v):
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))


def test_fit_collinear():
    pts = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [5, 5, 5]], float)
    line = fit_line(pts)
    np.testing.assert_allclose(line.direction, np.ones(3) / np.sqrt(3), atol=1e-12)
    np.testing.assert_allclose(line.point, [2, 2, 2], atol=1e-12)


def test_fit_symmetric_perpendicular_offsets():
    # residuals perpendicular to x cancel, so the fit is the x axis
    pts = np.array([[0, 1, 0], [0, -1, 0], [4, 1, 0], [4, -1, 0]], float)
    line = fit_line(pts)
    np.testing.assert_allclose(line.direction, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(line.point, [2, 0, 0], atol=1e-12)


def test_fit_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_line([[1, 2, 3]])
    with pytest.raises(DegenerateFitError):
        fit_line([[1, 2, 3], [1, 2, 3]])
    with pytest.raises(DegenerateFitError):
        fit_line([[0, 0, 0], [np.nan, 0, 0]])


def test_fit_noise_monte_carlo():
    rng = np.random.default_rng(7)
    d = np.array([1.0, 2.0, 0.5])
    d /= np.linalg.norm(d)
    s = np.linspace(-0.5, 0.5, 100)
    good = 0
    for _ in range(1000):
        pts = np.outer(s, d) + rng.normal(0, 0.005, (100, 3))
        good += _angle(fit_line(pts).direction, d) < 1.0
    assert good >= 990


def test_intersection_axes():
    p, gap = line_intersection(Line(np.zeros(3), np.array([1.0, 0, 0])), Line(np.zeros(3), np.array([0, 1.0, 0])))
    np.testing.assert_allclose(p, 0, atol=1e-15)
    assert gap == pytest.approx(0, abs=1e-15)


def test_intersection_skew():
    a = Line(np.array([0, 0, 0.0]), np.array([1.0, 0, 0]))
    b = Line(np.array([0, 0, 1.0]), np.array([0, 1.0, 0]))
    p, gap = line_intersection(a, b)
    np.testing.assert_allclose(p, [0, 0, 0.5], atol=1e-15)
    assert gap == pytest.approx(1.0)


def test_intersection_parallel():
    a = Line(np.zeros(3), np.array([1.0, 0, 0]))
    b = Line(np.array([0, 1.0, 0]), np.array([1.0, 0, 0]))
    with pytest.raises(NoIntersectionError) as info:
        line_intersection(a, b)
    assert info.value.angle == pytest.approx(0.0, abs=1e-12)


unit3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array).filter(lambda v: np.linalg.norm(v) > 0.1)
pt3 = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


@settings(max_examples=200, deadline=None)
@given(pt3, unit3, pt3, unit3)
def test_intersection_symmetric(pa, da, pb, db):
    a = Line(pa, da / np.linalg.norm(da))
    b = Line(pb, db / np.linalg.norm(db))
    if np.linalg.norm(np.cross(a.direction, b.direction)) < 1e-3:
        return
    x1, g1 = line_intersection(a, b)
    x2, g2 = line_intersection(b, a)
    np.testing.assert_allclose(x1, x2, atol=1e-9)
    assert g1 == pytest.approx(g2, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(pt3, st.floats(0, 2 * np.pi), pt3)
def test_intersection_rigid_equivariance(shift, theta, pa):
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    a = Line(pa, np.array([1.0, 0, 0]))
    b = Line(pa + [0.0, 0.0, 0.3], np.array([0.6, 0.8, 0]))
    x, gap = line_intersection(a, b)
    a2 = Line(R @ a.point + shift, R @ a.direction)
    b2 = Line(R @ b.point + shift, R @ b.direction)
    y, gap2 = line_intersection(a2, b2)
    np.testing.assert_allclose(y, R @ x + shift, atol=1e-9)
    assert gap2 == pytest.approx(gap, abs=1e-9)


def test_marker_layout(wide_triangle):
    v3 = PLANE.embed(wide_triangle.vertices)
    m = marker_samples(v3)
    assert m.shape == (3, 3, 3)
    np.testing.assert_allclose(m[0, 1], (v3[0] + v3[1]) / 2)
    with pytest.raises(ValueError):
        marker_samples(v3, noise_std=0.01)


def test_estimate_noise_free(wide_triangle):
    v3 = PLANE.embed(wide_triangle.vertices)
    est, gaps = estimate_vertices(marker_samples(v3))
    np.testing.assert_allclose(est, v3, atol=1e-12)
    np.testing.assert_allclose(gaps, 0, atol=1e-12)


def test_stats_constant_series():
    s = ErrorSeries(np.arange(5.0), np.full((5, 2), 0.05))
    st_ = summary_stats(s)
    assert [x.mean for x in st_] == pytest.approx([0.05, 0.05])
    assert [x.std for x in st_] == pytest.approx([0, 0], abs=1e-15)
    assert st_[0].count == 5


def test_stats_population_std():
    s = ErrorSeries(np.arange(2.0), np.array([[0.0], [0.2]]))
    (v,) = summary_stats(s)
    assert v.mean == pytest.approx(0.1)
    assert v.std == pytest.approx(0.1)


def test_stats_clipped_normal():
    rng = np.random.default_rng(3)
    mu, sigma = 0.08, 0.05
    x = np.maximum(rng.normal(mu, sigma, 10_000), 0.0)
    (v,) = summary_stats(ErrorSeries(np.arange(len(x), dtype=float), x[:, None]))
    z = mu / sigma
    Phi = 0.5 * (1 + math.erf(z / math.sqrt(2)))
    phi = math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    assert v.mean == pytest.approx(mu * Phi + sigma * phi, abs=0.005)


def test_stats_empty():
    with pytest.raises(EmptySeriesError):
        summary_stats(ErrorSeries(np.array([]), np.zeros((0, 3))))


def test_series_csv_roundtrip(tmp_path):
    s = ErrorSeries(np.array([0.0, 0.1, 0.2]), np.array([[1e-17, 0.5, 1 / 3]] * 3))
    s.to_csv(tmp_path / "e.csv")
    back = ErrorSeries.from_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.errors, s.errors)
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t,err_p1,err_p2,err_p3"
    stats_to_csv(summary_stats(s), tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "vertex,mean,std,count"


@pytest.fixture
def static_trace(tall_triangle):
    cfg = balanced_configuration(tall_triangle, CableSpec.uniform(3, 2.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClearanceWarning)
        return simulate(hold_plan(cfg, 1.0, PLANE))


def test_static_trace_errors(static_trace):
    for via in (False, True):
        s = vertex_error_series(static_trace, via_markers=via)
        assert s.errors.shape == (len(static_trace.samples), 3)
        assert s.errors.max() < 1e-9


def test_constant_offset_is_flat(static_trace, tall_triangle):
    want = tall_triangle.vertices + [0.05, 0.0]
    s = vertex_error_series(static_trace, desired=(np.array([0.0, 1.0]), np.stack([want, want])))
    np.testing.assert_allclose(s.errors, 0.05, atol=1e-9)


def test_noisy_markers_need_rng(static_trace):
    with pytest.raises(ValueError):
        vertex_error_series(static_trace, via_markers=True, noise_std=0.005)
