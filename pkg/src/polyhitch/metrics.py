"""Vertex estimation from cable markers and tracking-error statistics.

Each edge is approximated by a total-least-squares line through the markers
placed on it, and vertex ``k`` is estimated where the lines of edges ``k-1``
and ``k`` meet (or come closest, for skew lines).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# one marker at the centre of each third of the edge span
DEFAULT_MARKER_FRACTIONS = (1 / 6, 1 / 2, 5 / 6)
PARALLEL_SIN = 1e-6


class DegenerateFitError(ValueError):
    pass


class NoIntersectionError(ValueError):
    def __init__(self, message: str, angle: float):
        super().__init__(message)
        self.angle = angle


class EmptySeriesError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Line:
    point: np.ndarray
    direction: np.ndarray

    def at(self, s) -> np.ndarray:
        return self.point + np.multiply.outer(s, self.direction)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    for c in v:
        if abs(c) > 1e-12:
            return v if c > 0 else -v
    return v


def fit_line(points) -> Line:
    """Total-least-squares line: centroid plus principal axis of the centred points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2 or not np.all(np.isfinite(pts)):
        raise DegenerateFitError("need at least two finite points")
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    if np.max(np.linalg.norm(centred, axis=1)) <= 1e-12:
        raise DegenerateFitError("all points coincide")
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    return Line(centroid, _canonical_sign(vt[0]))


def line_intersection(a: Line, b: Line) -> tuple[np.ndarray, float]:
    """Midpoint of the shortest segment between two lines, and its length."""
    da, db = a.direction, b.direction
    sin = float(np.linalg.norm(np.cross(da, db)))
    if sin <= PARALLEL_SIN:
        angle = float(np.arcsin(min(sin, 1.0)))
        raise NoIntersectionError(f"lines are near parallel (angle {angle:.3g} rad)", angle)
    w = a.point - b.point
    # minimise |a.point + s*da - b.point - t*db|
    A = np.array([[da @ da, -(da @ db)], [da @ db, -(db @ db)]])
    rhs = -np.array([w @ da, w @ db])
    s, t = np.linalg.solve(A, rhs)
    pa = a.point + s * da
    pb = b.point + t * db
    return (pa + pb) / 2, float(np.linalg.norm(pa - pb))


def marker_samples(vertices3d, fractions=DEFAULT_MARKER_FRACTIONS, noise_std: float = 0.0, rng=None) -> np.ndarray:
    """Markers along each edge of a closed 3-D polygon, shape ``(n, m, 3)``.

    Row ``k-1`` holds the markers on edge ``k`` (from vertex ``k`` to ``k+1``).
    Noise is isotropic Gaussian and needs an explicit ``numpy.random.Generator``.
    """
    p = np.asarray(vertices3d, dtype=float)
    f = np.asarray(fractions, dtype=float)
    nxt = np.roll(p, -1, axis=0)
    pts = p[:, None, :] + f[None, :, None] * (nxt - p)[:, None, :]
    if noise_std > 0:
        if rng is None:
            raise ValueError("a seeded rng is required when noise_std > 0")
        pts = pts + rng.normal(0.0, noise_std, size=pts.shape)
    return pts


def estimate_vertices(edge_points) -> tuple[np.ndarray, np.ndarray]:
    """Vertices from per-edge marker sets: returns ``(points (n, 3), gaps (n,))``."""
    lines = [fit_line(pts) for pts in edge_points]
    n = len(lines)
    out = np.empty((n, 3))
    gaps = np.empty(n)
    for k in range(n):
        out[k], gaps[k] = line_intersection(lines[k - 1], lines[k])
    return out, gaps


@dataclass(eq=False)
class ErrorSeries:
    times: np.ndarray
    errors: np.ndarray  # (m, n)
    skipped: int = 0

    @property
    def n(self) -> int:
        return self.errors.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"err_p{k}" for k in range(1, self.n + 1)])
            for t, row in zip(self.times, self.errors):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "ErrorSeries":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
        return cls(data[:, 0].copy(), data[:, 1:].copy())


def vertex_error_series(
    trace,
    desired=None,
    via_markers: bool = False,
    noise_std: float = 0.0,
    rng=None,
    fractions=DEFAULT_MARKER_FRACTIONS,
) -> ErrorSeries:
    """Per-vertex distance between estimated and desired crossings over time.

    ``desired`` is either ``None`` (use the intended polygon recorded in the
    trace) or a pair ``(times, vertices)`` with ``vertices`` of shape
    ``(m, n, 2)`` that is linearly interpolated to the sample times. With
    ``via_markers`` the estimate goes through marker fits on the solved
    cable edges instead of taking the solver's crossings directly. Samples
    without an estimate or a desired value are skipped and counted.
    """
    plane = trace.plane
    times, errs = [], []
    skipped = 0
    for s in trace.samples:
        if s.vertices is None:
            skipped += 1
            continue
        if desired is None:
            want = s.desired
        else:
            dt, dv = desired
            dv = np.asarray(dv, float)
            want = np.empty(dv.shape[1:])
            for i in range(want.shape[0]):
                for c in range(2):
                    want[i, c] = np.interp(s.t, dt, dv[:, i, c])
        if want is None:
            skipped += 1
            continue
        est3 = plane.embed(s.vertices)
        if via_markers:
            est3, _ = estimate_vertices(marker_samples(est3, fractions, noise_std, rng))
        errs.append(np.linalg.norm(est3 - plane.embed(want), axis=1))
        times.append(s.t)
    n = trace.n
    return ErrorSeries(np.array(times), np.array(errs).reshape(-1, n), skipped)


@dataclass(frozen=True)
class VertexStats:
    vertex: int
    mean: float
    std: float
    count: int


def summary_stats(series: ErrorSeries) -> list[VertexStats]:
    """Mean and population standard deviation of each vertex's error."""
    if series.errors.size == 0:
        raise EmptySeriesError("error series is empty")
    mean = series.errors.mean(axis=0)
    std = series.errors.std(axis=0)
    m = len(series.errors)
    return [VertexStats(k + 1, float(mean[k]), float(std[k]), m) for k in range(series.n)]


def stats_to_csv(stats: list[VertexStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "mean", "std", "count"])
        for s in stats:
            w.writerow([s.vertex, repr(s.mean), repr(s.std), s.count])
