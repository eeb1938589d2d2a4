"""Planar polygon primitives and the work plane that embeds them in 3-D.

Indices in the public API are 1-based: edge ``k`` runs from vertex ``k`` to
vertex ``k + 1`` and wraps around cyclically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_GEOM = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or invalid geometric input."""


def cyclic_index(k: int, n: int) -> int:
    """Map any integer ``k`` onto the 1-based range ``[1, n]``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return (k - 1) % n + 1


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_polygon`.

    ``problems`` holds ``(kind, index)`` tuples, where kind is one of
    ``"size"``, ``"duplicate"``, ``"collinear"`` or ``"orientation"``.
    """

    problems: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(f"{kind} at vertex {k}" for kind, k in self.problems)


def validate_polygon(vertices) -> ValidationReport:
    """Check that ``vertices`` form a strictly convex, clockwise polygon."""
    pts = np.asarray(vertices, dtype=float)
    problems = []
    if pts.ndim != 2 or pts.shape[1] != 2:
        return ValidationReport((("shape", 0),))
    n = len(pts)
    if n < 3:
        return ValidationReport((("size", n),))
    if not np.all(np.isfinite(pts)):
        return ValidationReport((("non-finite", 0),))

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(pts[i] - pts[j]) <= EPS_GEOM:
                problems.append(("duplicate", j + 1))
    if problems:
        return ValidationReport(tuple(problems))

    # Turn at vertex k+1 between edge k and edge k+1.
    for i in range(n):
        a = pts[(i + 1) % n] - pts[i]
        b = pts[(i + 2) % n] - pts[(i + 1) % n]
        c = _cross2(a, b)
        at = (i + 1) % n + 1
        if abs(c) <= EPS_GEOM:
            problems.append(("collinear", at))
        elif c > 0:
            problems.append(("orientation", at))
    return ValidationReport(tuple(problems))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Strictly convex polygon with vertices in clockwise order.

    Constructing a ``Polygon`` validates it; invalid input raises
    :class:`GeometryError`.
    """

    vertices: np.ndarray

    def __post_init__(self):
        pts = np.array(self.vertices, dtype=float)
        report = validate_polygon(pts)
        if not report.ok:
            raise GeometryError(f"invalid polygon: {report.describe()}")
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return self.vertices.shape == other.vertices.shape and bool(
            np.all(self.vertices == other.vertices)
        )

    def vertex(self, k: int) -> np.ndarray:
        return self.vertices[cyclic_index(k, self.n) - 1]

    def edge_vector(self, k: int) -> np.ndarray:
        return self.vertex(k + 1) - self.vertex(k)

    def edge_length(self, k: int) -> float:
        return float(np.linalg.norm(self.edge_vector(k)))

    def edge_direction(self, k: int) -> np.ndarray:
        v = self.edge_vector(k)
        return v / np.linalg.norm(v)

    def edge_lengths(self) -> np.ndarray:
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return np.linalg.norm(d, axis=1)

    def edge_directions(self) -> np.ndarray:
        """All unit edge directions as an ``(n, 2)`` array (row ``k-1`` is edge ``k``)."""
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def with_vertex(self, k: int, point) -> "Polygon":
        pts = self.vertices.copy()
        pts[cyclic_index(k, self.n) - 1] = point
        return Polygon(pts)


def edge_direction(poly: Polygon, k: int) -> np.ndarray:
    return poly.edge_direction(k)


def edge_length(poly: Polygon, k: int) -> float:
    return poly.edge_length(k)


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> Polygon:
    """Regular ``n``-gon in clockwise order."""
    theta = phase - 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center, float)
    return Polygon(pts)


@dataclass(frozen=True, eq=False)
class WorkPlane:
    """Plane ``origin + x1*b1 + x2*b2`` in the world frame."""

    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    basis: np.ndarray = field(default_factory=lambda: np.eye(3)[:2].copy())

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(3)
        basis = np.array(self.basis, dtype=float).reshape(2, 3)
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(2), rtol=0.0, atol=1e-12):
            raise GeometryError("work plane basis must be orthonormal")
        origin.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def horizontal(cls, z: float = 0.0) -> "WorkPlane":
        return cls(origin=np.array([0.0, 0.0, z]))

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.basis[0], self.basis[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorkPlane):
            return NotImplemented
        return bool(np.all(self.origin == other.origin) and np.all(self.basis == other.basis))

    def embed(self, points) -> np.ndarray:
        """Map 2-D plane coordinates (shape ``(..., 2)``) to 3-D world points."""
        x = np.asarray(points, dtype=float)
        return self.origin + x @ self.basis

    def project(self, points) -> np.ndarray:
        """Orthogonal projection of 3-D points onto plane coordinates."""
        x = np.asarray(points, dtype=float)
        return (x - self.origin) @ self.basis.T


def embed(point, plane: WorkPlane) -> np.ndarray:
    return plane.embed(point)


def project(point, plane: WorkPlane) -> np.ndarray:
    return plane.project(point)
