import numpy as np
import pytest

from polyhitch.geometry import Polygon
from polyhitch.hitch import CableSpec, TailLengths

WIDE_TRIANGLE = [(0.0, -1.0), (-0.9, 0.4), (0.9, 0.4)]
TALL_TRIANGLE = [(0.0, -1.0), (-0.4, 0.5), (0.4, 0.5)]
UNIT_SQUARE = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]


def random_convex_polygon(rng, n):
    """Clockwise polygon inscribed in a random circle, with well separated vertices."""
    while True:
        gaps = rng.uniform(0.5, 1.5, n)
        theta = np.cumsum(gaps / gaps.sum() * 2 * np.pi)
        if np.max(gaps / gaps.sum() * 2 * np.pi) < np.pi * 0.9:
            break
    radius = rng.uniform(0.5, 1.5)
    center = rng.uniform(-1, 1, 2)
    pts = center + radius * np.column_stack([np.cos(-theta), np.sin(-theta)])
    return Polygon(pts)


def random_feasible(rng, n):
    """Random polygon, cable lengths and tails with every tail at least 5 cm."""
    poly = random_convex_polygon(rng, n)
    slack = rng.uniform(0.2, 1.0, n)
    cables = CableSpec(poly.edge_lengths() + slack)
    frac = rng.uniform(0.25, 0.75, n)
    d = slack * frac
    e = cables.lengths - poly.edge_lengths() - d
    return poly, cables, TailLengths(d, e)


@pytest.fixture
def wide_triangle():
    return Polygon(WIDE_TRIANGLE)


@pytest.fixture
def tall_triangle():
    return Polygon(TALL_TRIANGLE)


@pytest.fixture
def unit_square():
    return Polygon(UNIT_SQUARE)
