"""Hitch configurations of the uniform-tension class.

Cable ``k`` runs ``q_k -> p_k -> p_{k+1} -> r_k``. Its tail at ``q_k`` follows
the previous edge direction ``u_{k-1}`` and its tail at ``r_k`` points along
``-u_{k+1}``, which keeps every vertex in force balance when all cables carry
the same tension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Polygon, cyclic_index

EPS_LEN = 1e-9
DEFAULT_MARGIN = 0.02


class InfeasibleCableError(ValueError):
    """A cable cannot realize the requested geometry.

    Attributes
    ----------
    cable : int
        1-based cable index.
    amount : float
        Deficit or violation size in meters, when meaningful.
    """

    def __init__(self, message: str, cable: int, amount: float = float("nan")):
        super().__init__(message)
        self.cable = cable
        self.amount = amount


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CableSpec:
    lengths: np.ndarray

    def __post_init__(self):
        lengths = _frozen(self.lengths).reshape(-1)
        for k, L in enumerate(lengths, start=1):
            if not L > 0:
                raise InfeasibleCableError(f"cable {k}: length must be positive, got {L}", k, L)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, n: int, length: float) -> "CableSpec":
        return cls(np.full(n, float(length)))

    def __len__(self) -> int:
        return len(self.lengths)


@dataclass(frozen=True, eq=False)
class TailLengths:
    """Free cable lengths: ``d[k-1]`` from ``p_k`` to ``q_k``, ``e[k-1]`` from ``p_{k+1}`` to ``r_k``."""

    d: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        d = _frozen(self.d).reshape(-1)
        e = _frozen(self.e).reshape(-1)
        if d.shape != e.shape:
            raise ValueError("d and e must have the same length")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "e", e)

    def __len__(self) -> int:
        return len(self.d)

    def replace(self, k: int, d: float | None = None, e: float | None = None) -> "TailLengths":
        dd, ee = self.d.copy(), self.e.copy()
        i = cyclic_index(k, len(dd)) - 1
        if d is not None:
            dd[i] = d
        if e is not None:
            ee[i] = e
        return TailLengths(dd, ee)


@dataclass(frozen=True, eq=False)
class TensionState:
    tensions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tensions", _frozen(self.tensions).reshape(-1))

    @classmethod
    def uniform(cls, n: int, value: float = 1.0) -> "TensionState":
        return cls(np.full(n, float(value)))

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.tensions > 0))


@dataclass(frozen=True, eq=False)
class HitchConfiguration:
    """Polygon, cable lengths and the ``2n`` robot endpoints ``q_k``, ``r_k``."""

    polygon: Polygon
    cables: CableSpec
    q: np.ndarray
    r: np.ndarray
    tails: TailLengths | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q).reshape(-1, 2))
        object.__setattr__(self, "r", _frozen(self.r).reshape(-1, 2))
        n = self.polygon.n
        if len(self.cables) != n or len(self.q) != n or len(self.r) != n:
            raise ValueError("polygon, cables and endpoints must all have n entries")
        if self.tails is None:
            object.__setattr__(self, "tails", _measure_tails(self.polygon, self.q, self.r))

    @property
    def n(self) -> int:
        return self.polygon.n

    def robot_positions(self) -> dict:
        """Endpoints keyed by robot id (``"q1"``, ``"r1"``, ...)."""
        out = {}
        for k in range(1, self.n + 1):
            out[f"q{k}"] = self.q[k - 1]
            out[f"r{k}"] = self.r[k - 1]
        return out

    def budget_errors(self) -> np.ndarray:
        """``d_k + l_k + e_k - L_k`` for each cable, with tails measured from geometry."""
        t = _measure_tails(self.polygon, self.q, self.r)
        return t.d + self.polygon.edge_lengths() + t.e - self.cables.lengths

    def alignment_errors(self) -> np.ndarray:
        """Angles (rad) between each tail and its ideal direction, shape ``(n, 2)``."""
        u = self.polygon.edge_directions()
        p = self.polygon.vertices
        out = np.zeros((self.n, 2))
        for i in range(self.n):
            vq = self.q[i] - p[i]
            vr = self.r[i] - p[(i + 1) % self.n]
            out[i, 0] = _angle(vq, u[i - 1])
            out[i, 1] = _angle(vr, -u[(i + 1) % self.n])
        return out


def _angle(a, b) -> float:
    if not np.any(a):
        return 0.0
    c = float(a[0] * b[1] - a[1] * b[0])
    return abs(float(np.arctan2(c, float(a @ b))))


def _measure_tails(poly: Polygon, q, r) -> TailLengths:
    p = poly.vertices
    d = np.linalg.norm(q - p, axis=1)
    e = np.linalg.norm(r - np.roll(p, -1, axis=0), axis=1)
    return TailLengths(d, e)


def tail_directions(poly: Polygon, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions of cable ``k``'s tails: ``(u_{k-1}, -u_{k+1})``."""
    return poly.edge_direction(k - 1), -poly.edge_direction(k + 1)


def robot_positions(poly: Polygon, cables: CableSpec, tails: TailLengths) -> HitchConfiguration:
    """Place the robots for given tail lengths.

    Raises
    ------
    InfeasibleCableError
        If a tail is not strictly positive or ``d_k + l_k + e_k`` does not
        match ``L_k`` within ``EPS_LEN``.
    """
    n = poly.n
    if len(cables) != n or len(tails) != n:
        raise ValueError(f"expected {n} cables and tails")
    l = poly.edge_lengths()
    L = cables.lengths
    for i in range(n):
        if not tails.d[i] > 0:
            raise InfeasibleCableError(f"cable {i + 1}: tail d must be positive, got {tails.d[i]}", i + 1, tails.d[i])
        if not tails.e[i] > 0:
            raise InfeasibleCableError(f"cable {i + 1}: tail e must be positive, got {tails.e[i]}", i + 1, tails.e[i])
        gap = tails.d[i] + l[i] + tails.e[i] - L[i]
        if abs(gap) > EPS_LEN:
            raise InfeasibleCableError(f"cable {i + 1}: budget off by {gap:.3e} m", i + 1, gap)

    u = poly.edge_directions()
    p = poly.vertices
    q = p + tails.d[:, None] * np.roll(u, 1, axis=0)
    r = np.roll(p, -1, axis=0) - tails.e[:, None] * np.roll(u, -1, axis=0)
    return HitchConfiguration(poly, cables, q, r, tails)


def balanced_tails(poly: Polygon, cables: CableSpec) -> TailLengths:
    slack = cables.lengths - poly.edge_lengths()
    for i, s in enumerate(slack):
        if not s > 0:
            raise InfeasibleCableError(
                f"cable {i + 1} is {-s:.6g} m too short for edge {i + 1}", i + 1, -s
            )
    half = slack / 2
    return TailLengths(half, half.copy())


def balanced_configuration(poly: Polygon, cables: CableSpec) -> HitchConfiguration:
    """Configuration with equal tails ``d_k = e_k = (L_k - l_k) / 2``."""
    return robot_positions(poly, cables, balanced_tails(poly, cables))


def tails_of(config: HitchConfiguration) -> TailLengths:
    return _measure_tails(config.polygon, config.q, config.r)


@dataclass(frozen=True)
class CableCheck:
    cable: int
    edge_shorter_than_cable: bool
    d_ok: bool
    e_ok: bool
    budget_ok: bool
    budget_error: float

    @property
    def ok(self) -> bool:
        return self.edge_shorter_than_cable and self.d_ok and self.e_ok and self.budget_ok


@dataclass(frozen=True)
class FeasibilityReport:
    cables: tuple

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cables)

    def failing(self) -> list[int]:
        return [c.cable for c in self.cables if not c.ok]


def feasibility_report(
    poly: Polygon,
    cables: CableSpec,
    tails: TailLengths,
    margin_min: float = DEFAULT_MARGIN,
    eps_len: float = EPS_LEN,
) -> FeasibilityReport:
    l = poly.edge_lengths()
    checks = []
    for i in range(poly.n):
        err = float(tails.d[i] + l[i] + tails.e[i] - cables.lengths[i])
        checks.append(
            CableCheck(
                cable=i + 1,
                edge_shorter_than_cable=bool(l[i] < cables.lengths[i]),
                d_ok=bool(tails.d[i] >= margin_min),
                e_ok=bool(tails.e[i] >= margin_min),
                budget_ok=abs(err) <= eps_len,
                budget_error=err,
            )
        )
    return FeasibilityReport(tuple(checks))
