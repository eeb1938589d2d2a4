"""Force balance at the cable crossings and the forward equilibrium problem.

The forward problem takes robot endpoints and cable lengths and finds the
crossing points and relative tensions. Every cable is a taut three-segment
path ``q_k -> p_k -> p_{k+1} -> r_k`` and each crossing is a frictionless
node shared by two cables.

Unknowns are the ``2n`` vertex coordinates plus tensions ``T_2..T_n``
(``T_1 = 1`` fixes the free tension scale). Residuals are the ``2n`` force
components and ``n`` length closures. The force residual at ``p_k`` is
``-grad_{p_k}`` of the tension-weighted total path length, so its Jacobian
is built from the Hessian of a sum of norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import EPS_GEOM, Polygon
from .hitch import HitchConfiguration, TensionState

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100
MAX_HALVINGS = 20


class DegenerateGeometryError(ValueError):
    pass


class PhysicallyInvalidError(RuntimeError):
    """Converged to a state with a non-positive tension (slack cable)."""

    def __init__(self, message: str, solution: "ForwardSolution"):
        super().__init__(message)
        self.solution = solution


def count_unknowns(n: int) -> tuple[int, int]:
    """``(equations, unknowns)`` of the force-balance system for ``n`` vertices."""
    if n < 3:
        raise ValueError("a hitch needs at least 3 vertices")
    return 2 * n, 3 * n


def _unit(v, what: str) -> np.ndarray:
    nv = np.linalg.norm(v)
    if nv <= EPS_GEOM:
        raise DegenerateGeometryError(f"zero-length segment: {what}")
    return v / nv


def vertex_residual(q_k, r_km1, p_k, p_km1, p_kp1, T_k: float, T_km1: float) -> np.ndarray:
    """Net force on the crossing ``p_k`` of cables ``k-1`` and ``k``.

    Tail directions are taken from the actual endpoint geometry.
    """
    p_k = np.asarray(p_k, dtype=float)
    qh = _unit(np.asarray(q_k, float) - p_k, "q_k - p_k")
    rh = _unit(np.asarray(r_km1, float) - p_k, "r_{k-1} - p_k")
    u_k = _unit(np.asarray(p_kp1, float) - p_k, "p_{k+1} - p_k")
    u_km1 = _unit(p_k - np.asarray(p_km1, float), "p_k - p_{k-1}")
    return T_k * qh + T_k * u_k + T_km1 * rh - T_km1 * u_km1


def configuration_residual(config: HitchConfiguration, tensions: TensionState) -> tuple[np.ndarray, float]:
    """Stacked ``2n`` vertex residuals and their Euclidean norm."""
    n = config.n
    p = config.polygon.vertices
    T = np.asarray(tensions.tensions, dtype=float)
    if len(T) != n:
        raise ValueError(f"expected {n} tensions")
    out = np.empty(2 * n)
    for i in range(n):
        out[2 * i : 2 * i + 2] = vertex_residual(
            config.q[i], config.r[i - 1], p[i], p[i - 1], p[(i + 1) % n], T[i], T[i - 1]
        )
    return out, float(np.linalg.norm(out))


@dataclass(frozen=True, eq=False)
class ForwardProblem:
    q: np.ndarray
    r: np.ndarray
    lengths: np.ndarray
    initial_guess: np.ndarray
    tolerance: float = DEFAULT_TOL
    max_iterations: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1, 2)
        r = np.array(self.r, dtype=float).reshape(-1, 2)
        L = np.array(self.lengths, dtype=float).reshape(-1)
        guess = self.initial_guess
        if isinstance(guess, Polygon):
            guess = guess.vertices
        guess = np.array(guess, dtype=float).reshape(-1, 2)
        n = len(q)
        if n < 3 or not (len(r) == len(L) == len(guess) == n):
            raise ValueError("endpoints, lengths and guess must all have n >= 3 entries")
        ends = np.vstack([q, r])
        gaps = np.linalg.norm(ends[:, None] - ends[None], axis=-1) + np.eye(2 * n)
        if np.any(gaps <= EPS_GEOM):
            raise DegenerateGeometryError("robot endpoints must be pairwise distinct")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "lengths", L)
        object.__setattr__(self, "initial_guess", guess)

    @classmethod
    def from_configuration(cls, config: HitchConfiguration, guess=None, **kw) -> "ForwardProblem":
        if guess is None:
            guess = config.polygon.vertices
        return cls(config.q, config.r, config.cables.lengths, guess, **kw)

    @property
    def n(self) -> int:
        return len(self.q)

    def guess_path_lengths(self) -> np.ndarray:
        """Length of each cable's three-segment path through the initial guess."""
        return _path_lengths(self.initial_guess, self.q, self.r)


@dataclass(frozen=True, eq=False)
class ForwardSolution:
    vertices: np.ndarray
    tensions: TensionState
    residual_norm: float
    iterations: int
    converged: bool
    closure: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _path_lengths(p, q, r) -> np.ndarray:
    pn = np.roll(p, -1, axis=0)
    return (
        np.linalg.norm(q - p, axis=1)
        + np.linalg.norm(pn - p, axis=1)
        + np.linalg.norm(r - pn, axis=1)
    )


def _unpack(x, n):
    p = x[: 2 * n].reshape(n, 2)
    T = np.concatenate([[1.0], x[2 * n :]])
    return p, T


def _segments(p, q, r):
    """Unit vectors and lengths of every tail and edge segment, shape ``(3, n, 2)`` and ``(3, n)``."""
    pn = np.roll(p, -1, axis=0)
    seg = np.stack([q - p, pn - p, r - pn])
    length = np.linalg.norm(seg, axis=-1)
    if np.any(length <= EPS_GEOM):
        kind, k = np.argwhere(length <= EPS_GEOM)[0]
        name = ("q_k - p_k", "p_{k+1} - p_k", "r_k - p_{k+1}")[kind]
        raise DegenerateGeometryError(f"zero-length segment {name} on cable {k + 1}")
    return seg / length[..., None], length


def residual(x: np.ndarray, problem: ForwardProblem) -> np.ndarray:
    """Stacked force (``2n``) and length-closure (``n``) residuals at state ``x``."""
    n = problem.n
    p, T = _unpack(x, n)
    unit, length = _segments(p, problem.q, problem.r)
    a, b, c = unit
    # cable k pulls p_k along its tail and edge, and p_{k+1} along its edge back and its far tail
    on_start = T[:, None] * (a + b)
    on_end = T[:, None] * (c - b)
    force = on_start + np.roll(on_end, 1, axis=0)
    return np.concatenate([force.reshape(-1), length.sum(axis=0) - problem.lengths])


def jacobian(x: np.ndarray, problem: ForwardProblem) -> np.ndarray:
    """Analytic Jacobian of :func:`residual`, shape ``(3n, 3n - 1)``."""
    n = problem.n
    p, T = _unpack(x, n)
    unit, length = _segments(p, problem.q, problem.r)
    # Hessian blocks of each segment norm: (I - u u^T) / |x|, weighted by tension
    M = (np.eye(2) - unit[..., :, None] * unit[..., None, :]) / length[..., None, None]
    M = M * T[None, :, None, None]
    Ma, Mb, Mc = M
    k = np.arange(n)
    j = (k + 1) % n
    H = np.zeros((n, n, 2, 2))
    np.add.at(H, (k, k), Ma + Mb)
    np.add.at(H, (j, j), Mb + Mc)
    np.add.at(H, (k, j), -Mb)
    np.add.at(H, (j, k), -Mb)
    H = H.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)

    # rows: gradient of cable length k w.r.t. vertices
    a, b, c = unit
    G = np.zeros((n, n, 2))
    np.add.at(G, (k, k), -(a + b))
    np.add.at(G, (k, j), b - c)
    G = G.reshape(n, 2 * n)

    J = np.zeros((3 * n, 3 * n - 1))
    J[: 2 * n, : 2 * n] = -H
    J[: 2 * n, 2 * n :] = -G[1:].T
    J[2 * n :, : 2 * n] = G
    return J


def _gauss_newton(x, problem, max_iterations, stop_on_slack):
    """Damped Gauss-Newton from ``x``; returns ``(x, fnorm, iterations)``."""
    n = problem.n
    try:
        F = residual(x, problem)
    except DegenerateGeometryError:
        return x, np.inf, 0
    fnorm = float(np.linalg.norm(F))
    it = 0
    while fnorm > problem.tolerance and it < max_iterations:
        it += 1
        try:
            step = np.linalg.lstsq(jacobian(x, problem), -F, rcond=None)[0]
        except (np.linalg.LinAlgError, DegenerateGeometryError):
            break
        alpha = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            x_try = x + alpha * step
            try:
                F_try = residual(x_try, problem)
            except DegenerateGeometryError:
                alpha *= 0.5
                continue
            f_try = float(np.linalg.norm(F_try))
            if f_try < fnorm:
                x, F, fnorm = x_try, F_try, f_try
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        if stop_on_slack and np.any(x[2 * n :] <= 0):
            break
    return x, fnorm, it


def _smoothed_path_sum(p, q, r, eps):
    """Total path length with every segment norm smoothed to ``sqrt(|s|^2 + eps^2)``.

    Returns ``(value, gradient (2n,), Hessian (2n, 2n))``. The smoothing
    removes the kinks where a crossing meets a robot, so the Hessian stays
    bounded and positive definite.
    """
    n = len(p)
    pn = np.roll(p, -1, axis=0)
    seg = np.stack([q - p, pn - p, r - pn])
    rho = np.sqrt(np.einsum("snc,snc->sn", seg, seg) + eps * eps)
    g = seg / rho[..., None]
    M = (np.eye(2) - g[..., :, None] * g[..., None, :]) / rho[..., None, None]
    Ma, Mb, Mc = M
    ga, gb, gc = g
    k = np.arange(n)
    j = (k + 1) % n
    grad = np.zeros((n, 2))
    np.add.at(grad, k, -(ga + gb))
    np.add.at(grad, j, gb - gc)
    H = np.zeros((n, n, 2, 2))
    np.add.at(H, (k, k), Ma + Mb)
    np.add.at(H, (j, j), Mb + Mc)
    np.add.at(H, (k, j), -Mb)
    np.add.at(H, (j, k), -Mb)
    return float(rho.sum()), grad.reshape(-1), H.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _path_sum_minimizer(problem: ForwardProblem, p0: np.ndarray, max_iterations: int = 50) -> np.ndarray:
    """Vertices minimising the total path length of all cables (unit weights).

    The exact objective is a strictly convex sum of norms whose minimiser is
    the taut polygon whenever the tensions are uniform. Newton stalls at its
    kinks, so smoothed versions are minimised instead; Gauss-Newton removes
    the small smoothing bias afterwards.
    """
    q, r = problem.q, problem.r
    scale = float(np.max(problem.lengths))
    x = np.array(p0, dtype=float)
    # a coarse smoothing first crosses the kink valleys quickly, the fine one sharpens
    for eps in (1e-2 * scale, 1e-4 * scale):
        f, grad, H = _smoothed_path_sum(x, q, r, eps)
        for _ in range(max_iterations):
            step = -np.linalg.solve(H, grad).reshape(-1, 2)
            slope = float(grad @ step.reshape(-1))
            if -slope <= 1e-20:
                break
            alpha = 1.0
            for _ in range(MAX_HALVINGS + 1):
                x_try = x + alpha * step
                f_try, g_try, H_try = _smoothed_path_sum(x_try, q, r, eps)
                if f_try <= f + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
            else:
                break
            x, f, grad, H = x_try, f_try, g_try, H_try
    return x


def solve_forward(problem: ForwardProblem) -> ForwardSolution:
    """Damped Gauss-Newton solve of the forward equilibrium.

    The first attempt starts from ``problem.initial_guess`` with unit
    tensions. If it stalls or drives a tension non-positive, the solve
    restarts from the minimiser of the unweighted total path length, which
    is unique and close to the taut state for any near-uniform tension.

    Returns a solution with ``converged=False`` (best iterate) when the
    residual does not reach ``problem.tolerance``.

    Raises
    ------
    PhysicallyInvalidError
        If the iteration converges with a non-positive tension.
    """
    n = problem.n
    start = np.concatenate([problem.initial_guess.reshape(-1), np.ones(n - 1)])
    x, fnorm, it = _gauss_newton(start, problem, problem.max_iterations, stop_on_slack=True)
    if fnorm > problem.tolerance or np.any(x[2 * n :] <= 0):
        p0 = _path_sum_minimizer(problem, problem.initial_guess)
        retry = np.concatenate([p0.reshape(-1), np.ones(n - 1)])
        x2, f2, it2 = _gauss_newton(retry, problem, max(problem.max_iterations - it, 1), stop_on_slack=False)
        it += it2
        if f2 < fnorm or np.any(x[2 * n :] <= 0):
            x, fnorm = x2, f2
    if not np.isfinite(fnorm):
        return ForwardSolution(problem.initial_guess.copy(), TensionState(np.ones(n)), np.inf, it, False)

    p, T = _unpack(x, n)
    closure = _path_lengths(p, problem.q, problem.r) - problem.lengths
    converged = fnorm <= problem.tolerance
    sol = ForwardSolution(p.copy(), TensionState(T), fnorm, it, converged, closure)
    if converged and not np.all(T > 0):
        raise PhysicallyInvalidError(
            f"converged with non-positive tension(s) {T[T <= 0]}", sol
        )
    return sol
