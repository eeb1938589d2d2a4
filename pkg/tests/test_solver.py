import numpy as np
import pytest

from polyhitch.geometry import Polygon
from polyhitch.hitch import (
    CableSpec,
    HitchConfiguration,
    TailLengths,
    TensionState,
    balanced_configuration,
    robot_positions,
)
from polyhitch.solver import (
    DegenerateGeometryError,
    ForwardProblem,
    PhysicallyInvalidError,
    configuration_residual,
    count_unknowns,
    jacobian,
    _smoothed_path_sum,
    residual,
    solve_forward,
    vertex_residual,
)

from conftest import random_feasible


@pytest.fixture
def balanced(wide_triangle):
    return balanced_configuration(wide_triangle, CableSpec.uniform(3, 2.0))


def _vertex_args(cfg, k):
    p = cfg.polygon
    return cfg.q[k - 1], cfg.r[k - 2], p.vertex(k), p.vertex(k - 1), p.vertex(k + 1)


def test_vertex_residual_zero_on_balanced(balanced):
    for k in (1, 2, 3):
        res = vertex_residual(*_vertex_args(balanced, k), 1.0, 1.0)
        assert np.linalg.norm(res) < 1e-12


def test_vertex_residual_unbalanced_tensions(balanced):
    poly = balanced.polygon
    for k in (1, 2, 3):
        res = vertex_residual(*_vertex_args(balanced, k), 1.0, 2.0)
        # substituting q^ = u_{k-1}, r^ = -u_k into the balance with T_k=1, T_{k-1}=2
        u_prev, u_k = poly.edge_direction(k - 1), poly.edge_direction(k)
        expected = u_prev + u_k + 2.0 * (-u_k) - 2.0 * u_prev
        np.testing.assert_allclose(res, expected, atol=1e-14)
        assert np.linalg.norm(res) == pytest.approx(np.linalg.norm(-u_k - u_prev), abs=1e-14)


def test_vertex_residual_degenerate(balanced):
    q, r, p, pm, pp = _vertex_args(balanced, 1)
    with pytest.raises(DegenerateGeometryError):
        vertex_residual(p, r, p, pm, pp, 1.0, 1.0)


@pytest.mark.parametrize("T", [1e-3, 1.0, 7.5, 1e4])
def test_configuration_residual_uniform_any_scale(balanced, T):
    _, norm = configuration_residual(balanced, TensionState.uniform(3, T))
    assert norm < 1e-12 * max(1.0, T)


def test_configuration_residual_perturbed(balanced):
    q = balanced.q.copy()
    qh = balanced.polygon.edge_direction(0)
    q[0] += 0.01 * np.array([-qh[1], qh[0]])
    cfg = HitchConfiguration(balanced.polygon, balanced.cables, q, balanced.r)
    stack, norm = configuration_residual(cfg, TensionState.uniform(3))
    assert stack.shape == (6,)
    oracle = vertex_residual(q[0], cfg.r[2], *[cfg.polygon.vertex(k) for k in (1, 0, 2)], 1.0, 1.0)
    np.testing.assert_allclose(stack[:2], oracle, atol=1e-15)
    assert norm > 1e-3


@pytest.mark.parametrize("n, expected", [(3, (6, 9)), (4, (8, 12)), (8, (16, 24))])
def test_count_unknowns(n, expected):
    assert count_unknowns(n) == expected


def test_solve_from_exact_guess(balanced, wide_triangle):
    sol = solve_forward(ForwardProblem.from_configuration(balanced))
    assert sol.converged
    np.testing.assert_allclose(sol.vertices, wide_triangle.vertices, atol=1e-9)
    np.testing.assert_allclose(sol.tensions.tensions, 1.0, atol=1e-9)


def test_solve_from_perturbed_guess(balanced, wide_triangle):
    rng = np.random.default_rng(7)
    guess = wide_triangle.vertices + rng.uniform(-1, 1, (3, 2)) * 0.1 / np.sqrt(2)
    sol = solve_forward(ForwardProblem.from_configuration(balanced, guess=guess))
    assert sol.converged
    np.testing.assert_allclose(sol.vertices, wide_triangle.vertices, atol=1e-6)
    assert np.all(np.abs(sol.closure) <= 1e-10)


def test_stretched_endpoints_do_not_converge(balanced):
    # pull every robot 20 cm outward along its tail: no taut three-segment path reaches
    poly = balanced.polygon
    q = balanced.q + 0.2 * np.roll(poly.edge_directions(), 1, axis=0)
    r = balanced.r - 0.2 * np.roll(poly.edge_directions(), -1, axis=0)
    problem = ForwardProblem(q, r, balanced.cables.lengths, poly.vertices)
    try:
        sol = solve_forward(problem)
    except PhysicallyInvalidError:
        return
    assert not sol.converged
    assert sol.residual_norm > problem.tolerance


@pytest.mark.parametrize("seed", range(10))
def test_jacobian_matches_central_differences(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(3, 9))
    poly, cables, tails = random_feasible(rng, n)
    cfg = robot_positions(poly, cables, tails)
    problem = ForwardProblem.from_configuration(cfg)
    x = np.concatenate([(poly.vertices + rng.uniform(-0.03, 0.03, (n, 2))).ravel(), rng.uniform(0.5, 2.0, n - 1)])
    J = jacobian(x, problem)
    h = 1e-6
    J_fd = np.column_stack([
        (residual(x + h * e, problem) - residual(x - h * e, problem)) / (2 * h) for e in np.eye(len(x))
    ])
    rel = np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd)
    assert rel < 1e-5


@pytest.mark.parametrize("seed", range(30))
def test_construction_solve_consistency(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 6
    poly, cables, tails = random_feasible(rng, n)
    cfg = robot_positions(poly, cables, tails)
    guess = poly.vertices + rng.uniform(-0.05, 0.05, (n, 2))
    sol = solve_forward(ForwardProblem.from_configuration(cfg, guess=guess))
    assert sol.converged
    np.testing.assert_allclose(sol.vertices, poly.vertices, atol=1e-6)


def test_rigid_motion_invariance(wide_triangle):
    rng = np.random.default_rng(3)
    cables = CableSpec.uniform(3, 2.0)
    cfg = balanced_configuration(wide_triangle, cables)
    guess = wide_triangle.vertices + rng.uniform(-0.05, 0.05, (3, 2))
    base = solve_forward(ForwardProblem.from_configuration(cfg, guess=guess))

    a = 0.7
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    t = np.array([0.3, -1.2])
    moved = solve_forward(ForwardProblem(cfg.q @ R.T + t, cfg.r @ R.T + t, cables.lengths, guess @ R.T + t))
    np.testing.assert_allclose(moved.vertices, base.vertices @ R.T + t, atol=1e-9)
    np.testing.assert_allclose(moved.tensions.tensions, base.tensions.tensions, atol=1e-9)


def test_problem_rejects_coincident_endpoints(balanced):
    q = balanced.q.copy()
    q[1] = balanced.r[0]
    with pytest.raises(DegenerateGeometryError):
        ForwardProblem(q, balanced.r, balanced.cables.lengths, balanced.polygon.vertices)


def test_guess_path_lengths(balanced):
    problem = ForwardProblem.from_configuration(balanced)
    np.testing.assert_allclose(problem.guess_path_lengths(), 2.0, atol=1e-12)


def test_recovers_when_guess_crosses_short_tails():
    # p_1's guess lands beside the nearby robot r_3; plain Gauss-Newton stalls there
    poly = Polygon([(-0.4991712, -0.66564048), (-0.29820185, 1.51563397), (1.60650532, 0.360279)])
    d = [0.32318411, 0.2114633, 0.14168479]
    e = [0.39897135, 0.1018799, 0.10500335]
    cables = CableSpec(poly.edge_lengths() + np.add(d, e))
    cfg = robot_positions(poly, cables, TailLengths(d, e))
    shift = np.array([[0.02559385, -0.0962725], [-0.05123337, -0.04962914], [0.01844589, -0.08417124]])
    sol = solve_forward(ForwardProblem.from_configuration(cfg, guess=poly.vertices + shift))
    assert sol.converged
    np.testing.assert_allclose(sol.vertices, poly.vertices, atol=1e-9)
    np.testing.assert_allclose(sol.tensions.tensions, 1.0, atol=1e-9)


def test_perturbed_guesses_recover(seed=99):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        n = int(rng.integers(3, 9))
        poly, cables, tails = random_feasible(rng, n)
        cfg = robot_positions(poly, cables, tails)
        angle = rng.uniform(0, 2 * np.pi, n)
        shift = rng.uniform(0, 0.1, n)[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
        sol = solve_forward(ForwardProblem.from_configuration(cfg, guess=poly.vertices + shift))
        assert sol.converged
        np.testing.assert_allclose(sol.vertices, poly.vertices, atol=1e-6)


def test_smoothed_path_sum_derivatives():
    rng = np.random.default_rng(5)
    poly, cables, tails = random_feasible(rng, 5)
    cfg = robot_positions(poly, cables, tails)
    p = poly.vertices + rng.normal(0, 0.05, poly.vertices.shape)
    eps, h = 1e-2, 1e-6
    f, grad, H = _smoothed_path_sum(p, cfg.q, cfg.r, eps)
    x = p.reshape(-1)
    for i in range(len(x)):
        dx = np.zeros_like(x)
        dx[i] = h
        fp, gp, _ = _smoothed_path_sum((x + dx).reshape(-1, 2), cfg.q, cfg.r, eps)
        fm, gm, _ = _smoothed_path_sum((x - dx).reshape(-1, 2), cfg.q, cfg.r, eps)
        assert (fp - fm) / (2 * h) == pytest.approx(grad[i], abs=1e-6)
        np.testing.assert_allclose((gp - gm) / (2 * h), H[:, i], atol=1e-5)
    assert np.all(np.linalg.eigvalsh(H) > 0)
