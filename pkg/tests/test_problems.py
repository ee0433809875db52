import numpy as np
import pytest

from spacetime_hp.problems import (
    corner_singular,
    cutoff,
    cutoff_d1,
    cutoff_d2,
    get_problem,
    problem_u1,
    problem_u2,
    problem_u3,
)


def _fd_forcing(prob, t, xy, h=1e-4):
    """Finite-difference oracle for d_t u - Laplace u."""
    dt = (prob.u_exact(t + h, xy) - prob.u_exact(t - h, xy)) / (2 * h)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    lap = (
        prob.u_exact(t, xy + e1)
        + prob.u_exact(t, xy - e1)
        + prob.u_exact(t, xy + e2)
        + prob.u_exact(t, xy - e2)
        - 4 * prob.u_exact(t, xy)
    ) / h**2
    return dt - lap


def _interior_points(rng, n=20):
    pts = []
    while len(pts) < n:
        q = rng.uniform(-0.95, 0.95, 2)
        if (q[0] < -0.05 or q[1] < -0.05) and np.hypot(*q) > 0.05:
            pts.append(q)
    return np.array(pts)


def test_u1_initial_value_and_truncation_default():
    prob = problem_u1()
    assert prob.series_truncation == 1000
    x = np.linspace(0, 1, 50)
    assert np.abs(prob.u_exact(0.0, x)).max() == 0.0


def test_u1_steady_state_midpoint():
    # stationary limit of the series is x(1-x)/2; at x = 1/2 it is 1/8
    prob = problem_u1()
    val = prob.u_exact(60.0, np.array([0.5]))[0]
    assert val == pytest.approx(0.125, abs=1e-9)


def test_u1_forcing_constant():
    prob = problem_u1()
    x = np.linspace(0, 1, 7)
    assert prob.g(0.3, x) == pytest.approx(np.ones(7))


def test_u1_truncation_validation():
    with pytest.raises(ValueError):
        problem_u1(truncation=0)


def test_u1_forcing_consistency_improves_with_truncation():
    # the truncated series satisfies the PDE only up to the series tail,
    # which shrinks as the truncation grows
    rng = np.random.default_rng(4)
    x = rng.uniform(0.1, 0.9, 10)
    t, h = 0.3, 1e-4
    worst = {}
    for trunc in (200, 400, 1600):
        prob = problem_u1(truncation=trunc)
        dt = (prob.u_exact(t + h, x) - prob.u_exact(t - h, x)) / (2 * h)
        lap = (prob.u_exact(t, x + h) + prob.u_exact(t, x - h) - 2 * prob.u_exact(t, x)) / h**2
        worst[trunc] = np.abs(dt - lap - prob.g(t, x)).max()
    assert worst[200] < 2e-2
    assert worst[1600] < worst[200]
    assert worst[1600] < 3e-3


def test_cutoff_junction_smoothness():
    for r0 in (0.25, 0.75):
        inside = np.array([r0 - 1e-11])
        outside = np.array([r0 + 1e-11])
        assert cutoff(inside) == pytest.approx(cutoff(outside), abs=1e-9)
        assert cutoff_d1(outside) == pytest.approx(0.0, abs=1e-7)
        assert cutoff_d2(outside) == pytest.approx(0.0, abs=1e-5)
    assert cutoff(np.array([0.1]))[0] == 1.0
    assert cutoff(np.array([0.9]))[0] == 0.0


def test_corner_singular_boundary_legs():
    # Dirichlet legs of the reentrant corner: positive y-axis and positive x-axis
    ys = np.column_stack([np.zeros(9), np.linspace(0.01, 1, 9)])
    xs = np.column_stack([np.linspace(0.01, 1, 9), np.zeros(9)])
    assert np.abs(corner_singular(ys)).max() < 1e-14
    assert np.abs(corner_singular(xs)).max() < 1e-14


def test_corner_singular_origin_limit():
    assert corner_singular(np.array([[0.0, 0.0]]))[0] == 0.0


def test_corner_singular_is_harmonic():
    rng = np.random.default_rng(1)
    pts = _interior_points(rng)
    h = 1e-4
    e1, e2 = np.array([h, 0]), np.array([0, h])
    lap = (
        corner_singular(pts + e1)
        + corner_singular(pts - e1)
        + corner_singular(pts + e2)
        + corner_singular(pts - e2)
        - 4 * corner_singular(pts)
    ) / h**2
    assert np.abs(lap).max() < 1e-4


@pytest.mark.parametrize("factory", [problem_u2, problem_u3], ids=["u2", "u3"])
def test_lshape_compliance(factory):
    prob = factory()
    rng = np.random.default_rng(0)
    s = rng.uniform(-1, 1, 25)
    boundary = np.vstack(
        [
            np.column_stack([s, -np.ones(25)]),
            np.column_stack([-np.ones(25), s]),
            np.column_stack([s, np.where(s < 0, 1.0, 0.0)]),
            np.column_stack([np.where(s < 0, 1.0, 0.0), s]),
        ]
    )
    for t in rng.uniform(0, 2, 4):
        assert np.abs(prob.u_exact(t, boundary)).max() < 1e-10
    pts = _interior_points(rng, 100)
    assert np.abs(prob.u_exact(0.0, pts)).max() < 1e-10


@pytest.mark.parametrize("factory", [problem_u2, problem_u3], ids=["u2", "u3"])
def test_forcing_consistency_fd(factory):
    prob = factory()
    rng = np.random.default_rng(7)
    pts = _interior_points(rng)
    for t in (0.15, 0.6, 1.4):
        got = prob.g(t, pts)
        ref = _fd_forcing(prob, t, pts)
        scale = max(np.abs(ref).max(), 1e-2)
        assert np.abs(got - ref).max() / scale < 1e-5


def test_u3_temporal_factor():
    prob = problem_u3()
    pt = np.array([[-0.1, -0.1]])
    from spacetime_hp.problems import u_reg

    sing = prob.u_exact(1.0, pt) - u_reg(1.0, pt)
    base = cutoff(np.hypot(0.1, 0.1)) * corner_singular(pt)
    assert sing[0] / base[0] == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_u3_derivative_singular_at_zero():
    prob = problem_u3()
    pts = np.array([[-0.3, -0.3]])
    with pytest.raises(ValueError):
        prob.du_dt_exact(0.0, pts)
    assert np.isfinite(prob.du_dt_exact(1e-6, pts)).all()


def test_registry():
    assert get_problem("u1", truncation=10).series_truncation == 10
    assert get_problem("u2").dimension == 2
    with pytest.raises(KeyError):
        get_problem("nope")


def test_u1_truncation_is_adequate():
    # doubling the truncation changes values at interior times negligibly
    a = problem_u1(truncation=1000)
    b = problem_u1(truncation=2000)
    x = np.linspace(0.05, 0.95, 19)
    for t in (1e-3, 0.1, 1.0):
        assert np.abs(a.u_exact(t, x) - b.u_exact(t, x)).max() < 1e-10
