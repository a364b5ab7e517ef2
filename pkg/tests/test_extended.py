import numpy as np
import pytest

from hopfkit.errors import ConvergenceError, DomainError
from hopfkit.extended import (
    DHStar,
    LinearSolver,
    assemble_H,
    collocation_matrices,
    isolatedness_margin,
    linearization_matrix,
    newton_refine_Hstar,
    nonlinear_field,
    residual_g,
    solve_high_frequency,
)
from hopfkit.problems import exact_branch
from hopfkit.spacetime import SpaceTimeField, norm_X, norm_Y, time_derivative
from hopfkit.states import ExtendedState
from hopfkit.verify import noncompact_identity_error

NT = 4


def smooth_perturbation(P, amp):
    us = P.u_star(NT)
    a = np.zeros(us.a.shape)
    b = np.zeros(us.b.shape)
    k = P.kappa
    a[0, 0], a[2, 1], b[1, 0], b[3, 1] = amp * k, amp * k, 0.5 * amp * k, -amp * k
    return SpaceTimeField(a, b)


def random_field(rng, P, nt=NT):
    a = rng.standard_normal((nt + 1, 2, P.nx))
    b = rng.standard_normal((nt + 1, 2, P.nx))
    b[0] = 0.0
    return SpaceTimeField(a, b)


def test_collocation_matrices(rng):
    E, Einv, Dt = collocation_matrices(NT)
    assert np.allclose(E @ Einv, np.eye(2 * NT + 1))
    assert Dt[1, 2] == 1 and Dt[2, 1] == -1 and Dt[2 * NT - 1, 2 * NT] == NT


def test_exact_branch_zeroes_g(ex2):
    for alpha in (0.05, 0.3):
        pt = exact_branch(ex2, alpha, NT)
        g = residual_g(ex2, ExtendedState(pt.lam, 0.0, pt.u))
        assert norm_Y(ex2, g) < 1e-12


def test_collocation_is_exact_for_cubic(ex2, rng):
    # a cubic of a mode-1 field lives in modes 0..3 <= NT, so 2*NT+1 samples are exact
    u = ex2.u_star(NT) * 0.7
    h = nonlinear_field(ex2, 0.2, u)
    t = 0.913
    assert np.allclose(h.evaluate(t), ex2.h_eval(0.2, u.evaluate(t)[None])[0], atol=1e-12)


def test_linearization_matches_finite_difference(ex1, rng):
    lam, sigma = 0.1, 0.05
    u = ex1.u_star(NT) * 0.4
    v = random_field(rng, ex1) * 1e-3
    M = linearization_matrix(ex1, NT, lam, sigma, u.samples())
    eps = 1e-6
    gp = residual_g(ex1, ExtendedState(lam, sigma, u + v * eps))
    gm = residual_g(ex1, ExtendedState(lam, sigma, u - v * eps))
    fd = (gp - gm) / (2 * eps)
    assert np.max(np.abs(M @ v.to_vector() - fd.to_vector())) < 1e-6


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_DH_star_matrix_matches_matvec(name, request, rng):
    P = request.getfixturevalue(name)
    D = DHStar(P, NT)
    x = rng.standard_normal(D.size)
    assert np.max(np.abs(D.matrix() @ x - D.matvec(x))) < 1e-10 * np.max(np.abs(D.matvec(x)))


def test_DH_star_is_derivative_of_H(ex1, rng):
    us = ex1.u_star(NT)
    D = DHStar(ex1, NT)
    dl, ds, du = 0.3, -0.2, random_field(rng, ex1)
    eps = 1e-6
    hp = assemble_H(ex1, ExtendedState(eps * dl, eps * ds, us + du * eps))
    hm = assemble_H(ex1, ExtendedState(-eps * dl, -eps * ds, us - du * eps))
    l1, l2, g = D.apply(dl, ds, du)
    assert (hp[0] - hm[0]) / (2 * eps) == pytest.approx(l1, abs=1e-6)
    assert (hp[1] - hm[1]) / (2 * eps) == pytest.approx(l2, abs=1e-6)
    fd = (hp[2] - hm[2]) / (2 * eps)
    assert norm_Y(ex1, fd - g) < 1e-5 * norm_Y(ex1, g)


def test_linear_solver(ex1, rng):
    D = DHStar(ex1, NT)
    x = rng.standard_normal(D.size)
    rhs = D.matrix() @ x
    assert np.allclose(LinearSolver(D.matrix(), border=2).solve(rhs), x, atol=1e-8)


def test_newton_converges_quadratically(ex1):
    guess = ExtendedState(0.1, -0.05, ex1.u_star(NT) + smooth_perturbation(ex1, 0.1))
    assert norm_X(ex1, guess.u - ex1.u_star(NT)) > 1.0
    res = newton_refine_Hstar(ex1, guess)
    assert res.iterations <= 6
    tr = res.trace
    # quadratic decay: log ratio of consecutive residuals close to 2 or better
    ratios = [np.log(tr[i + 1]) / np.log(tr[i]) for i in range(1, len(tr) - 1) if tr[i] < 0.1]
    assert ratios and min(ratios) > 1.6
    s = res.state
    # converged to the discrete critical point: Λ ≈ 0 and u ≈ u★
    assert abs(s.sigma) < 1e-10 and abs(s.lam) < 1e-3
    assert norm_X(ex1, s.u - ex1.u_star(NT)) < 1e-2


def test_newton_refuses_start_outside_basin(ex1):
    guess = ExtendedState(1.0, -0.5, ex1.u_star(NT) + smooth_perturbation(ex1, 1.0))
    with pytest.raises(ConvergenceError) as info:
        newton_refine_Hstar(ex1, guess)
    assert len(info.value.trace) == 1


def test_isolatedness_margin_example1(ex1):
    m = isolatedness_margin(ex1, NT)
    assert m.operator == pytest.approx(0.11459, abs=1e-3)
    assert m.euclidean > 0
    assert set(m.blocks) == {"mode0", "S1", "n=2", "n=3", "n=4"}
    assert m.operator == min(v[0] for v in m.blocks.values())


def test_isolatedness_margin_example2_is_zero(ex2):
    # DH★ is singular for the FitzHugh-Nagumo example
    assert isolatedness_margin(ex2, NT).operator < 1e-12


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_high_frequency_solve(name, request, rng):
    P = request.getfixturevalue(name)
    z = random_field(rng, P)
    a, b = z.a.copy(), z.b.copy()
    a[:2] = b[:2] = 0.0
    z = SpaceTimeField(a, b)
    u = solve_high_frequency(P, z)
    r = time_derivative(u) - u.map_spatial(P.apply_A) - z
    assert norm_Y(P, r) < 1e-10 * norm_Y(P, z)


def test_high_frequency_rejects_low_modes(ex2, rng):
    with pytest.raises(DomainError):
        solve_high_frequency(ex2, random_field(rng, ex2))


def test_noncompact_identity(ex2):
    # holds with +2/n in the second component; the displayed -2/n does not
    assert noncompact_identity_error(ex2, +1.0) < 1e-12
    assert noncompact_identity_error(ex2, -1.0) > 1.0
