import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfkit.errors import ConfigError, SetupError, WrongEigenvalueError
from hopfkit.problems import (
    Example1Config,
    Example2Config,
    build_problem,
    ex1_build,
    ex1_kappa,
    ex1_rho,
    ex2_build,
    exact_branch,
)
from hopfkit.spacetime import norm_Y

from stubs import RotationProblem


def test_config_validation():
    with pytest.raises(ConfigError):
        Example1Config(L=10.0).validate()
    with pytest.raises(ConfigError):
        Example1Config(nx=50).validate()
    with pytest.raises(ConfigError):
        Example2Config(nx=4).validate()
    with pytest.raises(ConfigError):
        build_problem("example3")


def test_unprepared_problem_refuses_u_star():
    p = ex2_build(Example2Config(nx=16), prepare=False)
    with pytest.raises(SetupError):
        p.u_star()


def test_coefficients_example1():
    x = np.array([0.0, 1.0, -3.0, 40.0])
    assert np.allclose(ex1_rho(x), (2 * np.tanh(x / 2) ** 2 - 1) / 4)
    assert np.allclose(ex1_kappa(x), 1 / np.cosh(x / 2))
    assert ex1_rho(np.array([0.0]))[0] == -0.25


def test_example2_critical_eigenpair(ex2):
    assert abs(ex2.eigenvalue - 1j) < 1e-12
    psi = np.zeros((2, ex2.nx), dtype=complex)
    psi[0, 0], psi[1, 0] = 1.0, 1.0 + 1.0j
    assert np.max(np.abs(ex2.psi_star - psi)) < 1e-10
    r = ex2.apply_A_c(ex2.psi_star) - 1j * ex2.psi_star
    assert ex2.norm_V(r) < 1e-12


def test_example2_adjoint_null_vector(ex2):
    # ψ# is proportional to ((1+i) sin x, -sin x)
    p = ex2.psi_sharp
    assert abs(p[1, 0] / p[0, 0] - (-1.0) / (1.0 + 1.0j)) < 1e-10
    assert np.max(np.abs(p[:, 1:])) < 1e-12
    # adjoint relation (A_c ψ, ψ#) = (ψ, A_c^* ψ#) on a random vector
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, ex2.nx)) + 1j * rng.standard_normal((2, ex2.nx))
    y = rng.standard_normal((2, ex2.nx)) + 1j * rng.standard_normal((2, ex2.nx))
    assert np.isclose(ex2.inner_V(ex2.apply_A_c(x), y), ex2.inner_V(x, ex2.apply_A_adjoint(y)))


def test_example2_closed_form_resolvent_matches_sparse(ex2, rng):
    for z in (0.0, 1j * 2, 1j * 7, 0.3 + 1j):
        rhs = rng.standard_normal((2, ex2.nx)) + 1j * rng.standard_normal((2, ex2.nx))
        q = ex2.resolvent_solve(z, rhs)
        assert np.allclose(z * q - ex2.apply_A_c(q), rhs, atol=1e-10)


def test_example1_eigenvalue_near_i(ex1):
    assert abs(ex1.eigenvalue - 1j) < 1e-3
    r = ex1.apply_A_c(ex1.psi_star) - ex1.eigenvalue * ex1.psi_star
    assert ex1.norm_V(r) < 1e-9 * ex1.norm_V(ex1.psi_star)
    # ψ★ ≈ (sech(x/2), -i sech(x/2)) and ‖ψ★‖²_V = 8
    assert ex1.norm_V_sq(ex1.psi_star) == pytest.approx(8.0, rel=1e-3)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_bordering_normalization(name, request):
    p = request.getfixturevalue(name)
    d = p.bordering
    assert np.isrealobj(d)
    assert p.inner_U(d, p.psi_star.real) == pytest.approx(1.0, abs=1e-12)
    assert p.inner_U(d, p.psi_star.imag) == pytest.approx(0.0, abs=1e-12)
    g = p.gram_U_vector(d)
    v = np.random.default_rng(3).standard_normal(p.size)
    assert g @ v == pytest.approx(p.inner_U(v.reshape(2, p.nx), d).real, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_inner_product_is_conjugate_linear_in_second_slot(c):
    p = RotationProblem()
    x = np.array([[1.0 + 2j], [0.5]])
    y = np.array([[-1.0], [3.0 - 1j]])
    assert np.isclose(p.inner_V(c * x, y), c * p.inner_V(x, y))
    assert np.isclose(p.inner_V(x, c * y), np.conj(c) * p.inner_V(x, y))


def test_stub_problem_prepares():
    p = RotationProblem().prepare()
    assert abs(p.eigenvalue - 1j) < 1e-12
    assert p.inner_U(p.bordering, p.psi_star.real) == pytest.approx(1.0)


def test_stub_problem_wrong_eigenvalue():
    with pytest.raises(WrongEigenvalueError):
        RotationProblem(shift=0.8).prepare()


def test_lu_cache_is_bounded(ex2):
    p = ex1_build(Example1Config(L=20.0, nx=200), prepare=False)
    rhs = np.ones((2, p.nx), dtype=complex)
    for k in range(40):
        p.resolvent_solve(1j * k + 0.5, rhs)
    assert len(p._lu_cache) <= 32


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.5])
def test_exact_branch_solves_the_equation(ex2, alpha):
    pt = exact_branch(ex2, alpha)
    assert pt.lam == alpha ** 2 and pt.sigma == 0.0
    assert pt.g_residual < 1e-12 * max(1.0, norm_Y(ex2, pt.u))


def test_describe_contains_configuration(ex1):
    d = ex1.describe()
    assert d["name"] == "example1" and d["nx"] == 200
