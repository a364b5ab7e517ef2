import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfkit import conditions as cond
from hopfkit.errors import PoleError, SpectrumProximityError

from stubs import RotationProblem


def test_example2_transversality_is_purely_imaginary(ex2):
    # μ'(0) = -3i/8: the real part vanishes, so (B2) fails for this example
    mu = cond.transversality(ex2)
    assert abs(mu - (-0.375j)) < 1e-12
    fd = cond.eigenvalue_derivative_fd(ex2)
    assert abs(fd - mu) < 1e-7


def test_example1_transversality_matches_fd(ex1):
    mu = cond.transversality(ex1)
    fd = cond.eigenvalue_derivative_fd(ex1)
    assert abs(mu - fd) < 1e-6
    assert mu.real > 0.6


def test_stub_has_zero_transversality():
    p = RotationProblem().prepare()
    assert cond.transversality(p) == 0


def test_simplicity_example2(ex2):
    gap, nondeg = cond.check_simplicity(ex2)
    assert gap > cond.TOL_GAP
    # |(ψ★, ψ#)_V| = (π/2)|(1)(1-i) + (1+i)(-1)| = π
    assert nondeg == pytest.approx(np.pi, rel=1e-12)


def test_B3_margins_example2(ex2):
    rows = cond.check_B3(ex2, k_max=6)
    assert [k for k, _ in rows] == [0, 2, 3, 4, 5, 6]
    assert all(m > cond.b3_threshold(k) for k, m in rows)


def test_K1_bounded_and_spectrum_detected(ex2):
    M, n_at = cond.estimate_K1(ex2, 2, 20)
    assert 0 < M < 10 and 2 <= n_at <= 20
    # a stub with eigenvalues ±2i must be reported as spectral
    class Fast(RotationProblem):
        def matrix(self):
            import scipy.sparse as sp
            return sp.csr_matrix(np.array([[0.0, -2.0], [2.0, 0.0]]))
    with pytest.raises(SpectrumProximityError):
        cond.estimate_K1(Fast(), 2, 4)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 200).filter(lambda k: k != 1), st.floats(0, 1e3, allow_nan=False))
def test_symbol_bound(k, xi):
    J = cond.lemma51_J(k, xi)
    assert J <= 1.0 + 1e-12
    if k >= 4:
        assert J <= 2.0 / k ** 2 + 1e-12


def test_decay_bound_needs_k_at_least_4():
    assert cond.lemma51_J(3, 0.0) == pytest.approx(0.25) and 0.25 > 2.0 / 9.0


def test_symbol_pole():
    with pytest.raises(PoleError):
        cond.lemma51_J(1, 0.0)
    with pytest.raises(ZeroDivisionError):
        cond.lemma51_J(1, np.array([0.0, 1.0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.floats(0, 20), st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_symbol_resolvent_inverts_symbol(k, xi, g, w):
    phi, psi = cond.ex1_resolvent_symbol(k, xi, g, w)
    a, b = cond.ex1_symbol_apply(k, xi, phi, psi)
    assert abs(a - g) < 1e-9 * (1 + abs(g)) and abs(b - w) < 1e-9 * (1 + abs(w))


def test_certified_resolvent_bound_dominates_discrete(ex1):
    for k in (2, 4):
        bound = cond.ex1_certified_resolvent_bound(k)
        s = cond.shifted_singular_values(ex1, 1j * k)[0]
        assert 1.0 / s <= bound * (1 + 1e-6)


def test_example2_explicit_bounds(ex2, rng):
    for k in (2, 5, 11):
        a = rng.standard_normal(ex2.nx) + 1j * rng.standard_normal(ex2.nx)
        b = rng.standard_normal(ex2.nx) + 1j * rng.standard_normal(ex2.nx)
        r = cond.ex2_resolvent_bounds(ex2, k, a / np.arange(1, ex2.nx + 1), b)
        assert r.n_v_le_d and r.v_le_5_over_3k_d and r.ux_bound and r.v_bound


def test_report_is_deterministic(ex2):
    r1 = cond.run_conditions(ex2, k_max=4, n_max=8)
    r2 = cond.run_conditions(ex2, k_max=4, n_max=8)
    assert r1.dumps() == r2.dumps()
    data = json.loads(r1.dumps())
    assert data["pass"] == {"B1": True, "B2": False, "B3": True, "K1": True}
    assert not r1.all_pass
