import numpy as np
import pytest

from hopfkit.continuation import (
    Branch,
    check_symmetry,
    corrector,
    correct_sequence,
    match_solution,
    phase_align,
    read_branch_csv,
    trace_branch,
    zeta_prime_estimate,
)
from hopfkit.errors import ConvergenceError, DegeneracyError, NoMatchError
from hopfkit.problems import exact_branch
from hopfkit.spacetime import SpaceTimeField, functional_l, norm_X, translate
from hopfkit.states import ExtendedState

NT = 4


@pytest.fixture(scope="module")
def branch2(ex2):
    return trace_branch(ex2, 0.5, 6, nt=NT)


def test_example2_branch_matches_closed_form(ex2, branch2):
    assert len(branch2) == 6
    assert np.allclose(branch2.alphas, np.linspace(0, 0.5, 6))
    for p in branch2.points:
        ex = exact_branch(ex2, p.alpha, NT)
        assert abs(p.lam - p.alpha ** 2) < 1e-10
        assert abs(p.sigma) < 1e-10
        assert norm_X(ex2, p.u - ex.u) < 1e-8
        assert p.eta_norm < 1e-8


def test_branch_point_normalization(ex2, branch2):
    for p in branch2.points:
        l1, l2 = functional_l(ex2, p.u)
        assert l1 == pytest.approx(p.alpha, abs=1e-12)
        assert l2 == pytest.approx(0.0, abs=1e-12)


def test_zero_amplitude_is_trivial(ex2):
    p = corrector(ex2, 0.0, nt=NT)
    assert p.lam == 0 and p.sigma == 0 and norm_X(ex2, p.u) == 0


def test_example1_branch_is_quadratic(ex1):
    br = trace_branch(ex1, 0.2, 3, nt=NT)
    for p in br.points[1:]:
        # λ ≈ α² up to discretization error
        assert abs(p.lam / p.alpha ** 2 - 1.0) < 0.05
        assert abs(p.sigma) < 1e-8
    assert zeta_prime_estimate(br) < 0.2


def test_symmetry(ex2, branch2):
    assert check_symmetry(ex2, branch2) < 1e-10


def test_csv_roundtrip(branch2):
    text = branch2.to_csv()
    rows = read_branch_csv(text)
    assert len(rows) == len(branch2)
    assert rows[3]["lambda"] == branch2.points[3].lam
    partial = branch2.to_csv("PARTIAL: stopped")
    assert partial.rstrip().splitlines()[-1].startswith("#")


def test_partial_branch_on_failure(ex2):
    # α far outside the Newton basin of the predictor stops the sequence
    with pytest.raises(ConvergenceError) as info:
        correct_sequence(ex2, [0.1, 0.2, 1e6], nt=NT)
    assert len(info.value.partial) == 2


def test_state_json_roundtrip(branch2):
    s = branch2.points[2].state()
    back = ExtendedState.from_json(s.to_json())
    assert back.lam == s.lam and back.u.max_abs_diff(s.u) == 0


@pytest.mark.parametrize("theta", [0.0, 0.7, 3.0, 6.0])
def test_phase_align_recovers_shift(ex2, theta):
    u = exact_branch(ex2, 0.3, NT).u
    th, aligned = phase_align(ex2, translate(u, -theta))
    assert np.isclose(np.mod(th - theta + np.pi, 2 * np.pi) - np.pi, 0.0, atol=1e-12)
    l1, l2 = functional_l(ex2, aligned)
    assert l1 > 0 and abs(l2) < 1e-12


def test_phase_align_degenerate(ex2):
    with pytest.raises(DegeneracyError):
        phase_align(ex2, SpaceTimeField.zeros(NT, ex2.nx))


def test_match_recovers_amplitude_and_phase(ex2, branch2):
    pt = exact_branch(ex2, 0.25, NT)
    m = match_solution(ex2, branch2, pt.lam, 0.0, translate(pt.u, -1.3))
    assert m.alpha == pytest.approx(0.25, abs=1e-10)
    assert m.theta == pytest.approx(1.3, abs=1e-10)
    assert m.distance < 1e-8


def test_match_rejects_outside_window(ex2, branch2):
    pt = exact_branch(ex2, 0.25, NT)
    with pytest.raises(NoMatchError):
        match_solution(ex2, branch2, 0.5, 0.0, pt.u)
    with pytest.raises(NoMatchError):
        match_solution(ex2, branch2, pt.lam, 0.0, pt.u * 8.0)


def test_match_rejects_off_branch(ex2, branch2):
    pt = exact_branch(ex2, 0.25, NT)
    with pytest.raises(NoMatchError):
        match_solution(ex2, branch2, pt.lam + 0.01, 0.0, pt.u)
