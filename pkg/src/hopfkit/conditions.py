"""Numerical checks, with margins, of the Hopf hypotheses.

* (B1) ``i`` is a simple eigenvalue of ``A_c``;
* (B2) the critical eigenvalue crosses the imaginary axis with nonzero speed;
* (B3) ``ik`` lies in the resolvent set for ``k ≠ ±1``;
* (K1) ``‖(in - A_c)⁻¹‖ ≤ M/n`` for ``n ≥ 2``.

Operator norms are measured in the discrete V inner product.  Closed-form
bounds for the heat-system symbol and the FitzHugh-Nagumo resolvent are
provided as independent calculators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ConvergenceError,
    DegeneracyError,
    PoleError,
    SetupError,
    SpectrumProximityError,
    WrongEigenvalueError,
)
from .linalg import ordered_map, smallest_singular_values

TOL_B2 = 1e-3
TOL_B3_REL = 1e-6
TOL_GAP = 1e-6
TOL_NONDEG = 1e-10
EIG_TOL = 1e-10
MAX_ITERS = 200
WRONG_EIGENVALUE_DIST = 0.5


# ----------------------------------------------------------------------
# eigenpairs
# ----------------------------------------------------------------------
def _rayleigh(problem, psi, apply):
    return problem.inner_V(apply(psi), psi) / problem.inner_V(psi, psi)


def _eig_residual(problem, psi, mu, apply):
    return problem.norm_V(apply(psi) - mu * psi) / problem.norm_V(psi)


def _normalize_to(problem, psi, ref):
    c = problem.inner_V(psi, ref)
    if abs(c) == 0.0:
        raise DegeneracyError("computed eigenvector is orthogonal to its reference guess")
    psi = psi * (np.conj(c) / abs(c))
    return psi * (problem.norm_V(ref) / problem.norm_V(psi))


def _inverse_iteration(problem, shift, guess, apply, solve, max_iters, tol):
    psi = np.asarray(guess, dtype=complex)
    mu = _rayleigh(problem, psi, apply)
    trace = [_eig_residual(problem, psi, mu, apply)]
    if trace[-1] <= tol:
        return mu, psi, trace
    try:
        solve(shift, psi)
    except SpectrumProximityError:
        shift = shift + 1e-8 * (1.0 + 1.0j)
    for _ in range(max_iters):
        psi = solve(shift, psi)
        psi = psi / problem.norm_V(psi)
        mu = _rayleigh(problem, psi, apply)
        trace.append(_eig_residual(problem, psi, mu, apply))
        if trace[-1] <= tol:
            return mu, psi, trace
    raise ConvergenceError(f"inverse iteration did not converge in {max_iters} steps", trace=trace)


def find_critical_eigenpair(problem, shift=1j, max_iters: int = MAX_ITERS, tol: float = EIG_TOL):
    """Eigenpair ``(μ, ψ★)`` of ``A_c`` nearest ``shift`` by inverse iteration.

    The analytic guess of the problem is tried first; the returned vector is
    phase-aligned with the guess and scaled to the guess's V norm.

    Raises
    ------
    ConvergenceError
        No convergence within ``max_iters`` iterations.
    WrongEigenvalueError
        The converged eigenvalue is farther than 0.5 from ``shift``.
    """
    guess = problem.psi_star_guess()
    mu, psi, trace = _inverse_iteration(problem, shift, guess, problem.apply_A_c,
                                        problem.resolvent_solve, max_iters, tol)
    if abs(mu - shift) > WRONG_EIGENVALUE_DIST:
        raise WrongEigenvalueError(f"converged to μ={mu}, too far from {shift}", trace=trace)
    return complex(mu), _normalize_to(problem, psi, guess)


def find_adjoint_null_vector(problem, max_iters: int = MAX_ITERS, tol: float = EIG_TOL):
    """``ψ#`` spanning the kernel of ``(μ - A_c)^*`` for the computed critical ``μ``.

    ``A_c^*`` is the V-adjoint; its eigenvalue is ``conj(μ)`` (near ``-i``).
    """
    if problem.eigenvalue is None:
        raise SetupError("critical eigenvalue must be computed before ψ#")
    guess = problem.psi_sharp_guess()
    shift = np.conj(problem.eigenvalue)
    mu, psi, _ = _inverse_iteration(problem, shift, guess, problem.apply_A_adjoint,
                                    problem.adjoint_resolvent_solve, max_iters, tol)
    return _normalize_to(problem, psi, guess)


# ----------------------------------------------------------------------
# (B1), (B2)
# ----------------------------------------------------------------------
def shifted_singular_values(problem, z, k: int = 1) -> np.ndarray:
    """``k`` smallest singular values of ``z - A_c`` in the V norm."""
    return smallest_singular_values(problem.shifted_matrix(z), problem.weights.ravel(),
                                    problem.weights.ravel(), k=k)


def check_simplicity(problem):
    """Return ``(gap, nondeg)`` certifying the simplicity of ``i``.

    ``gap`` is the second-smallest singular value of ``i - A_c``; ``nondeg`` is
    ``|(ψ★, ψ#)_V|`` which is nonzero exactly when ``ψ★ ∉ R(i - A_c)``.
    """
    if problem.psi_sharp is None or problem.psi_star is None:
        raise SetupError("ψ★ and ψ# must be prepared before the simplicity check")
    s = shifted_singular_values(problem, 1j, k=2)
    nondeg = abs(problem.inner_V(problem.psi_star, problem.psi_sharp))
    return float(s[1]), float(nondeg)


def transversality(problem) -> complex:
    """``μ′(0) = (f⁰_{λu} ψ★, ψ#)_V / (ψ★, ψ#)_V``.

    Both pairings are linear in the first slot, so the quotient is the
    derivative of the critical eigenvalue itself (not its conjugate).
    """
    if problem.psi_sharp is None or problem.psi_star is None:
        raise SetupError("ψ★ and ψ# must be prepared before the transversality check")
    den = problem.inner_V(problem.psi_star, problem.psi_sharp)
    if abs(den) < TOL_NONDEG:
        raise DegeneracyError(f"(ψ★, ψ#)_V = {den} is numerically zero")
    num = problem.inner_V(problem.h_lambda_u_apply(problem.psi_star), problem.psi_sharp)
    return complex(num / den)


def eigenvalue_derivative_fd(problem, step: float = 1e-4) -> complex:
    """Central difference of the critical eigenvalue of ``A + λ f⁰_{λu}`` in ``λ``.

    Uses inverse iteration on the perturbed operator; independent of ``ψ#``.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    n = problem.size
    eye = np.eye(n)
    cols = [problem.h_lambda_u_apply(eye[:, j].reshape(2, problem.nx)).ravel() for j in range(n)]
    F = sp.csc_matrix(np.array(cols).T)
    mus = []
    for lam in (-step, step):
        M = sp.csc_matrix(problem.A + lam * F).astype(complex)
        lu = spla.splu(sp.csc_matrix(problem.eigenvalue * sp.identity(n) - M))
        psi = problem.psi_star.ravel().astype(complex)
        for _ in range(50):
            psi = lu.solve(psi)
            psi /= np.linalg.norm(psi)
        mus.append(np.vdot(psi, M @ psi))
    return complex((mus[1] - mus[0]) / (2 * step))


# ----------------------------------------------------------------------
# (B3), (K1)
# ----------------------------------------------------------------------
def check_B3(problem, k_max: int = 16):
    """``[(k, σ_min(ik - A_c))]`` for ``k ∈ {0, 2, ..., k_max}``."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    ks = [0] + list(range(2, k_max + 1))
    margins = ordered_map(lambda k: float(shifted_singular_values(problem, 1j * k)[0]), ks)
    return list(zip(ks, margins))


def b3_threshold(k: int) -> float:
    return TOL_B3_REL * (1.0 + abs(k))


def estimate_K1(problem, n_min: int = 2, n_max: int = 64):
    """``(M, n_at_max)`` with ``M = max n ‖(in - A_c)⁻¹‖_V`` over ``[n_min, n_max]``.

    Raises
    ------
    SpectrumProximityError
        Some ``in`` is numerically an eigenvalue.
    """
    if not 2 <= n_min < n_max:
        raise ValueError("need 2 <= n_min < n_max")
    ns = list(range(n_min, n_max + 1))

    def one(n):
        s = float(shifted_singular_values(problem, 1j * n)[0])
        if s <= SPECTRUM_TOL * (1.0 + n):
            raise SpectrumProximityError(f"in = {n}i is numerically in the spectrum", 1j * n)
        return n / s

    vals = ordered_map(one, ns)
    i = int(np.argmax(vals))
    return float(vals[i]), ns[i]


SPECTRUM_TOL = 1e-13


# ----------------------------------------------------------------------
# closed-form calculators
# ----------------------------------------------------------------------
def lemma51_J(k, xi):
    """``J(k, ξ) = (ξ⁴ + (k+1)²) / (ξ⁸ + 2(k²+1)ξ⁴ + (1-k²)²)``; vectorized in ``ξ``."""
    xi = np.asarray(xi, dtype=float)
    x4 = xi ** 4
    den = x4 ** 2 + 2.0 * (k * k + 1.0) * x4 + (1.0 - k * k) ** 2
    if np.any(den == 0.0):
        raise PoleError(f"J(k, ξ) has a pole at k={k}, ξ=0")
    out = (x4 + (k + 1.0) ** 2) / den
    return float(out) if out.ndim == 0 else out


def ex1_resolvent_symbol(k, xi, gamma, omega):
    """Fourier-symbol solution of ``(A₀c - ik)(φ, ψ) = (γ, ω)`` for the constant-coefficient part.

    With ``s = ξ² + ik``: ``φ̂ = (-s γ + ω)/(1 + s²)``, ``ψ̂ = -(γ + s ω)/(1 + s²)``.
    """
    s = np.asarray(xi, dtype=float) ** 2 + 1j * k
    den = 1.0 + s * s
    if np.any(den == 0.0):
        raise PoleError(f"resolvent symbol has a pole at k={k}, ξ={xi}")
    return (-s * gamma + omega) / den, -(gamma + s * omega) / den


def ex1_symbol_apply(k, xi, phi, psi):
    """Symbol of ``A₀c - ik`` applied to ``(φ̂, ψ̂)``."""
    s = np.asarray(xi, dtype=float) ** 2 + 1j * k
    return -s * phi - psi, phi - s * psi


def ex1_certified_resolvent_bound(k: int, xi_max: float = 50.0, dxi: float = 0.01) -> float:
    """Perturbation bound on ``‖(A_c - ik)⁻¹‖`` from ``‖B‖ ≤ 1/4`` and ``sup_ξ J``.

    ``‖R₀‖ ≤ sqrt(sup J)`` and ``‖R‖ ≤ ‖R₀‖/(1 - ‖B‖‖R₀‖)``; the sup is taken on
    the grid together with the tail bound ``J ≤ 2/ξ⁴`` beyond it.
    """
    xi = np.arange(0.0, xi_max + dxi / 2, dxi)
    sup_j = max(float(np.max(lemma51_J(k, xi))), 2.0 / xi_max ** 4)
    r0 = np.sqrt(sup_j)
    if 0.25 * r0 >= 1.0:
        raise DegeneracyError("perturbation argument fails: ‖B‖‖R₀‖ >= 1")
    return float(r0 / (1.0 - 0.25 * r0))


@dataclass
class Ex2ResolventBounds:
    """Mode-wise checks of the FitzHugh-Nagumo resolvent estimates at ``ik``."""

    k: int
    n_v_le_d: bool
    v_le_5_over_3k_d: bool
    ux_bound: bool
    v_bound: bool
    ux_norm: float
    ux_rhs: float
    v_norm: float
    v_rhs: float
    max_ratio_nv_d: float


def ex2_resolvent_bounds(problem, k: int, a, b) -> Ex2ResolventBounds:
    """Solve ``(A_c - ik)(u, v) = (a, b)`` and test the explicit estimates.

    ``a``, ``b`` are complex sine coefficients.  Checks ``n|v_n| ≤ |d_n|``,
    ``|v_n| ≤ 5|d_n|/(3k)`` with ``d_n = b_n - 2a_n/(1+ik)``, and the
    L²/H¹₀ bounds on ``u_x`` and ``v``.
    """
    if k < 2:
        raise ValueError("the explicit estimates need k >= 2")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = problem.modes
    sol = -problem.resolvent_solve(1j * k, np.array([a, b]))
    u, v = sol[0], sol[1]
    d = b - 2.0 * a / (1.0 + 1j * k)
    ok = np.abs(d) > 0
    ratio = np.max(n[ok] * np.abs(v[ok]) / np.abs(d[ok])) if np.any(ok) else 0.0
    slack = 1e-12
    l2 = lambda c: float(np.sqrt(0.5 * np.pi * np.sum(np.abs(c) ** 2)))
    h1 = lambda c: float(np.sqrt(0.5 * np.pi * np.sum((n * np.abs(c)) ** 2)))
    sk = np.sqrt(1.0 + k * k)
    ux_rhs = (2.0 * l2(a) / np.sqrt(5.0) + l2(b) + h1(a)) / sk
    v_rhs = 5.0 / (3.0 * k) * (2.0 * l2(a) / sk + l2(b))
    return Ex2ResolventBounds(
        k=k,
        n_v_le_d=bool(np.all(n * np.abs(v) <= np.abs(d) * (1 + slack))),
        v_le_5_over_3k_d=bool(np.all(np.abs(v) <= 5.0 / (3.0 * k) * np.abs(d) * (1 + slack))),
        ux_bound=h1(u) <= ux_rhs * (1 + slack),
        v_bound=l2(v) <= v_rhs * (1 + slack),
        ux_norm=h1(u), ux_rhs=float(ux_rhs), v_norm=l2(v), v_rhs=float(v_rhs),
        max_ratio_nv_d=float(ratio),
    )


# ----------------------------------------------------------------------
# report
# ----------------------------------------------------------------------
def _cplx(z):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


@dataclass
class ConditionReport:
    problem: dict
    b1_eigenvalue: complex
    b1_simplicity_gap: float
    b1_nondegeneracy: float
    b2_mu_prime: complex
    b3_margins: list
    k1_constant: float
    k1_n_at_max: int
    k1_range: tuple
    k1_bound: Optional[float] = None
    passed: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())

    def to_json(self) -> dict:
        return {
            "problem": self.problem,
            "b1": {
                "eigenvalue": _cplx(self.b1_eigenvalue),
                "simplicity_gap": self.b1_simplicity_gap,
                "nondegeneracy": self.b1_nondegeneracy,
            },
            "b2": {"mu_prime": _cplx(self.b2_mu_prime)},
            "b3": [[int(k), float(m)] for k, m in self.b3_margins],
            "k1": {
                "M": self.k1_constant,
                "n_at_max": int(self.k1_n_at_max),
                "n_range": list(self.k1_range),
                "bound": self.k1_bound,
            },
            "pass": dict(self.passed),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def run_conditions(problem, k_max: int = 16, n_max: int = 64, n_min: int = 2,
                   tol_b2: float = TOL_B2, k1_bound: Optional[float] = None) -> ConditionReport:
    """Evaluate all checks on a prepared problem."""
    problem.require_prepared()
    mu = problem.eigenvalue
    gap, nondeg = check_simplicity(problem)
    try:
        mu_prime = transversality(problem)
    except DegeneracyError:
        mu_prime = complex("nan")
    b3 = check_B3(problem, k_max)
    M, n_at = estimate_K1(problem, n_min, n_max)
    passed = {
        "B1": bool(abs(mu - 1j) <= WRONG_EIGENVALUE_DIST and gap > TOL_GAP and nondeg > TOL_NONDEG),
        "B2": bool(np.isfinite(mu_prime.real) and abs(mu_prime.real) > tol_b2),
        "B3": bool(all(m > b3_threshold(k) for k, m in b3)),
        "K1": bool(np.isfinite(M) and (k1_bound is None or M <= k1_bound)),
    }
    return ConditionReport(
        problem=problem.describe(), b1_eigenvalue=complex(mu), b1_simplicity_gap=gap,
        b1_nondegeneracy=nondeg, b2_mu_prime=mu_prime, b3_margins=b3, k1_constant=M,
        k1_n_at_max=n_at, k1_range=(n_min, n_max), k1_bound=k1_bound, passed=passed,
    )


__all__ = [
    "ConditionReport",
    "Ex2ResolventBounds",
    "check_B3",
    "check_simplicity",
    "eigenvalue_derivative_fd",
    "estimate_K1",
    "ex1_certified_resolvent_bound",
    "ex1_resolvent_symbol",
    "ex1_symbol_apply",
    "ex2_resolvent_bounds",
    "find_adjoint_null_vector",
    "find_critical_eigenpair",
    "lemma51_J",
    "run_conditions",
    "shifted_singular_values",
    "transversality",
]
