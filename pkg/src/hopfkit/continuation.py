"""Natural continuation of the bifurcating branch in the amplitude ``α``.

At fixed ``α`` the corrector solves for ``(λ, σ, w)`` with ``u = α w`` and
``w = u★ + η``:

    l¹w = 1,   l²w = 0,   w_t - (σ+1)(A w + h(λ, α w)/α) = 0,

which is ``g(Λ, u) = 0`` divided by ``α``, so the system stays well scaled as
``α → 0``.  Negative ``α`` is allowed and is used for the symmetry check.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, DegeneracyError, NoMatchError, SpectrumProximityError
from .extended import (
    LinearSolver,
    bordered_matrix,
    linearization_matrix,
    nonlinear_field,
)
from .spacetime import (
    DEFAULT_NT,
    SpaceTimeField,
    functional_l,
    norm_X,
    norm_Y,
    time_derivative,
    translate,
)
from .states import BranchPoint

CORRECTOR_TOL = 1e-9
MAX_NEWTON = 25
MAX_HALVINGS = 8
CSV_HEADER = ["alpha", "lambda", "sigma", "eta_norm", "g_residual", "newton_iters"]


@dataclass
class Branch:
    """Ordered branch points with the problem tag and a configuration snapshot."""

    problem: str
    points: list
    config: dict = field(default_factory=dict)

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.points])

    def __len__(self):
        return len(self.points)

    def to_csv(self, trailer: Optional[str] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow(["%.17g" % p.alpha, "%.17g" % p.lam, "%.17g" % p.sigma,
                        "%.17g" % p.eta_norm, "%.17g" % p.g_residual, str(p.newton_iters)])
        if trailer:
            buf.write(f"# {trailer}\n")
        return buf.getvalue()


def read_branch_csv(text: str) -> list:
    """Rows of a branch CSV as dictionaries (comment lines skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    out = []
    for r in rows:
        d = {k: float(r[k]) for k in CSV_HEADER[:-1]}
        d["newton_iters"] = int(r["newton_iters"])
        out.append(d)
    return out


# ----------------------------------------------------------------------
# corrector
# ----------------------------------------------------------------------
def _scaled_residual(problem, alpha, lam, sigma, w):
    """``(l¹w - 1, l²w, G̃)`` with ``G̃ = g(Λ, αw)/α``."""
    l1, l2 = functional_l(problem, w)
    hw = nonlinear_field(problem, lam, w * alpha) / alpha
    G = time_derivative(w) - (w.map_spatial(problem.apply_A) + hw) * (sigma + 1.0)
    return l1 - 1.0, l2, G


def _norm(problem, parts):
    r1, r2, G = parts
    return float(np.sqrt(r1 ** 2 + r2 ** 2 + norm_Y(problem, G) ** 2))


def _corrector_jacobian(problem, alpha, lam, sigma, w):
    nt = w.nt
    samples = (w * alpha).samples()
    core = linearization_matrix(problem, nt, lam, sigma, samples)
    col_lam = -(sigma + 1.0) * nonlinear_field(problem, lam, w * alpha, fn=problem.h_lambda) / alpha
    hw = nonlinear_field(problem, lam, w * alpha) / alpha
    col_sigma = -(w.map_spatial(problem.apply_A) + hw)
    return bordered_matrix(problem, nt, core, col_lam.to_vector(), col_sigma.to_vector())


def _point(problem, alpha, lam, sigma, w, iters, G):
    u_star = problem.u_star(w.nt)
    eta = w - u_star
    return BranchPoint(
        alpha=float(alpha), lam=float(lam), sigma=float(sigma), u=w * alpha,
        eta_norm=norm_X(problem, eta), g_residual=abs(alpha) * norm_Y(problem, G),
        newton_iters=int(iters), eta=eta,
    )


def trivial_point(problem, nt: int = DEFAULT_NT) -> BranchPoint:
    z = SpaceTimeField.zeros(nt, problem.nx)
    return BranchPoint(0.0, 0.0, 0.0, z, 0.0, 0.0, 0, z)


def corrector(problem, alpha: float, guess: Optional[BranchPoint] = None,
              nt: int = DEFAULT_NT, tol: float = CORRECTOR_TOL,
              max_iters: int = MAX_NEWTON) -> BranchPoint:
    """Solve the branch equations at fixed ``α`` by damped Newton.

    ``guess`` supplies ``(λ, σ)`` and ``u``; its ``w = u/α_guess`` is reused.
    Without a guess the leading-order form ``(α², 0, α u★)`` is used.  The
    scaled residual must fall below ``tol · scale`` where
    ``scale = max(1, ‖u★‖_Y)``; the reported ``g_residual`` is ``|α| ‖G̃‖_Y``.

    Raises
    ------
    ConvergenceError
        Singular Jacobian, failed damping, or no convergence.
    """
    problem.require_prepared()
    if alpha == 0.0:
        return trivial_point(problem, guess.u.nt if guess is not None else nt)
    if guess is None or guess.alpha == 0.0:
        nt = guess.u.nt if guess is not None else nt
        lam, sigma, w = alpha ** 2, 0.0, problem.u_star(nt)
    else:
        ratio = alpha / guess.alpha
        lam, sigma = guess.lam * ratio ** 2, guess.sigma * ratio ** 2
        w = guess.u / guess.alpha
    nt = w.nt
    scale = max(1.0, norm_Y(problem, problem.u_star(nt)))
    parts = _scaled_residual(problem, alpha, lam, sigma, w)
    res = _norm(problem, parts)
    trace = [res]
    for it in range(max_iters + 1):
        if res <= tol * scale:
            return _point(problem, alpha, lam, sigma, w, it, parts[2])
        if it == max_iters:
            break
        r1, r2, G = parts
        rhs = -np.concatenate([[r1, r2], G.to_vector()])
        try:
            jac = _corrector_jacobian(problem, alpha, lam, sigma, w)
            dx = LinearSolver(jac, border=2).solve(rhs)
        except SpectrumProximityError as exc:
            raise ConvergenceError(f"singular corrector Jacobian at α={alpha}", trace=trace) from exc
        dw = SpaceTimeField.from_vector(dx[2:], nt, problem.nx)
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            t_lam, t_sig, t_w = lam + step * dx[0], sigma + step * dx[1], w + dw * step
            t_parts = _scaled_residual(problem, alpha, t_lam, t_sig, t_w)
            t_res = _norm(problem, t_parts)
            if t_res < res:
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"corrector at α={alpha}: no descent after {MAX_HALVINGS} halvings",
                                   trace=trace)
        lam, sigma, w, parts, res = t_lam, t_sig, t_w, t_parts, t_res
        trace.append(res)
    raise ConvergenceError(f"corrector at α={alpha} did not converge in {max_iters} iterations",
                           trace=trace)


def correct_sequence(problem, alphas, nt: int = DEFAULT_NT, tol: float = CORRECTOR_TOL) -> list:
    """Correct along ``alphas`` in order, each point predicting the next.

    Raises
    ------
    ConvergenceError
        ``partial`` holds the points computed before the failure.
    """
    pts = []
    prev = None
    for a in alphas:
        try:
            pt = corrector(problem, float(a), prev, nt=nt, tol=tol)
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), trace=exc.trace, partial=pts) from exc
        pts.append(pt)
        prev = pt
    return pts


def trace_branch(problem, alpha_max: float, steps: int, nt: int = DEFAULT_NT,
                 tol: float = CORRECTOR_TOL) -> Branch:
    """Branch on the equispaced grid ``α_j = j·alpha_max/(steps-1)``, ``j = 0..steps-1``.

    Raises
    ------
    ConvergenceError
        ``partial`` holds the partial :class:`Branch`.
    """
    if not alpha_max > 0:
        raise ValueError("alpha_max must be positive")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    alphas = np.linspace(0.0, alpha_max, steps)
    cfg = {"alpha_max": float(alpha_max), "steps": int(steps), "nt": int(nt), **problem.describe()}
    try:
        pts = correct_sequence(problem, alphas, nt=nt, tol=tol)
    except ConvergenceError as exc:
        exc.partial = Branch(problem.name, exc.partial or [], cfg)
        raise
    return Branch(problem.name, pts, cfg)


def zeta_prime_estimate(branch: Branch) -> float:
    """``|ζ(α₁)|/α₁`` at the smallest positive amplitude."""
    pos = [p for p in branch.points if p.alpha > 0]
    if not pos:
        raise ValueError("branch has no positive amplitude")
    p = min(pos, key=lambda q: q.alpha)
    return float(np.hypot(p.lam, p.sigma) / p.alpha)


# ----------------------------------------------------------------------
# symmetry, phase, matching
# ----------------------------------------------------------------------
def check_symmetry(problem, branch: Branch, tol: float = CORRECTOR_TOL) -> float:
    """``max_α |ζ(-α) - ζ(α)| + ‖η(-α) + τ_π η(α)‖_X`` over the branch.

    Points at ``-α`` are computed by the corrector, predicted from the
    reflected positive point ``(ζ(α), -τ_π ...)`` only through ``(λ, σ)`` and
    ``w = τ_π w(α)``.
    """
    worst = 0.0
    prev = None
    for p in branch.points:
        if p.alpha == 0.0:
            continue
        if prev is None:
            guess = None
        else:
            guess = prev
        q = corrector(problem, -p.alpha, guess, nt=p.u.nt, tol=tol)
        dz = np.hypot(q.lam - p.lam, q.sigma - p.sigma)
        de = norm_X(problem, q.eta + translate(p.eta, np.pi))
        worst = max(worst, float(dz + de))
        prev = q
    return worst


def phase_align(problem, v: SpaceTimeField):
    """``(θ, τ_θ v)`` with ``l²(τ_θ v) = 0`` and ``l¹(τ_θ v) ≥ 0``.

    Since ``l(τ_θ v)`` is ``l(v)`` rotated by ``θ``, ``θ = -atan2(q, p)``,
    i.e. ``e^{iθ} = (p - iq)/√(p² + q²)``.
    """
    p, q = functional_l(problem, v)
    r = np.hypot(p, q)
    if r == 0.0 or r <= 1e-14 * max(1.0, norm_Y(problem, v)):
        raise DegeneracyError("l(v) = (0, 0): the phase is undefined")
    theta = float(np.mod(-np.arctan2(q, p), 2.0 * np.pi))
    return theta, translate(v, theta)


@dataclass
class MatchResult:
    alpha: float
    theta: float
    distance: float
    point: BranchPoint


def match_solution(problem, branch: Branch, lam: float, sigma: float, v: SpaceTimeField,
                   tol: float = 1e-6, window=(0.25, 0.25, 1.0)) -> MatchResult:
    """Identify ``(λ, σ, v)`` with a branch point up to time translation.

    The window bounds ``|λ|``, ``|σ|`` and the amplitude ``‖v‖_X/‖u★‖_X``.
    ``v`` is phase-aligned, ``α = l¹(aligned v)`` is read off and the corrector
    is run at ``α`` (predicted from the nearest traced point).  The candidate
    matches when ``‖aligned v - u(α)‖_X ≤ tol`` and ``(λ, σ)`` agree with
    ``ζ(α)`` within ``tol``.

    Raises
    ------
    DegeneracyError
        ``l(v) = 0``.
    NoMatchError
        Outside the uniqueness window or farther than ``tol`` from the branch.
    """
    wl, ws, wv = window
    rel = norm_X(problem, v) / norm_X(problem, problem.u_star(v.nt))
    if abs(lam) >= wl or abs(sigma) >= ws or rel >= wv:
        raise NoMatchError(
            f"candidate outside the uniqueness window |λ|<{wl}, |σ|<{ws}, ‖v‖_X/‖u★‖_X<{wv}")
    theta, aligned = phase_align(problem, v)
    alpha, _ = functional_l(problem, aligned)
    guess = None
    if branch.points:
        guess = min(branch.points, key=lambda p: abs(p.alpha - alpha))
    pt = corrector(problem, alpha, guess, nt=v.nt)
    dist = norm_X(problem, aligned - pt.u)
    dzeta = np.hypot(lam - pt.lam, sigma - pt.sigma)
    if dist > tol or dzeta > tol:
        raise NoMatchError(f"candidate is {dist:.3e} (field) / {dzeta:.3e} (ζ) from the branch at α={alpha:.6g}")
    return MatchResult(float(alpha), theta, float(dist), pt)


__all__ = [
    "Branch",
    "MatchResult",
    "check_symmetry",
    "correct_sequence",
    "corrector",
    "match_solution",
    "phase_align",
    "read_branch_csv",
    "trace_branch",
    "trivial_point",
    "zeta_prime_estimate",
]
