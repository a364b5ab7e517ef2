"""The extended system ``H``, its Jacobian ``DH★`` and the high-frequency solver.

Unknowns are ``(λ, σ, u)`` with ``u`` a :class:`SpaceTimeField`.  Assembled
Jacobians act on the flat layout ``[λ, σ, u.to_vector()]`` and produce
``[r¹, r², g.to_vector()]``.  Temporal products are formed by collocation on
``2 nt + 1`` equispaced times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import ConvergenceError, DomainError, NumericError, SpectrumProximityError
from .linalg import ordered_map, smallest_singular_values
from .spacetime import (
    NCOMP,
    TOL_MODE,
    SpaceTimeField,
    functional_l,
    functional_l_rows,
    norm_Y,
    time_derivative,
)
from .states import ExtendedState

NEWTON_TOL = 1e-10
MAX_NEWTON = 25
MAX_HALVINGS = 8
BASIN_RADIUS = 0.5


# ----------------------------------------------------------------------
# collocation machinery
# ----------------------------------------------------------------------
@lru_cache(maxsize=16)
def collocation_matrices(nt: int):
    """``(E, E⁻¹, Dt)`` for the coefficient layout ``[a0, a1, b1, ..., a_nt, b_nt]``.

    ``E`` maps coefficients to values at ``t_s = 2πs/(2nt+1)``; ``Dt`` is the
    time derivative in coefficient space.
    """
    N = 2 * nt + 1
    t = 2.0 * np.pi * np.arange(N) / N
    E = np.ones((N, N))
    Dt = np.zeros((N, N))
    for n in range(1, nt + 1):
        E[:, 2 * n - 1] = np.cos(n * t)
        E[:, 2 * n] = np.sin(n * t)
        Dt[2 * n - 1, 2 * n] = n
        Dt[2 * n, 2 * n - 1] = -n
    Einv = np.linalg.inv(E)
    for arr in (E, Einv, Dt):
        arr.setflags(write=False)
    return E, Einv, Dt


def nonlinear_field(problem, lam, u: SpaceTimeField, fn=None) -> SpaceTimeField:
    """Collocated ``h(λ, u(t))`` (or ``fn(λ, u(t))``) projected back onto the modes."""
    fn = fn or problem.h_eval
    with np.errstate(over="raise", invalid="raise"):
        try:
            vals = fn(lam, u.samples())
        except FloatingPointError as exc:
            raise NumericError(f"nonlinearity overflowed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise NumericError("nonlinearity produced non-finite values")
    return SpaceTimeField.from_samples(vals, u.nt)


def _Au(problem, u: SpaceTimeField) -> SpaceTimeField:
    return u.map_spatial(problem.apply_A)


def residual_g(problem, s: ExtendedState) -> SpaceTimeField:
    """``g(Λ, u) = u_t - (σ + 1)(A u + h(λ, u))``."""
    u = s.u
    return time_derivative(u) - (_Au(problem, u) + nonlinear_field(problem, s.lam, u)) * (s.sigma + 1.0)


def _hu0(problem, lam, u: SpaceTimeField) -> SpaceTimeField:
    zero = np.zeros((u.n_samples(), NCOMP, problem.nx))
    return SpaceTimeField.from_samples(problem.h_u_apply(lam, zero, u.samples()), u.nt)


def assemble_H(problem, s: ExtendedState):
    """``H(Λ, u) = (l¹u - 1, l²u, u_t - (σ+1)(A u + h_u(λ, 0) u))``."""
    l1, l2 = functional_l(problem, s.u)
    g = time_derivative(s.u) - (_Au(problem, s.u) + _hu0(problem, s.lam, s.u)) * (s.sigma + 1.0)
    return l1 - 1.0, l2, g


def linearization_matrix(problem, nt: int, lam, sigma, u_samples=None):
    """Matrix of ``v ↦ v_t - (σ+1)(A v + h_u(λ, u(t)) v)`` on the coefficient layout.

    ``u_samples=None`` means the linearization at ``u = 0``.  Returns a dense
    array for problems with ``dense_nonlinearity`` and a CSC matrix otherwise.
    """
    E, Einv, Dt = collocation_matrices(nt)
    N = 2 * nt + 1
    S = problem.size
    if u_samples is None:
        u_samples = np.zeros((N, NCOMP, problem.nx))
    rows, cols, vals = problem.h_u_local(lam, u_samples)
    coupling = np.einsum("ks,sl->kls", Einv, E)
    block_vals = np.einsum("kls,sp->klp", coupling, vals)
    k_idx, l_idx = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    R = (k_idx[:, :, None] * S + rows[None, None, :]).ravel()
    C = (l_idx[:, :, None] * S + cols[None, None, :]).ravel()
    Jh = sp.coo_matrix((block_vals.ravel(), (R, C)), shape=(N * S, N * S))
    base = sp.kron(sp.csr_matrix(Dt), sp.identity(S)) - (sigma + 1.0) * (
        sp.kron(sp.identity(N), problem.A) + Jh
    )
    if problem.dense_nonlinearity:
        return base.toarray()
    out = sp.csc_matrix(base)
    out.eliminate_zeros()
    return out


def bordered_matrix(problem, nt: int, core, col_lam, col_sigma):
    """``[[0, 0, l], [c_λ, c_σ, core]]`` in the dense/sparse flavour of ``core``."""
    lrows = functional_l_rows(problem, nt)
    cols = np.column_stack([col_lam, col_sigma])
    if sp.issparse(core):
        top = sp.hstack([sp.csr_matrix((2, 2)), sp.csr_matrix(lrows)])
        bot = sp.hstack([sp.csr_matrix(cols), core])
        return sp.csc_matrix(sp.vstack([top, bot]))
    top = np.hstack([np.zeros((2, 2)), lrows])
    return np.vstack([top, np.hstack([cols, core])])


class LinearSolver:
    """LU factorization of a dense or sparse square matrix.

    Sparse matrices are reordered by reverse Cuthill-McKee on everything but
    the first ``border`` unknowns, which are moved last; the dense bordering
    rows and columns then cause no fill.  (Generic fill-reducing orderings
    behave erratically on these bordered space-time Jacobians.)
    """

    def __init__(self, mat, border: int = 0):
        self.sparse = sp.issparse(mat)
        if self.sparse:
            mat = sp.csc_matrix(mat)
            core = mat[border:, border:]
            perm = reverse_cuthill_mckee(sp.csr_matrix(abs(core) + abs(core.T)), symmetric_mode=True)
            self._order = np.concatenate([perm + border, np.arange(border)])
            permuted = sp.csc_matrix(mat[self._order][:, self._order])
            try:
                self._lu = spla.splu(permuted, permc_spec="NATURAL", diag_pivot_thresh=0.1,
                                     options={"SymmetricMode": True})
            except RuntimeError as exc:
                raise SpectrumProximityError("Jacobian is exactly singular", 0.0) from exc
            d = np.abs(self._lu.U.diagonal())
        else:
            self._lu = sla.lu_factor(np.asarray(mat), check_finite=False)
            d = np.abs(np.diag(self._lu[0]))
        if d.min() <= 1e-14 * d.max():
            raise SpectrumProximityError("Jacobian is numerically singular", 0.0)

    def solve(self, rhs):
        if self.sparse:
            out = np.empty_like(rhs)
            out[self._order] = self._lu.solve(rhs[self._order])
            return out
        return sla.lu_solve(self._lu, rhs, check_finite=False)


# ----------------------------------------------------------------------
# DH★
# ----------------------------------------------------------------------
@dataclass
class DHStar:
    """``(λ, σ, u) ↦ (l¹u, l²u, u_t - A u - σ A u★ - λ f⁰_{λu} u★)``."""

    problem: object
    nt: int
    u_star: SpaceTimeField = field(init=False)

    def __post_init__(self):
        self.problem.require_prepared()
        self.u_star = self.problem.u_star(self.nt)

    @property
    def size(self) -> int:
        return 2 + (2 * self.nt + 1) * self.problem.size

    def apply(self, lam, sigma, u: SpaceTimeField):
        p = self.problem
        l1, l2 = functional_l(p, u)
        au_star = _Au(p, self.u_star)
        f0u = self.u_star.map_spatial(p.h_lambda_u_apply)
        third = time_derivative(u) - _Au(p, u) - au_star * sigma - f0u * lam
        return l1, l2, third

    def matvec(self, x):
        p = self.problem
        u = SpaceTimeField.from_vector(x[2:], self.nt, p.nx)
        l1, l2, g = self.apply(x[0], x[1], u)
        return np.concatenate([[l1, l2], g.to_vector()])

    def linear_operator(self):
        return spla.LinearOperator((self.size, self.size), matvec=self.matvec, dtype=float)

    def matrix(self):
        p = self.problem
        core = linearization_matrix(p, self.nt, 0.0, 0.0)
        col_lam = -self.u_star.map_spatial(p.h_lambda_u_apply).to_vector()
        col_sigma = -_Au(p, self.u_star).to_vector()
        return bordered_matrix(p, self.nt, core, col_lam, col_sigma)


def jacobian_DH_star(problem, nt: int = 8) -> DHStar:
    return DHStar(problem, nt)


@dataclass
class IsolatednessMargin:
    """Smallest singular value of ``DH★`` in two conventions.

    ``operator`` uses ``ℝ² × X → ℝ² × Y``; ``euclidean`` uses plain
    coefficient norms.  ``blocks`` lists per-block values keyed ``"mode0"``,
    ``"S1"`` and ``"n=2"``, ... as ``(operator, euclidean)``.
    """

    operator: float
    euclidean: float
    blocks: dict

    def to_json(self):
        return {"operator": self.operator, "euclidean": self.euclidean,
                "blocks": {k: list(v) for k, v in self.blocks.items()}}


def _s1_block(problem):
    """Real matrix of DH★ restricted to ``(λ, σ, a₁, b₁)``."""
    S = problem.size
    A = sp.csr_matrix(problem.A)
    a_star = problem.psi_star.real.ravel()
    b_star = -problem.psi_star.imag.ravel()
    f0 = lambda v: problem.h_lambda_u_apply(v.reshape(NCOMP, problem.nx)).ravel()
    g = problem.gram_U_vector(problem.bordering)
    eye = sp.identity(S)
    top = sp.csr_matrix(np.vstack([np.concatenate([[0.0, 0.0], g, np.zeros(S)]),
                                   np.concatenate([[0.0, 0.0], np.zeros(S), g])]))
    cos_rows = sp.hstack([sp.csr_matrix(np.column_stack([-f0(a_star), -(A @ a_star)])), -A, eye])
    sin_rows = sp.hstack([sp.csr_matrix(np.column_stack([-f0(b_star), -(A @ b_star)])), -eye, -A])
    return sp.csc_matrix(sp.vstack([top, cos_rows, sin_rows]))


def isolatedness_margin(problem, nt: int = 8) -> IsolatednessMargin:
    """σ_min of ``DH★`` via its exact block decomposition over temporal modes.

    At ``Λ = 0`` the third component maps mode ``n`` to mode ``n``; mode 1 is
    coupled to ``(λ, σ)`` and the bordering rows.  Each block is reduced with
    its own Gram matrices, and the overall value is the minimum over blocks.
    """
    problem.require_prepared()
    A = sp.csr_matrix(problem.A)
    w = problem.weights.ravel()
    W = sp.diags(w)
    AtWA = sp.csr_matrix(A.T @ W @ A)
    blocks = {}

    s0 = float(smallest_singular_values(A, w, w)[0])
    blocks["mode0"] = (s0 / np.sqrt(1.0 + s0 ** 2), float(smallest_singular_values(A)[0]))

    B1 = _s1_block(problem)
    gx = (2.0 * W + AtWA)
    wx1 = sp.block_diag([sp.identity(2), np.pi * gx, np.pi * gx], format="csc")
    wy1 = np.concatenate([[1.0, 1.0], np.pi * w, np.pi * w])
    blocks["S1"] = (float(smallest_singular_values(B1, wy1, wx1)[0]),
                    float(smallest_singular_values(B1)[0]))

    def mode(n):
        Bn = problem.shifted_matrix(1j * n)
        wxn = sp.csc_matrix((1.0 + n * n) * W + AtWA)
        return (float(smallest_singular_values(Bn, w, wxn)[0]),
                float(smallest_singular_values(Bn)[0]))

    for n, val in zip(range(2, nt + 1), ordered_map(mode, range(2, nt + 1))):
        blocks[f"n={n}"] = val
    op = min(v[0] for v in blocks.values())
    eu = min(v[1] for v in blocks.values())
    return IsolatednessMargin(op, eu, blocks)


# ----------------------------------------------------------------------
# high-frequency solve
# ----------------------------------------------------------------------
@dataclass
class HighFrequencySolution:
    u: SpaceTimeField
    modes: list
    p_norms: np.ndarray
    q_norms: np.ndarray
    aq_norms: np.ndarray


def solve_high_frequency(problem, z: SpaceTimeField, tol: float = TOL_MODE,
                         details: bool = False):
    """Solve ``u_t - A u = z`` on the modes ``|n| ≥ 2``.

    ``q_n = (in - A_c)⁻¹ p_n`` with ``p_n = ẑ(n)``, then realified.

    Raises
    ------
    DomainError
        ``z`` has mode-0 or mode-1 content above ``tol`` (relative).
    """
    total = np.sum(z.a ** 2) + np.sum(z.b ** 2)
    low = np.sum(z.a[:2] ** 2) + np.sum(z.b[:2] ** 2)
    if total > 0 and np.sqrt(low / total) > tol:
        raise DomainError(f"right-hand side has low-mode content {np.sqrt(low / total):.3e}",
                          energy=float(np.sqrt(low / total)))
    modes = list(range(2, z.nt + 1))

    def one(n):
        p = 0.5 * (z.a[n] - 1j * z.b[n])
        return p, problem.resolvent_solve(1j * n, p)

    res = ordered_map(one, modes)
    a = np.zeros_like(z.a)
    b = np.zeros_like(z.b)
    pn, qn, aqn = [], [], []
    for n, (p, q) in zip(modes, res):
        a[n] = 2.0 * q.real
        b[n] = -2.0 * q.imag
        pn.append(problem.norm_V(p))
        qn.append(problem.norm_V(q))
        aqn.append(problem.norm_V(problem.apply_A_c(q)))
    u = SpaceTimeField(a, b)
    if not details:
        return u
    return HighFrequencySolution(u, modes, np.array(pn), np.array(qn), np.array(aqn))


# ----------------------------------------------------------------------
# Newton on H
# ----------------------------------------------------------------------
def _H_norm(problem, s):
    r1, r2, g = assemble_H(problem, s)
    return float(np.sqrt(r1 ** 2 + r2 ** 2 + norm_Y(problem, g) ** 2)), (r1, r2, g)


def _H_jacobian(problem, s: ExtendedState):
    """Jacobian of H at ``(λ, σ, u)``; exact when ``h_u(λ, 0)`` is linear in ``λ``."""
    nt = s.u.nt
    core = linearization_matrix(problem, nt, s.lam, s.sigma)
    f0u = s.u.map_spatial(problem.h_lambda_u_apply)
    col_lam = -(s.sigma + 1.0) * f0u.to_vector()
    col_sigma = -(_Au(problem, s.u) + _hu0(problem, s.lam, s.u)).to_vector()
    return bordered_matrix(problem, nt, core, col_lam, col_sigma)


@dataclass
class NewtonResult:
    state: ExtendedState
    iterations: int
    trace: list


def newton_refine_Hstar(problem, guess: ExtendedState, tol: float = NEWTON_TOL,
                        max_iters: int = MAX_NEWTON, basin: float = BASIN_RADIUS) -> NewtonResult:
    """Damped Newton iteration for ``H(Λ, u) = 0`` from ``guess``.

    The residual is ``sqrt(r¹² + r²² + ‖g‖²_Y)``; convergence means it is at
    most ``tol · max(1, ‖u★‖_Y)``.

    Raises
    ------
    ConvergenceError
        Initial residual above ``basin`` (outside the Newton basin), a step that
        cannot be damped into descent, or no convergence in ``max_iters``.
    """
    problem.require_prepared()
    nt = guess.u.nt
    scale = max(1.0, norm_Y(problem, problem.u_star(nt)))
    s = guess
    res, parts = _H_norm(problem, s)
    trace = [res]
    if res > basin * scale:
        raise ConvergenceError(f"initial residual {res:.3e} is outside the Newton basin", trace=trace)
    for it in range(max_iters + 1):
        if res <= tol * scale:
            return NewtonResult(s, it, trace)
        if it == max_iters:
            break
        r1, r2, g = parts
        rhs = -np.concatenate([[r1, r2], g.to_vector()])
        try:
            dx = LinearSolver(_H_jacobian(problem, s), border=2).solve(rhs)
        except SpectrumProximityError as exc:
            raise ConvergenceError(f"singular Jacobian at iteration {it}", trace=trace) from exc
        du = SpaceTimeField.from_vector(dx[2:], nt, problem.nx)
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = ExtendedState(s.lam + step * dx[0], s.sigma + step * dx[1], s.u + du * step)
            tres, tparts = _H_norm(problem, trial)
            if tres < res:
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"no descent after {MAX_HALVINGS} halvings", trace=trace)
        s, res, parts = trial, tres, tparts
        trace.append(res)
    raise ConvergenceError(f"Newton did not converge in {max_iters} iterations", trace=trace)


__all__ = [
    "DHStar",
    "HighFrequencySolution",
    "IsolatednessMargin",
    "LinearSolver",
    "NewtonResult",
    "assemble_H",
    "bordered_matrix",
    "collocation_matrices",
    "isolatedness_margin",
    "jacobian_DH_star",
    "linearization_matrix",
    "newton_refine_Hstar",
    "nonlinear_field",
    "residual_g",
    "solve_high_frequency",
]
