"""Semilinear evolution problems ``u_t = A u + h(λ, u)`` and the two built-in examples.

Spatial states are arrays of shape ``(..., 2, nx)``; leading axes are batch
axes (typically time samples).  The V inner product of every built-in
problem is diagonal in the spatial degrees of freedom and is stored as
``weights`` of shape ``(2, nx)``.  Complex pairings are conjugate-linear in
the second argument.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DegeneracyError, SetupError, SpectrumProximityError
from .spacetime import DEFAULT_NT, NCOMP, l1_embed
from .states import BranchPoint

SINGULAR_PIVOT_TOL = 1e-13
LU_CACHE_SIZE = 32


class EvolutionProblem:
    """Discretized problem interface.

    Subclasses provide :meth:`matrix` (the real operator ``A`` on the flat
    ``[c][j]`` layout), the V weights, and the nonlinearity hooks.  Generic
    sparse implementations of the linear operations are supplied here.
    """

    name = "custom"
    #: True when ``h_u`` couples all spatial dofs (dense Jacobians are used).
    dense_nonlinearity = False

    def __init__(self, nx: int, weights):
        self.nx = int(nx)
        self.weights = np.asarray(weights, dtype=float).reshape(NCOMP, self.nx)
        self.eigenvalue = None
        self.psi_star = None
        self.psi_sharp = None
        self.bordering = None
        self._A = None
        self._lu_cache = {}
        self._lu_lock = threading.Lock()

    # ------------------------------------------------------------------
    # linear operator
    # ------------------------------------------------------------------
    @property
    def size(self) -> int:
        return NCOMP * self.nx

    def matrix(self) -> sp.csr_matrix:
        raise NotImplementedError

    @property
    def A(self) -> sp.csr_matrix:
        if self._A is None:
            self._A = sp.csr_matrix(self.matrix())
        return self._A

    def apply_A(self, u):
        u = np.asarray(u)
        flat = u.reshape(u.shape[:-2] + (self.size,))
        out = (self.A @ flat.reshape(-1, self.size).T).T
        return out.reshape(u.shape)

    def apply_A_c(self, u):
        """Complexified operator; identical to :meth:`apply_A` on real input."""
        return self.apply_A(np.asarray(u, dtype=complex))

    def apply_A_adjoint(self, u):
        """V-adjoint ``W⁻¹ Aᵀ W`` of the (real) operator."""
        u = np.asarray(u)
        w = self.weights.ravel()
        flat = u.reshape(-1, self.size) * w
        out = (self.A.T @ flat.T).T / w
        return out.reshape(u.shape)

    def shifted_matrix(self, z) -> sp.csc_matrix:
        """Sparse ``z I - A``."""
        return sp.csc_matrix(z * sp.identity(self.size, format="csc") - self.A.astype(complex))

    def _lu(self, mat, z):
        try:
            lu = spla.splu(sp.csc_matrix(mat))
        except RuntimeError as exc:
            raise SpectrumProximityError(f"shifted operator is singular at z={z}", z) from exc
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= SINGULAR_PIVOT_TOL * diag.max():
            raise SpectrumProximityError(
                f"z={z} is numerically in the spectrum (pivot ratio {diag.min() / diag.max():.2e})", z
            )
        return lu

    def _shifted_lu(self, z):
        """Cached factorization of ``z - A``; the cache is bounded and only memoizes."""
        key = complex(z)
        with self._lu_lock:
            lu = self._lu_cache.get(key)
        if lu is None:
            lu = self._lu(self.shifted_matrix(z), z)
            with self._lu_lock:
                if len(self._lu_cache) >= LU_CACHE_SIZE:
                    self._lu_cache.pop(next(iter(self._lu_cache)))
                self._lu_cache[key] = lu
        return lu

    def resolvent_solve(self, z, rhs):
        """Solve ``(z - A_c) w = rhs`` for one or more right-hand sides."""
        rhs = np.asarray(rhs, dtype=complex)
        lu = self._shifted_lu(z)
        flat = rhs.reshape(-1, self.size).T
        return lu.solve(np.ascontiguousarray(flat)).T.reshape(rhs.shape)

    def adjoint_resolvent_solve(self, z, rhs):
        """Solve ``(z - A_c^*) w = rhs`` with the V-adjoint."""
        rhs = np.asarray(rhs, dtype=complex)
        w = self.weights.ravel()
        adj = sp.diags(1.0 / w) @ self.A.T @ sp.diags(w)
        mat = z * sp.identity(self.size) - adj.astype(complex)
        lu = self._lu(mat, z)
        flat = rhs.reshape(-1, self.size).T
        return lu.solve(np.ascontiguousarray(flat)).T.reshape(rhs.shape)

    # ------------------------------------------------------------------
    # inner products
    # ------------------------------------------------------------------
    def inner_V(self, x, y):
        """``(x, y)_V = Σ w x ȳ`` over the last two axes."""
        return np.sum(self.weights * np.asarray(x) * np.conj(np.asarray(y)), axis=(-2, -1))

    def norm_V_sq(self, x) -> float:
        x = np.asarray(x)
        return float(np.sum(self.weights * np.abs(x) ** 2))

    def norm_V(self, x) -> float:
        return float(np.sqrt(self.norm_V_sq(x)))

    def inner_U(self, x, y):
        """``(x, y)_U = (A x, A y)_V``, the polarization of ``‖u‖_U = ‖Au‖_V``."""
        return self.inner_V(self.apply_A(x), self.apply_A(y))

    def gram_U_vector(self, d) -> np.ndarray:
        """Flat ``g`` with ``(u, d)_U = g · u`` for real ``u``."""
        d = np.asarray(d, dtype=float)
        w = self.weights.ravel()
        return self.A.T @ (w * (self.A @ d.ravel()))

    # ------------------------------------------------------------------
    # nonlinearity hooks
    # ------------------------------------------------------------------
    def h_eval(self, lam, u):
        raise NotImplementedError

    def h_u_apply(self, lam, u, du):
        raise NotImplementedError

    def h_lambda(self, lam, u):
        """``∂h/∂λ`` at ``(λ, u)``."""
        raise NotImplementedError

    def h_lambda_u_apply(self, du):
        """Action of ``f⁰_{λu} = h_{λu}(0, 0)``."""
        raise NotImplementedError

    def h_u_local(self, lam, u_samples):
        """Entries of ``h_u(λ, u(t_s))`` on a fixed sparsity pattern.

        Returns ``(rows, cols, vals)`` with ``vals`` of shape ``(S, nnz)``.
        """
        raise NotImplementedError

    # ------------------------------------------------------------------
    # analytic data
    # ------------------------------------------------------------------
    def psi_star_guess(self):
        raise NotImplementedError

    def psi_sharp_guess(self):
        return self.psi_star_guess()

    def u_star(self, nt: int = DEFAULT_NT):
        self.require_prepared()
        return l1_embed(self.psi_star, nt)

    def require_prepared(self):
        if self.psi_star is None or self.bordering is None:
            raise SetupError(f"problem {self.name!r} is not prepared (call prepare())")

    def prepare(self):
        """Refine ``ψ★``, compute ``ψ#`` and the bordering vector ``d``."""
        from .conditions import find_adjoint_null_vector, find_critical_eigenpair

        mu, psi = find_critical_eigenpair(self)
        self.eigenvalue = mu
        self.psi_star = psi
        self.psi_sharp = find_adjoint_null_vector(self)
        prepare_bordering(self)
        return self

    def describe(self) -> dict:
        return {"name": self.name, "nx": self.nx}


def prepare_bordering(problem: EvolutionProblem):
    """Real ``d ∈ span{Re ψ★, Im ψ★}`` with ``(d, ψ★)_{U_c} = 1``; stored on the problem."""
    if problem.psi_star is None:
        raise SetupError("ψ★ must be computed before the bordering vector")
    p, q = problem.psi_star.real, problem.psi_star.imag
    g = np.array([
        [problem.inner_U(p, p), problem.inner_U(p, q)],
        [problem.inner_U(q, p), problem.inner_U(q, q)],
    ]).real
    det = np.linalg.det(g)
    if abs(det) <= 1e-12 * (g[0, 0] * g[1, 1]):
        raise DegeneracyError("Re ψ★ and Im ψ★ are linearly dependent in U")
    # (d, p)_U = 1, (d, q)_U = 0 with d = x p + y q
    x, y = np.linalg.solve(g, [1.0, 0.0])
    problem.bordering = x * p + y * q
    return problem.bordering


# ----------------------------------------------------------------------
# Example 1: heat-type system on the line, truncated to [-L, L]
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Example1Config:
    L: float = 30.0
    nx: int = 600

    def validate(self):
        if not self.L >= 20.0:
            raise ConfigError(f"example1 needs L >= 20 (got {self.L})")
        if int(self.nx) != self.nx or self.nx < 200:
            raise ConfigError(f"example1 needs integer nx >= 200 (got {self.nx})")


def ex1_rho(x):
    return (2.0 * np.tanh(x / 2.0) ** 2 - 1.0) / 4.0


def ex1_kappa(x):
    return 1.0 / np.cosh(x / 2.0)


class Example1Problem(EvolutionProblem):
    """``(φ, ψ) ↦ (φ'' - ψ - ρφ, ψ'' + φ - ρψ)`` with cubic ``u(λκ² - φ² - ψ²)``.

    Second-order central differences on the interior nodes of a uniform grid
    with homogeneous Dirichlet data at ``±L``; the V inner product is the
    trapezoidal rule on ``L² × L²``.
    """

    name = "example1"

    def __init__(self, cfg: Example1Config):
        cfg.validate()
        self.cfg = cfg
        nx = int(cfg.nx)
        self.h = 2.0 * cfg.L / (nx + 1)
        self.x = -cfg.L + self.h * np.arange(1, nx + 1)
        self.rho = ex1_rho(self.x)
        self.kappa = ex1_kappa(self.x)
        self.kappa2 = self.kappa ** 2
        super().__init__(nx, np.full((NCOMP, nx), self.h))

    def describe(self):
        return {"name": self.name, "L": float(self.cfg.L), "nx": self.nx}

    def _lap(self, f):
        out = -2.0 * f
        out[..., 1:] += f[..., :-1]
        out[..., :-1] += f[..., 1:]
        return out / self.h ** 2

    def apply_A(self, u):
        u = np.asarray(u)
        phi, psi = u[..., 0, :], u[..., 1, :]
        out = np.empty(np.broadcast(u, u).shape, dtype=np.result_type(u, float))
        out[..., 0, :] = self._lap(phi) - psi - self.rho * phi
        out[..., 1, :] = self._lap(psi) + phi - self.rho * psi
        return out

    def matrix(self):
        n = self.nx
        lap = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / self.h ** 2
        diag = lap - sp.diags(self.rho)
        eye = sp.identity(n)
        return sp.bmat([[diag, -eye], [eye, diag]], format="csr")

    def h_eval(self, lam, u):
        u = np.asarray(u, dtype=float)
        br = lam * self.kappa2 - u[..., 0, :] ** 2 - u[..., 1, :] ** 2
        return u * br[..., None, :]

    def h_u_apply(self, lam, u, du):
        u = np.asarray(u, dtype=float)
        du = np.asarray(du)
        br = lam * self.kappa2 - u[..., 0, :] ** 2 - u[..., 1, :] ** 2
        dot = u[..., 0, :] * du[..., 0, :] + u[..., 1, :] * du[..., 1, :]
        return du * br[..., None, :] - 2.0 * u * dot[..., None, :]

    def h_lambda(self, lam, u):
        return np.asarray(u) * self.kappa2

    def h_lambda_u_apply(self, du):
        return np.asarray(du) * self.kappa2

    def h_u_local(self, lam, u_samples):
        n = self.nx
        j = np.arange(n)
        rows = np.concatenate([j, j, n + j, n + j])
        cols = np.concatenate([j, n + j, j, n + j])
        u = np.asarray(u_samples, dtype=float)
        phi, psi = u[:, 0, :], u[:, 1, :]
        br = lam * self.kappa2 - phi ** 2 - psi ** 2
        vals = np.concatenate([br - 2 * phi ** 2, -2 * phi * psi, -2 * phi * psi, br - 2 * psi ** 2], axis=1)
        return rows, cols, vals

    def psi_star_guess(self):
        return np.array([self.kappa, -1j * self.kappa])


def ex1_build(cfg: Example1Config = Example1Config(), prepare: bool = True) -> Example1Problem:
    p = Example1Problem(cfg)
    return p.prepare() if prepare else p


# ----------------------------------------------------------------------
# Example 2: FitzHugh-Nagumo-type system on (0, π), sine Galerkin
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Example2Config:
    nx: int = 64

    def validate(self):
        if int(self.nx) != self.nx or self.nx < 8:
            raise ConfigError(f"example2 needs integer nx >= 8 (got {self.nx})")


class Example2Problem(EvolutionProblem):
    """``(u, v) ↦ (v - u, v_xx - 2u + 2v)`` in the sine basis, ``V = H¹₀ × L²``.

    State arrays hold sine coefficients ``u_n, v_n`` for ``n = 1..nx``.  The
    cubic ``(0, u(λ sin²x - 2u² + 2uv - v²))`` is evaluated on a grid of
    ``3 nx + 1`` interior points and projected back with a type-I DST, which is
    alias-free for cubic products.
    """

    name = "example2"
    dense_nonlinearity = True

    def __init__(self, cfg: Example2Config):
        cfg.validate()
        self.cfg = cfg
        nx = int(cfg.nx)
        self.modes = np.arange(1, nx + 1)
        w = np.empty((NCOMP, nx))
        w[0] = 0.5 * np.pi * self.modes ** 2
        w[1] = 0.5 * np.pi
        super().__init__(nx, w)
        self.ngrid = 3 * nx + 1
        self.xgrid = np.pi * np.arange(1, self.ngrid + 1) / (self.ngrid + 1)
        self.sin2 = np.sin(self.xgrid) ** 2

    def describe(self):
        return {"name": self.name, "nx": self.nx}

    # sine series <-> grid values
    def to_grid(self, c):
        c = np.asarray(c, dtype=float)
        pad = np.zeros(c.shape[:-1] + (self.ngrid,))
        pad[..., : self.nx] = c
        return 0.5 * scipy.fft.dst(pad, type=1, axis=-1)

    def from_grid(self, g):
        return scipy.fft.idst(2.0 * np.asarray(g, dtype=float), type=1, axis=-1)[..., : self.nx]

    def apply_A(self, u):
        u = np.asarray(u)
        out = np.empty(u.shape, dtype=np.result_type(u, float))
        out[..., 0, :] = u[..., 1, :] - u[..., 0, :]
        out[..., 1, :] = -2.0 * u[..., 0, :] + (2.0 - self.modes ** 2) * u[..., 1, :]
        return out

    def matrix(self):
        n = self.nx
        eye = sp.identity(n)
        return sp.bmat([[-eye, eye], [-2.0 * eye, sp.diags(2.0 - self.modes ** 2.0)]], format="csr")

    def resolvent_solve(self, z, rhs):
        """Per-mode closed-form inverse of the 2×2 blocks ``z - A_n``."""
        rhs = np.asarray(rhs, dtype=complex)
        n2 = self.modes ** 2
        det = (z + 1.0) * (z - 2.0 + n2) + 2.0
        scale = (1.0 + abs(z)) * (1.0 + abs(z) + n2)
        bad = np.abs(det) <= SINGULAR_PIVOT_TOL * scale
        if np.any(bad):
            m = int(self.modes[np.argmax(bad)])
            raise SpectrumProximityError(f"z={z} is an eigenvalue of the mode-{m} block", z)
        ru, rv = rhs[..., 0, :], rhs[..., 1, :]
        out = np.empty_like(rhs)
        out[..., 0, :] = ((z - 2.0 + n2) * ru + rv) / det
        out[..., 1, :] = (-2.0 * ru + (z + 1.0) * rv) / det
        return out

    def _bracket(self, lam, ug, vg):
        return lam * self.sin2 - 2.0 * ug ** 2 + 2.0 * ug * vg - vg ** 2

    def h_eval(self, lam, u):
        u = np.asarray(u, dtype=float)
        ug, vg = self.to_grid(u[..., 0, :]), self.to_grid(u[..., 1, :])
        out = np.zeros(u.shape)
        out[..., 1, :] = self.from_grid(ug * self._bracket(lam, ug, vg))
        return out

    def h_u_apply(self, lam, u, du):
        u = np.asarray(u, dtype=float)
        du = np.asarray(du, dtype=float)
        ug, vg = self.to_grid(u[..., 0, :]), self.to_grid(u[..., 1, :])
        dug, dvg = self.to_grid(du[..., 0, :]), self.to_grid(du[..., 1, :])
        dbr = -4.0 * ug * dug + 2.0 * (dug * vg + ug * dvg) - 2.0 * vg * dvg
        out = np.zeros(np.broadcast(u, du).shape)
        out[..., 1, :] = self.from_grid(dug * self._bracket(lam, ug, vg) + ug * dbr)
        return out

    def h_lambda(self, lam, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        out[..., 1, :] = self.from_grid(self.sin2 * self.to_grid(u[..., 0, :]))
        return out

    def h_lambda_u_apply(self, du):
        du = np.asarray(du)
        if np.iscomplexobj(du):
            return self.h_lambda(0.0, du.real) + 1j * self.h_lambda(0.0, du.imag)
        return self.h_lambda(0.0, du)

    def _synthesis(self):
        return np.sin(np.outer(self.xgrid, self.modes))

    def h_u_local(self, lam, u_samples):
        n = self.nx
        rows = np.repeat(n + np.arange(n), 2 * n)
        cols = np.tile(np.arange(2 * n), n)
        s = self._synthesis()
        q = (2.0 / (self.ngrid + 1)) * s.T
        u = np.asarray(u_samples, dtype=float)
        ug, vg = u[:, 0, :] @ s.T, u[:, 1, :] @ s.T
        du_coef = self._bracket(lam, ug, vg) + ug * (-4.0 * ug + 2.0 * vg)
        dv_coef = ug * (2.0 * ug - 2.0 * vg)
        mu = np.einsum("ig,sg,gj->sij", q, du_coef, s)
        mv = np.einsum("ig,sg,gj->sij", q, dv_coef, s)
        vals = np.concatenate([mu, mv], axis=2).reshape(u.shape[0], -1)
        return rows, cols, vals

    def psi_star_guess(self):
        g = np.zeros((NCOMP, self.nx), dtype=complex)
        g[0, 0] = 1.0
        g[1, 0] = 1.0 + 1.0j
        return g

    def psi_sharp_guess(self):
        # null vector of (i - A_c)^*: ((1+i) sin x, -sin x)
        g = np.zeros((NCOMP, self.nx), dtype=complex)
        g[0, 0] = 1.0 + 1.0j
        g[1, 0] = -1.0
        return g


def ex2_build(cfg: Example2Config = Example2Config(), prepare: bool = True) -> Example2Problem:
    p = Example2Problem(cfg)
    return p.prepare() if prepare else p


def build_problem(name: str, **overrides) -> EvolutionProblem:
    """Build and prepare a named example; ``overrides`` are config fields."""
    if name == "example1":
        return ex1_build(Example1Config(**overrides))
    if name == "example2":
        return ex2_build(Example2Config(**overrides))
    raise ConfigError(f"unknown problem {name!r} (expected example1 or example2)")


def exact_branch(problem: EvolutionProblem, alpha: float, nt: int = DEFAULT_NT) -> BranchPoint:
    """Closed-form branch ``λ = α², σ = 0, u = α u★`` with ``η ≡ 0``."""
    if alpha < 0:
        raise ValueError("exact_branch needs alpha >= 0")
    from .extended import residual_g
    from .spacetime import norm_Y
    from .states import ExtendedState

    u = l1_embed(problem.psi_star_guess(), nt) * alpha
    lam = alpha ** 2
    res = norm_Y(problem, residual_g(problem, ExtendedState(lam, 0.0, u)))
    return BranchPoint(alpha, lam, 0.0, u, eta_norm=0.0, g_residual=res, newton_iters=0,
                       eta=u * 0.0)
