"""2π-periodic two-component space-time fields as real trigonometric series.

A field is stored as cosine coefficients ``a[n, c, j]`` (``n = 0..nt``) and
sine coefficients ``b[n, c, j]`` (``b[0]`` is identically zero), where ``c``
indexes the two state components and ``j`` the spatial degrees of freedom of
the owning problem.  Complex spatial vectors (elements of the complexified
state space) are plain complex arrays of shape ``(2, nx)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

NCOMP = 2
DEFAULT_NT = 8
TOL_MODE = 1e-9


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Real trigonometric space-time field ``Σ a_n cos nt + b_n sin nt``.

    Parameters
    ----------
    a : ndarray, shape (nt + 1, 2, nx)
        Cosine coefficients.
    b : ndarray, shape (nt + 1, 2, nx)
        Sine coefficients; ``b[0]`` must vanish.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a)
        b = _frozen(self.b)
        if a.ndim != 3 or a.shape[1] != NCOMP:
            raise ValueError(f"cosine coefficients must have shape (nt+1, 2, nx), got {a.shape}")
        if b.shape != a.shape:
            raise ValueError(f"sine coefficients shape {b.shape} != cosine shape {a.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("field coefficients must be finite")
        if np.any(b[0] != 0.0):
            raise ValueError("mode-0 sine coefficients must be zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    # -- shape -----------------------------------------------------------
    @property
    def nt(self) -> int:
        return self.a.shape[0] - 1

    @property
    def nx(self) -> int:
        return self.a.shape[2]

    @property
    def ncomp(self) -> int:
        return NCOMP

    @property
    def size(self) -> int:
        """Number of real degrees of freedom (``(2 nt + 1) * 2 * nx``)."""
        return (2 * self.nt + 1) * NCOMP * self.nx

    # -- constructors ----------------------------------------------------
    @classmethod
    def zeros(cls, nt: int, nx: int) -> "SpaceTimeField":
        z = np.zeros((nt + 1, NCOMP, nx))
        return cls(z, z)

    @classmethod
    def from_modes(cls, nt: int, nx: int, cos=None, sin=None) -> "SpaceTimeField":
        """Build a field from ``{n: spatial array}`` dictionaries."""
        a = np.zeros((nt + 1, NCOMP, nx))
        b = np.zeros((nt + 1, NCOMP, nx))
        for n, v in (cos or {}).items():
            a[n] = v
        for n, v in (sin or {}).items():
            if n == 0:
                raise ValueError("sin(0 t) vanishes; no mode-0 sine coefficient")
            b[n] = v
        return cls(a, b)

    @classmethod
    def constant(cls, v, nt: int) -> "SpaceTimeField":
        v = np.asarray(v, dtype=float)
        a = np.zeros((nt + 1,) + v.shape)
        a[0] = v
        return cls(a, np.zeros_like(a))

    # -- algebra ---------------------------------------------------------
    def _check_compatible(self, other: "SpaceTimeField"):
        if self.a.shape != other.a.shape:
            raise ValueError(f"incompatible fields {self.a.shape} vs {other.a.shape}")

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return SpaceTimeField(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        self._check_compatible(other)
        return SpaceTimeField(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "SpaceTimeField":
        return SpaceTimeField(-self.a, -self.b)

    def __mul__(self, s: float) -> "SpaceTimeField":
        return SpaceTimeField(self.a * s, self.b * s)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "SpaceTimeField":
        return SpaceTimeField(self.a / s, self.b / s)

    def map_spatial(self, op) -> "SpaceTimeField":
        """Apply a real linear spatial operator to every temporal coefficient."""
        return SpaceTimeField(op(self.a), op(self.b))

    def resized(self, nt: int) -> "SpaceTimeField":
        """Truncate or zero-pad to ``nt`` temporal modes."""
        a = np.zeros((nt + 1, NCOMP, self.nx))
        b = np.zeros_like(a)
        m = min(nt, self.nt) + 1
        a[:m] = self.a[:m]
        b[:m] = self.b[:m]
        return SpaceTimeField(a, b)

    def max_abs_diff(self, other: "SpaceTimeField") -> float:
        self._check_compatible(other)
        return float(max(np.max(np.abs(self.a - other.a)), np.max(np.abs(self.b - other.b))))

    # -- flat real vectors -------------------------------------------------
    def to_vector(self) -> np.ndarray:
        """Pack as ``[a_0, a_1, b_1, ..., a_nt, b_nt]`` each flattened ``[c][j]``."""
        parts = [self.a[0].ravel()]
        for n in range(1, self.nt + 1):
            parts.append(self.a[n].ravel())
            parts.append(self.b[n].ravel())
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, v, nt: int, nx: int) -> "SpaceTimeField":
        v = np.asarray(v, dtype=float)
        s = NCOMP * nx
        if v.shape != ((2 * nt + 1) * s,):
            raise ValueError(f"vector length {v.shape} does not match nt={nt}, nx={nx}")
        blocks = v.reshape(2 * nt + 1, NCOMP, nx)
        a = np.zeros((nt + 1, NCOMP, nx))
        b = np.zeros_like(a)
        a[0] = blocks[0]
        a[1:] = blocks[1::2]
        b[1:] = blocks[2::2]
        return cls(a, b)

    # -- time domain -------------------------------------------------------
    def n_samples(self) -> int:
        return 2 * self.nt + 1

    def sample_times(self) -> np.ndarray:
        n = self.n_samples()
        return 2.0 * np.pi * np.arange(n) / n

    def samples(self) -> np.ndarray:
        """Values on ``2 nt + 1`` equispaced times, shape ``(N, 2, nx)``."""
        n = self.n_samples()
        spec = np.empty(self.a.shape, dtype=complex)
        spec[0] = self.a[0] * n
        spec[1:] = (self.a[1:] - 1j * self.b[1:]) * (n / 2.0)
        return np.fft.irfft(spec, n=n, axis=0)

    @classmethod
    def from_samples(cls, vals, nt: int) -> "SpaceTimeField":
        """Trigonometric interpolation of ``2 nt + 1`` equispaced samples."""
        vals = np.asarray(vals, dtype=float)
        n = 2 * nt + 1
        if vals.shape[0] != n:
            raise ValueError(f"expected {n} samples, got {vals.shape[0]}")
        spec = np.fft.rfft(vals, axis=0)
        a = np.empty((nt + 1,) + vals.shape[1:])
        b = np.zeros_like(a)
        a[0] = spec[0].real / n
        a[1:] = 2.0 * spec[1:].real / n
        b[1:] = -2.0 * spec[1:].imag / n
        return cls(a, b)

    def evaluate(self, t: float) -> np.ndarray:
        """Field value at time ``t``, shape ``(2, nx)``."""
        n = np.arange(self.nt + 1)
        c = np.cos(n * t)[:, None, None]
        s = np.sin(n * t)[:, None, None]
        return np.sum(self.a * c + self.b * s, axis=0)

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        """Flat JSON layout; ``b`` omits the identically-zero mode 0."""
        return {
            "ncomp": NCOMP,
            "nt": self.nt,
            "nx": self.nx,
            "a": self.a.ravel().tolist(),
            "b": self.b[1:].ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpaceTimeField":
        ncomp, nt, nx = int(obj["ncomp"]), int(obj["nt"]), int(obj["nx"])
        if ncomp != NCOMP:
            raise ValueError(f"only {NCOMP}-component fields are supported, got {ncomp}")
        a = np.asarray(obj["a"], dtype=float).reshape(nt + 1, NCOMP, nx)
        b = np.zeros_like(a)
        b[1:] = np.asarray(obj["b"], dtype=float).reshape(nt, NCOMP, nx)
        return cls(a, b)


@dataclass(frozen=True, eq=False)
class FrequencySplit:
    """Three-way split into mode 0, mode 1 and the high modes ``|n| >= 2``."""

    low0: SpaceTimeField
    low1: SpaceTimeField
    high: SpaceTimeField

    def total(self) -> SpaceTimeField:
        return self.low0 + self.low1 + self.high


def fourier_coefficient(u: SpaceTimeField, n: int) -> np.ndarray:
    """``(1/2π) ∫ e^{-int} u(t) dt`` computed exactly from the coefficients."""
    if abs(n) > u.nt:
        raise IndexError(f"mode {n} outside the representable range |n| <= {u.nt}")
    if n == 0:
        return u.a[0].astype(complex)
    m = abs(n)
    c = 0.5 * (u.a[m] - 1j * u.b[m])
    return c if n > 0 else np.conj(c)


def split_frequencies(u: SpaceTimeField) -> FrequencySplit:
    a0 = np.zeros_like(u.a)
    a0[0] = u.a[0]
    a1 = np.zeros_like(u.a)
    b1 = np.zeros_like(u.b)
    if u.nt >= 1:
        a1[1] = u.a[1]
        b1[1] = u.b[1]
    ah = u.a.copy()
    bh = u.b.copy()
    ah[:2] = 0.0
    bh[:2] = 0.0
    zero = np.zeros_like(u.b)
    return FrequencySplit(
        SpaceTimeField(a0, zero), SpaceTimeField(a1, b1), SpaceTimeField(ah, bh)
    )


def l1_embed(psi, nt: int = DEFAULT_NT) -> SpaceTimeField:
    """Real part of ``psi ⊗ e^{it}``: cosine part ``Re psi``, sine part ``-Im psi``."""
    psi = np.asarray(psi, dtype=complex)
    a = np.zeros((nt + 1,) + psi.shape)
    b = np.zeros_like(a)
    a[1] = psi.real
    b[1] = -psi.imag
    return SpaceTimeField(a, b)


def _off_mode_energy(u: SpaceTimeField, keep: int) -> float:
    scale = max(float(np.max(np.abs(u.a), initial=0.0)), float(np.max(np.abs(u.b), initial=0.0)))
    if scale == 0.0:
        return 0.0
    a, b = u.a / scale, u.b / scale
    inside = np.sum(a[keep] ** 2) + np.sum(b[keep] ** 2)
    outside = np.sum(np.delete(a, keep, axis=0) ** 2) + np.sum(np.delete(b, keep, axis=0) ** 2)
    return float(np.sqrt(outside / (inside + outside)))


def l1_inverse(u: SpaceTimeField, tol: float = TOL_MODE) -> np.ndarray:
    """Inverse of :func:`l1_embed` on mode-1 fields.

    Raises
    ------
    DomainError
        If the relative coefficient energy outside mode 1 exceeds ``tol``.
    """
    if u.nt < 1:
        raise DomainError("field has no mode-1 content", energy=1.0)
    off = _off_mode_energy(u, 1)
    if off > tol:
        raise DomainError(f"field is not mode-1 pure: relative off-mode energy {off:.3e}", energy=off)
    return u.a[1] - 1j * u.b[1]


def time_derivative(u: SpaceTimeField) -> SpaceTimeField:
    n = np.arange(u.nt + 1)[:, None, None]
    return SpaceTimeField(n * u.b, -n * u.a)


def translate(u: SpaceTimeField, theta: float) -> SpaceTimeField:
    """``(τ_θ u)(t) = u(t - θ)``; mode ``n`` rotates by ``nθ``."""
    n = np.arange(u.nt + 1)[:, None, None]
    c = np.cos(n * theta)
    s = np.sin(n * theta)
    s[0] = 0.0
    return SpaceTimeField(u.a * c - u.b * s, u.a * s + u.b * c)


def apply_T1(problem, w: SpaceTimeField, tol: float = TOL_MODE) -> SpaceTimeField:
    """``ẇ - A w`` on a mode-1 field ``w = a ⊗ cos + b ⊗ sin``."""
    if w.nt < 1:
        raise DomainError("field has no mode-1 content", energy=1.0)
    off = _off_mode_energy(w, 1)
    if off > tol:
        raise DomainError(f"apply_T1 needs a mode-1 field: off-mode energy {off:.3e}", energy=off)
    a, b = w.a[1], w.b[1]
    out_a = np.zeros_like(w.a)
    out_b = np.zeros_like(w.b)
    out_a[1] = b - problem.apply_A(a)
    out_b[1] = -(a + problem.apply_A(b))
    return SpaceTimeField(out_a, out_b)


def functional_l(problem, u: SpaceTimeField):
    """Bordering functionals ``(l¹u, l²u)``; only mode 1 contributes."""
    d = problem.bordering
    if u.nt < 1:
        return 0.0, 0.0
    return (
        float(np.real(problem.inner_U(u.a[1], d))),
        float(np.real(problem.inner_U(u.b[1], d))),
    )


def functional_l_rows(problem, nt: int) -> np.ndarray:
    """Dense ``(2, size)`` matrix of ``l`` acting on :meth:`SpaceTimeField.to_vector`."""
    s = NCOMP * problem.nx
    g = problem.gram_U_vector(problem.bordering)
    rows = np.zeros((2, (2 * nt + 1) * s))
    rows[0, s:2 * s] = g
    rows[1, 2 * s:3 * s] = g
    return rows


def norm_Y(problem, u: SpaceTimeField) -> float:
    """``L²((0, 2π), V)`` norm via Parseval."""
    v2 = problem.norm_V_sq
    tot = 2.0 * np.pi * v2(u.a[0])
    for n in range(1, u.nt + 1):
        tot += np.pi * (v2(u.a[n]) + v2(u.b[n]))
    return float(np.sqrt(tot))


def norm_X(problem, u: SpaceTimeField) -> float:
    """Norm of ``H¹_per(V) ∩ L²(U)``: ``‖u‖²_Y + ‖u_t‖²_Y + ‖A u‖²_Y``."""
    au = u.map_spatial(problem.apply_A)
    return float(np.sqrt(norm_Y(problem, u) ** 2 + norm_Y(problem, time_derivative(u)) ** 2
                         + norm_Y(problem, au) ** 2))


def norm_Y_samples(problem, u: SpaceTimeField) -> float:
    """Time-domain quadrature of ``∫ ‖u(t)‖²_V dt`` (exact for the stored degree)."""
    vals = u.samples()
    n = vals.shape[0]
    tot = sum(problem.norm_V_sq(v) for v in vals)
    return float(np.sqrt(2.0 * np.pi / n * tot))


def mode_one(u: SpaceTimeField) -> SpaceTimeField:
    return split_frequencies(u).low1


def assert_compatible(problem, u: SpaceTimeField, nt: Optional[int] = None):
    if u.nx != problem.nx:
        raise ValueError(f"field nx={u.nx} does not match problem nx={problem.nx}")
    if nt is not None and u.nt != nt:
        raise ValueError(f"field nt={u.nt} does not match expected nt={nt}")
