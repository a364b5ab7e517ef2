"""Plain state records passed between the extended-system and continuation code."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .spacetime import SpaceTimeField


@dataclass(frozen=True)
class ExtendedState:
    """Unknowns ``(Λ, u) = ((λ, σ), u)`` of the extended systems."""

    lam: float
    sigma: float
    u: SpaceTimeField

    def to_json(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "u": self.u.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ExtendedState":
        return cls(float(obj["lambda"]), float(obj["sigma"]), SpaceTimeField.from_json(obj["u"]))


@dataclass(frozen=True)
class BranchPoint:
    """One point ``(ζ(α), α u★ + α η(α))`` of the bifurcating branch."""

    alpha: float
    lam: float
    sigma: float
    u: SpaceTimeField
    eta_norm: float = 0.0
    g_residual: float = 0.0
    newton_iters: int = 0
    eta: Optional[SpaceTimeField] = None

    @property
    def zeta(self):
        return (self.lam, self.sigma)

    def state(self) -> ExtendedState:
        return ExtendedState(self.lam, self.sigma, self.u)
