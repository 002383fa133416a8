"""Doubly connected axisymmetric domains and the class-S constraint."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.optimize import brentq

from ..errors import DegenerateShell, NoSignChange, NotNested
from .measures import (
    _theta_grid,
    diameter,
    mean_width_quermass,
    perimeter,
    unit_ball_volume,
    volume,
)
from .profiles import MeridianProfile, MinkowskiBlend, profile_from_dict

__all__ = [
    "AxiDomain",
    "gap",
    "class_residual",
    "find_class_member",
    "matched_shell_radii",
    "concentric_shell",
]


def gap(outer: MeridianProfile, inner: MeridianProfile) -> float:
    """Distance between the boundaries, ``min (h_out - h_in)``; negative if not nested."""
    th = np.unique(np.concatenate([_theta_grid(outer), inner.breakpoints]))
    lo = np.minimum(outer.support(th, -1) - inner.support(th, -1),
                    outer.support(th, +1) - inner.support(th, +1))
    return float(lo.min())


@dataclass(frozen=True)
class AxiDomain:
    n: int
    outer: MeridianProfile
    inner: MeridianProfile

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        if not gap(self.outer, self.inner) > 0:
            raise NotNested("inner profile is not strictly inside the outer profile")

    @property
    def gap(self) -> float:
        return gap(self.outer, self.inner)

    @property
    def regularity(self) -> str:
        """``"C11"`` for smooth profiles, otherwise a flag that corners break the C^{1,1} hypothesis."""
        if self.outer.is_smooth and self.inner.is_smooth:
            return "C11"
        return "outside stated regularity"

    @property
    def diameter(self) -> float:
        return diameter(self.outer)

    def volume(self) -> float:
        return volume(self.outer, self.n) - volume(self.inner, self.n)

    def translated(self, dz: float) -> "AxiDomain":
        return AxiDomain(self.n, self.outer.translated(dz), self.inner.translated(dz))

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AxiDomain":
        return cls(int(data["n"]), profile_from_dict(data["outer"]), profile_from_dict(data["inner"]))


def concentric_shell(n: int, r1: float, r2: float, center_z: float = 0.0) -> AxiDomain:
    from .profiles import Ball

    return AxiDomain(n, Ball(center_z, r2), Ball(center_z, r1))


def _residual(n, outer, inner):
    om = unit_ball_volume(n)
    vol = (volume(outer, n) - volume(inner, n)) / om
    p_term = (perimeter(outer, n) / (n * om)) ** (n / (n - 1))
    w_term = (mean_width_quermass(inner, n) / om) ** n
    return vol - p_term + w_term


def class_residual(domain: AxiDomain) -> float:
    """``|Omega|/w_n - (P(out)/(n w_n))^{n/(n-1)} + (W_{n-1}(in)/w_n)^n``; zero on class S."""
    return _residual(domain.n, domain.outer, domain.inner)


def _contains(big: MeridianProfile, small: MeridianProfile) -> bool:
    return gap(big, small) > 0


def find_class_member(b_in: MeridianProfile, omega_in: MeridianProfile,
                      omega_out: MeridianProfile, b_out: MeridianProfile, n: int,
                      tol: float = 1e-10):
    """Root of the class-S residual along ``(a, b) = (t, 1 - t)``.

    The outer body is ``a B_out + (1-a) Omega_out`` and the inner body
    ``b B_in + (1-b) Omega_in``. Returns ``(a, b, domain)``; if the residual
    vanishes at both ends the midpoint ``t = 0.5`` is returned.
    """
    for big, small, name in ((omega_in, b_in, "B_in in Omega_in"),
                             (omega_out, omega_in, "Omega_in in Omega_out"),
                             (b_out, omega_out, "Omega_out in B_out")):
        if not _contains(big, small):
            raise NotNested(f"containment {name} fails")

    def bodies(t):
        return MinkowskiBlend(b_out, omega_out, t), MinkowskiBlend(b_in, omega_in, 1.0 - t)

    def f(t):
        outer, inner = bodies(t)
        return _residual(n, outer, inner)

    f0, f1 = f(0.0), f(1.0)  # f(a=0, b=1) and f(a=1, b=0)
    scale = max(1.0, abs(f0), abs(f1))
    if abs(f0) <= tol * scale and abs(f1) <= tol * scale:
        t = 0.5
    else:
        if not (f0 < 0 < f1):
            raise NoSignChange(f"expected f(0,1) < 0 < f(1,0), got {f0:.6g}, {f1:.6g}")
        t = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    outer, inner = bodies(t)
    res = _residual(n, outer, inner)
    if abs(res) > tol * scale:
        raise NoSignChange(f"bisection stalled with residual {res:.3e}")
    return t, 1.0 - t, AxiDomain(n, outer, inner)


def matched_shell_radii(domain: AxiDomain, rule: str = "main") -> tuple[float, float]:
    """Radii of the comparison shell.

    ``main``: perimeter of the outer body and W_{n-1} of the inner body.
    ``dpp``: W_{n-1} of the inner body and the volume of the domain.
    ``ppt``: perimeter of the outer body and the volume of the domain.
    """
    n = domain.n
    om = unit_ball_volume(n)
    rule = rule.lower()
    if rule == "main":
        r2 = (perimeter(domain.outer, n) / (n * om)) ** (1.0 / (n - 1))
        r1 = mean_width_quermass(domain.inner, n) / om
    elif rule == "dpp":
        r1 = mean_width_quermass(domain.inner, n) / om
        r2 = (r1 ** n + domain.volume() / om) ** (1.0 / n)
    elif rule == "ppt":
        r2 = (perimeter(domain.outer, n) / (n * om)) ** (1.0 / (n - 1))
        rest = r2 ** n - domain.volume() / om
        if rest <= 0:
            raise DegenerateShell("domain volume exceeds the ball matching the outer perimeter")
        r1 = rest ** (1.0 / n)
    else:
        raise ValueError(f"unknown matching rule {rule!r}")
    if not 0 < r1 < r2:
        raise DegenerateShell(f"matched radii ({r1}, {r2}) are not ordered")
    return float(r1), float(r2)


def shell_volume(n: int, r1: float, r2: float) -> float:
    return unit_ball_volume(n) * (r2 ** n - r1 ** n)


def scale_of(domain: AxiDomain) -> float:
    return max(domain.diameter, math.ulp(1.0))
