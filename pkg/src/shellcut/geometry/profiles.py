"""Meridian profiles of axisymmetric convex bodies.

A body of revolution about the z-axis is described by its meridian section in
the (rho, z) half-plane. Every profile exposes its boundary parametrized by the
outward normal angle ``theta`` in [0, pi], measured from the +z axis, so that the
normal is ``u(theta) = (sin theta, cos theta)``:

* ``point(theta, side)`` is the support point (the boundary point with outward
  normal ``u(theta)``). Where the boundary has a flat piece the support point
  jumps; ``side=-1`` / ``side=+1`` select the one-sided limits.
* ``curvature_radius(theta)`` is the radius of curvature ``h + h''`` on the
  smooth parts of the boundary (zero along polygon vertices).
* ``breakpoints`` lists the normal angles of the flat pieces.

With this representation Minkowski combinations and outer parallel bodies are
pointwise arithmetic, and the boundary integrals needed for volume and
perimeter are exact up to quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import NonConvexProfile

__all__ = [
    "MeridianProfile",
    "Ball",
    "Spheroid",
    "Polyline",
    "MinkowskiBlend",
    "Parallel",
    "InnerParallel",
    "profile_from_dict",
    "normal",
]


def normal(theta):
    theta = np.asarray(theta, dtype=float)
    return np.sin(theta), np.cos(theta)


class MeridianProfile:
    """Base class; subclasses are frozen dataclasses."""

    kind = "abstract"

    def point(self, theta, side: int = -1):
        raise NotImplementedError

    def curvature_radius(self, theta):
        raise NotImplementedError

    @property
    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def support(self, theta, side: int = -1):
        rho, z = self.point(theta, side)
        s, c = normal(theta)
        return rho * s + z * c

    def scaled(self, factor: float) -> "MeridianProfile":
        raise NotImplementedError

    def translated(self, dz: float) -> "MeridianProfile":
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def is_smooth(self) -> bool:
        return self.breakpoints.size == 0


@dataclass(frozen=True)
class Ball(MeridianProfile):
    center_z: float
    radius: float
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise NonConvexProfile(f"ball radius must be positive, got {self.radius}")

    def point(self, theta, side=-1):
        s, c = normal(theta)
        return self.radius * s, self.center_z + self.radius * c

    def curvature_radius(self, theta):
        return np.full(np.shape(theta), float(self.radius))

    def scaled(self, factor):
        return Ball(self.center_z * factor, self.radius * factor)

    def translated(self, dz):
        return Ball(self.center_z + dz, self.radius)

    def to_dict(self):
        return {"kind": "ball", "center_z": self.center_z, "radius": self.radius}


@dataclass(frozen=True)
class Spheroid(MeridianProfile):
    """Ellipse ``rho^2/a^2 + (z - c)^2/b^2 <= 1`` revolved about the axis."""

    center_z: float
    semi_axis_rho: float
    semi_axis_z: float
    kind = "spheroid"

    def __post_init__(self):
        if not (self.semi_axis_rho > 0 and self.semi_axis_z > 0):
            raise NonConvexProfile("spheroid semi-axes must be positive")

    def _h(self, theta):
        s, c = normal(theta)
        a, b = self.semi_axis_rho, self.semi_axis_z
        return np.sqrt(a * a * s * s + b * b * c * c)

    def point(self, theta, side=-1):
        s, c = normal(theta)
        a, b = self.semi_axis_rho, self.semi_axis_z
        h = self._h(theta)
        return a * a * s / h, self.center_z + b * b * c / h

    def curvature_radius(self, theta):
        a, b = self.semi_axis_rho, self.semi_axis_z
        return (a * b) ** 2 / self._h(theta) ** 3

    def scaled(self, factor):
        return Spheroid(self.center_z * factor, self.semi_axis_rho * factor,
                        self.semi_axis_z * factor)

    def translated(self, dz):
        return Spheroid(self.center_z + dz, self.semi_axis_rho, self.semi_axis_z)

    def to_dict(self):
        return {"kind": "spheroid", "center_z": self.center_z,
                "semi_axis_rho": self.semi_axis_rho, "semi_axis_z": self.semi_axis_z}


def _cross(d1, d2):
    return d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]


@dataclass(frozen=True, eq=False)
class Polyline(MeridianProfile):
    """Convex polygonal meridian running from the axis back to the axis.

    Vertices are reordered top to bottom, collinear and repeated vertices are
    dropped. Convexity of the mirrored closed curve is checked with a
    tolerance of ``1e-10 * diameter``.
    """

    vertices: np.ndarray
    normals: np.ndarray = field(init=False, repr=False)
    kind = "polyline"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if v.shape[0] < 2:
            raise NonConvexProfile("polyline needs at least two vertices")
        diam = float(np.ptp(v[:, 1]) + 2 * v[:, 0].max()) or 1.0
        tol = 1e-10 * diam
        if abs(v[0, 0]) > tol or abs(v[-1, 0]) > tol:
            raise NonConvexProfile("polyline must start and end on the axis")
        if (v[:, 0] < -tol).any():
            raise NonConvexProfile("polyline has vertices with rho < 0")
        v[:, 0] = np.maximum(v[:, 0], 0.0)
        v[0, 0] = v[-1, 0] = 0.0
        if v[0, 1] < v[-1, 1]:
            v = v[::-1].copy()
        v = _simplify(v, tol)
        if v.shape[0] < 3:
            raise NonConvexProfile("polyline encloses no area")
        d = np.diff(v, axis=0)
        turns = _cross(d[:-1], d[1:])
        # clockwise traversal in (rho, z): every turn is to the right
        if (turns > tol * diam).any():
            raise NonConvexProfile("polyline is not convex")
        if d[0, 1] > tol or d[-1, 1] > tol:
            raise NonConvexProfile("polyline is not convex at the axis")
        theta = np.arctan2(0.0 - d[:, 1], d[:, 0])
        # a bottom edge with round-off dz > 0 lands at -pi; it belongs at +pi
        theta = np.where(theta < -0.5 * math.pi, theta + 2 * math.pi, theta)
        theta = np.clip(theta, 0.0, math.pi)
        if (np.diff(theta) < -1e-12).any():
            raise NonConvexProfile("polyline winds more than once")
        v.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normals", theta)

    def point(self, theta, side=-1):
        idx = np.searchsorted(self.normals, theta, side="left" if side < 0 else "right")
        p = self.vertices[idx]
        return p[..., 0], p[..., 1]

    def curvature_radius(self, theta):
        return np.zeros(np.shape(theta))

    @property
    def breakpoints(self):
        return self.normals

    def scaled(self, factor):
        return Polyline(self.vertices * factor)

    def translated(self, dz):
        return Polyline(self.vertices + np.array([0.0, dz]))

    def to_dict(self):
        return {"kind": "polyline", "vertices": self.vertices.tolist()}

    def __eq__(self, other):
        return isinstance(other, Polyline) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())


def _simplify(v, tol):
    keep = [v[0]]
    for p in v[1:]:
        if np.hypot(*(p - keep[-1])) > tol:
            keep.append(p)
    v = np.array(keep)
    changed = True
    while changed and v.shape[0] > 2:
        changed = False
        d = np.diff(v, axis=0)
        turns = _cross(d[:-1], d[1:])
        dots = (d[:-1] * d[1:]).sum(axis=1)
        lens = np.hypot(d[:, 0], d[:, 1])
        flat = np.abs(turns) <= tol * np.maximum(lens[:-1], lens[1:])
        flat &= dots > 0
        if flat.any():
            i = int(np.argmax(flat)) + 1
            v = np.delete(v, i, axis=0)
            changed = True
    return v


@dataclass(frozen=True)
class MinkowskiBlend(MeridianProfile):
    """``weight * left + (1 - weight) * right`` in the Minkowski sense."""

    left: MeridianProfile
    right: MeridianProfile
    weight: float
    kind = "blend"

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"blend weight must lie in [0, 1], got {self.weight}")

    def point(self, theta, side=-1):
        t = self.weight
        r1, z1 = self.left.point(theta, side)
        r2, z2 = self.right.point(theta, side)
        return t * r1 + (1 - t) * r2, t * z1 + (1 - t) * z2

    def curvature_radius(self, theta):
        t = self.weight
        return t * self.left.curvature_radius(theta) + (1 - t) * self.right.curvature_radius(theta)

    @property
    def breakpoints(self):
        parts = []
        if self.weight > 0:
            parts.append(self.left.breakpoints)
        if self.weight < 1:
            parts.append(self.right.breakpoints)
        return np.unique(np.concatenate(parts)) if parts else np.empty(0)

    def scaled(self, factor):
        return MinkowskiBlend(self.left.scaled(factor), self.right.scaled(factor), self.weight)

    def translated(self, dz):
        return MinkowskiBlend(self.left.translated(dz), self.right.translated(dz), self.weight)

    def to_dict(self):
        return {"kind": "blend", "left": self.left.to_dict(),
                "right": self.right.to_dict(), "weight": self.weight}


@dataclass(frozen=True)
class Parallel(MeridianProfile):
    """Outer parallel body ``base + offset * B``."""

    base: MeridianProfile
    offset: float
    kind = "parallel"

    def point(self, theta, side=-1):
        r, z = self.base.point(theta, side)
        s, c = normal(theta)
        return r + self.offset * s, z + self.offset * c

    def curvature_radius(self, theta):
        return self.base.curvature_radius(theta) + self.offset

    @property
    def breakpoints(self):
        return self.base.breakpoints

    def scaled(self, factor):
        return Parallel(self.base.scaled(factor), self.offset * factor)

    def translated(self, dz):
        return Parallel(self.base.translated(dz), self.offset)

    def to_dict(self):
        return {"kind": "parallel", "base": self.base.to_dict(), "offset": self.offset}


@dataclass(frozen=True)
class InnerParallel(MeridianProfile):
    """Inner parallel body of a smooth profile whose curvature radius exceeds ``depth``.

    Only valid when the eroded boundary is the normal offset of the original
    one; ``measures.inner_parallel`` decides when that holds.
    """

    base: MeridianProfile
    depth: float
    kind = "inner_parallel"

    def point(self, theta, side=-1):
        r, z = self.base.point(theta, side)
        s, c = normal(theta)
        return r - self.depth * s, z - self.depth * c

    def curvature_radius(self, theta):
        return self.base.curvature_radius(theta) - self.depth

    @property
    def breakpoints(self):
        return self.base.breakpoints

    def scaled(self, factor):
        return InnerParallel(self.base.scaled(factor), self.depth * factor)

    def translated(self, dz):
        return InnerParallel(self.base.translated(dz), self.depth)

    def to_dict(self):
        return {"kind": "inner_parallel", "base": self.base.to_dict(), "depth": self.depth}


_FIELDS = {
    "ball": {"kind", "center_z", "radius"},
    "spheroid": {"kind", "center_z", "semi_axis_rho", "semi_axis_z"},
    "polyline": {"kind", "vertices"},
    "blend": {"kind", "left", "right", "weight"},
    "parallel": {"kind", "base", "offset"},
    "inner_parallel": {"kind", "base", "depth"},
}


def profile_from_dict(data: dict[str, Any]) -> MeridianProfile:
    """Inverse of ``to_dict``; unknown or missing keys raise ``ValueError``."""
    kind = data.get("kind")
    if kind not in _FIELDS:
        raise ValueError(f"unknown profile kind {kind!r}")
    keys = set(data)
    if keys != _FIELDS[kind]:
        extra, missing = keys - _FIELDS[kind], _FIELDS[kind] - keys
        raise ValueError(f"profile {kind!r}: unexpected {sorted(extra)}, missing {sorted(missing)}")
    if kind == "ball":
        return Ball(float(data["center_z"]), float(data["radius"]))
    if kind == "spheroid":
        return Spheroid(float(data["center_z"]), float(data["semi_axis_rho"]),
                        float(data["semi_axis_z"]))
    if kind == "polyline":
        return Polyline(np.asarray(data["vertices"], dtype=float))
    if kind == "blend":
        return MinkowskiBlend(profile_from_dict(data["left"]), profile_from_dict(data["right"]),
                              float(data["weight"]))
    if kind == "parallel":
        return Parallel(profile_from_dict(data["base"]), float(data["offset"]))
    return InnerParallel(profile_from_dict(data["base"]), float(data["depth"]))
