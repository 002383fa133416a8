"""Volumes, perimeters, parallel bodies and quermassintegrals of meridian profiles.

All n-dimensional integrals reduce to integrals along the meridian boundary:

    |K|  = omega_{n-1} * int rho^{n-1} (-dz)
    P(K) = (n-1) omega_{n-1} * int rho^{n-2} ds

With the normal-angle parametrization ``ds = r_c dtheta`` and
``-dz = sin(theta) r_c dtheta`` on smooth arcs; flat pieces are integrated
exactly with Gauss-Legendre.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection
from scipy.special import comb, gammaln

from ..errors import EmptyErosion, IllConditionedFit
from .profiles import Ball, InnerParallel, MeridianProfile, Parallel, Polyline, normal

__all__ = [
    "Dimension",
    "unit_ball_volume",
    "volume",
    "perimeter",
    "diameter",
    "width",
    "mean_width_quermass",
    "outer_parallel",
    "inner_parallel",
    "inradius",
    "QuermassVector",
    "quermassintegrals",
    "quermass_comparison",
]


@dataclass(frozen=True)
class Dimension:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")

    @property
    def omega_n(self) -> float:
        return unit_ball_volume(self.n)


@lru_cache(maxsize=None)
def unit_ball_volume(n: int) -> float:
    """``pi^{n/2} / Gamma(n/2 + 1)``; valid for ``n >= 1``."""
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


@lru_cache(maxsize=None)
def _gauss(k):
    return np.polynomial.legendre.leggauss(k)


def _integrate(f, a: float, b: float, rtol: float = 1e-14, max_rounds: int = 30) -> float:
    """Adaptive composite Gauss-Legendre (20 vs 10 points per panel), vectorized over panels."""
    if b <= a:
        return 0.0
    x20, w20 = _gauss(20)
    x10, w10 = _gauss(10)
    npan = max(1, math.ceil((b - a) / 0.2))
    edges = np.linspace(a, b, npan + 1)
    lo, hi = edges[:-1], edges[1:]
    total = 0.0
    scale = None
    for _ in range(max_rounds):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        v20 = f((mid[:, None] + half[:, None] * x20).ravel()).reshape(-1, 20)
        v10 = f((mid[:, None] + half[:, None] * x10).ravel()).reshape(-1, 10)
        g20 = half * (v20 @ w20)
        g10 = half * (v10 @ w10)
        if scale is None:
            scale = max(float(np.abs(g20).sum()), 1e-300)
        ok = np.abs(g20 - g10) <= rtol * scale * (hi - lo) / (b - a) + 1e-300
        total += float(g20[ok].sum())
        if ok.all():
            return total
        lo, hi = lo[~ok], hi[~ok]
        m = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, m]), np.concatenate([m, hi])
        order = np.argsort(lo, kind="stable")
        lo, hi = lo[order], hi[order]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    v20 = f((mid[:, None] + half[:, None] * x20).ravel()).reshape(-1, 20)
    return total + float((half * (v20 @ w20)).sum())


def _intervals(profile: MeridianProfile):
    bp = profile.breakpoints
    edges = np.unique(np.concatenate([[0.0], bp, [math.pi]]))
    return edges, bp


def _segments(profile: MeridianProfile):
    bp = profile.breakpoints
    if bp.size == 0:
        return np.empty((0, 2)), np.empty((0, 2))
    r0, z0 = profile.point(bp, -1)
    r1, z1 = profile.point(bp, +1)
    return np.stack([r0, z0], axis=1), np.stack([r1, z1], axis=1)


def _boundary_integral(profile: MeridianProfile, arc_density, seg_density) -> float:
    """Sum of smooth-arc integrals over theta plus exact flat-piece integrals.

    ``arc_density(theta, rho, z, rc)`` is integrated in theta; ``seg_density``
    receives the flat-piece endpoints and returns one value per piece.
    """
    edges, _ = _intervals(profile)

    def f(theta):
        rho, z = profile.point(theta)
        return arc_density(theta, np.maximum(rho, 0.0), z, profile.curvature_radius(theta))

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _integrate(f, float(a), float(b))
    p0, p1 = _segments(profile)
    if p0.shape[0]:
        total += float(np.sum(seg_density(p0, p1)))
    return total


def _seg_moment(p0, p1, power, use_dz):
    xs, ws = _gauss(8)
    s = 0.5 * (xs + 1.0)
    rho = p0[:, 0:1] + s * (p1[:, 0:1] - p0[:, 0:1])
    rho = np.maximum(rho, 0.0)
    integ = 0.5 * ((rho ** power) @ ws)
    if use_dz:
        return integ * (p0[:, 1] - p1[:, 1])
    return integ * np.hypot(p1[:, 0] - p0[:, 0], p1[:, 1] - p0[:, 1])


def volume(profile: MeridianProfile, n: int) -> float:
    """n-volume of the body of revolution."""
    if isinstance(profile, Ball):
        return unit_ball_volume(n) * profile.radius ** n
    m = n - 1
    val = _boundary_integral(
        profile,
        lambda th, rho, z, rc: rho ** m * np.sin(th) * rc,
        lambda p0, p1: _seg_moment(p0, p1, m, True),
    )
    return unit_ball_volume(n - 1) * val


def perimeter(profile: MeridianProfile, n: int) -> float:
    """(n-1)-measure of the boundary."""
    if isinstance(profile, Ball):
        return n * unit_ball_volume(n) * profile.radius ** (n - 1)
    m = n - 2
    val = _boundary_integral(
        profile,
        lambda th, rho, z, rc: rho ** m * rc,
        lambda p0, p1: _seg_moment(p0, p1, m, False),
    )
    return (n - 1) * unit_ball_volume(n - 1) * val


def _theta_grid(profile: MeridianProfile, count: int = 2049) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, math.pi, count), profile.breakpoints]))


def width(profile: MeridianProfile, theta):
    """Width in direction u(theta); the opposite direction mirrors to pi - theta."""
    theta = np.asarray(theta, dtype=float)
    return profile.support(theta) + profile.support(math.pi - theta)


def diameter(profile: MeridianProfile) -> float:
    if isinstance(profile, Ball):
        return 2 * profile.radius
    th = _theta_grid(profile)
    return float(np.max(width(profile, th)))


def mean_width_quermass(profile: MeridianProfile, n: int) -> float:
    """W_{n-1}(K) = (1/n) * integral of the support function over the sphere."""
    if isinstance(profile, Ball):
        return unit_ball_volume(n) * profile.radius
    edges, _ = _intervals(profile)

    def f(th):
        return profile.support(th) * np.sin(th) ** (n - 2)

    total = sum(_integrate(f, float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))
    return (n - 1) * unit_ball_volume(n - 1) / n * total


def outer_parallel(profile: MeridianProfile, rho: float) -> MeridianProfile:
    """``K + rho B``."""
    if rho < 0:
        raise ValueError("outer parallel distance must be >= 0")
    if rho == 0:
        return profile
    if isinstance(profile, Ball):
        return Ball(profile.center_z, profile.radius + rho)
    if isinstance(profile, Parallel):
        return Parallel(profile.base, profile.offset + rho)
    return Parallel(profile, rho)


def _inradius_and_center(profile: MeridianProfile) -> tuple[float, float]:
    if isinstance(profile, Ball):
        return profile.radius, profile.center_z
    th = _theta_grid(profile, 4097)
    h = profile.support(th)
    # largest ball centred on the axis: z cos(theta) + t <= h(theta)
    a_ub = np.stack([np.cos(th), np.ones_like(th)], axis=1)
    res = linprog([0.0, -1.0], A_ub=a_ub, b_ub=h, bounds=[(None, None), (0, None)],
                  method="highs")
    return float(res.x[1]), float(res.x[0])


def inradius(profile: MeridianProfile) -> float:
    return _inradius_and_center(profile)[0]


def inner_parallel(profile: MeridianProfile, t: float) -> MeridianProfile:
    """Inner parallel body ``{x : d(x, boundary) > t}``.

    Exact for balls, for polylines (half-plane intersection of the shifted
    edges) and for smooth profiles whose curvature radius stays above ``t``.
    Other profiles are eroded through a polygon with 2049 sampled normals.
    """
    if t < 0:
        raise ValueError("erosion depth must be >= 0")
    if t == 0:
        return profile
    r_in, zc = _inradius_and_center(profile)
    if t >= r_in * (1 - 1e-12):
        raise EmptyErosion(f"erosion depth {t} >= inradius {r_in}")
    if isinstance(profile, Ball):
        return Ball(profile.center_z, profile.radius - t)
    if profile.is_smooth:
        th = np.linspace(0.0, math.pi, 4097)
        if float(np.min(profile.curvature_radius(th))) > t:
            return InnerParallel(profile, t)
    if isinstance(profile, Polyline):
        th = profile.breakpoints
    else:
        th = _theta_grid(profile)
    h = profile.support(th, -1)
    s, c = normal(th)
    halfspaces = np.concatenate(
        [np.stack([s, c, -(h - t)], axis=1), [[-1.0, 0.0, 0.0]]], axis=0)
    interior = np.array([0.25 * (r_in - t), zc])
    hs = HalfspaceIntersection(halfspaces, interior)
    pts = hs.intersections
    scale = float(np.ptp(pts[:, 1]) + pts[:, 0].max())
    on_axis = pts[:, 0] <= 1e-9 * scale
    top = pts[on_axis][:, 1].max()
    bot = pts[on_axis][:, 1].min()
    right = pts[~on_axis]
    zmid = 0.5 * (top + bot)
    order = np.argsort(np.arctan2(right[:, 0], right[:, 1] - zmid))
    verts = np.concatenate([[[0.0, top]], right[order], [[0.0, bot]]])
    return Polyline(verts)


@dataclass(frozen=True)
class QuermassVector:
    """Quermassintegrals W_0 .. W_n of a convex body in R^n."""

    n: int
    values: tuple[float, ...]

    def __getitem__(self, i):
        return self.values[i]

    def normalized_radii(self) -> np.ndarray:
        """``(W_i / omega_n)^{1/(n-i)}`` for i = 0 .. n-1."""
        om = unit_ball_volume(self.n)
        return np.array([(self.values[i] / om) ** (1.0 / (self.n - i)) for i in range(self.n)])

    def af_margins(self) -> list[tuple[int, int, float]]:
        """Relative Aleksandrov-Fenchel margins for all ``i < j <= n-1`` (>= 0 when the chain holds)."""
        r = self.normalized_radii()
        return [(i, j, (r[j] - r[i]) / r[j]) for i in range(self.n) for j in range(i + 1, self.n)]


def _chebyshev_lobatto(k, length):
    return 0.5 * length * (1.0 - np.cos(np.pi * np.arange(k + 1) / k))


def quermassintegrals(profile: MeridianProfile, n: int) -> QuermassVector:
    """Fit the Steiner polynomial ``|K + r B| = sum C(n,i) W_i r^i``.

    Volumes are sampled at n+1 Chebyshev-Lobatto offsets on [0, diam]; two
    held-out offsets measure the fit residual.
    """
    d = diameter(profile)
    nodes = _chebyshev_lobatto(n, d)
    vols = np.array([volume(outer_parallel(profile, float(r)), n) for r in nodes])
    x = nodes / d
    coef = np.linalg.solve(np.vander(x, n + 1, increasing=True), vols)
    held = d * np.array([0.3141592653589793, 0.7071067811865476])
    held_vol = np.array([volume(outer_parallel(profile, float(r)), n) for r in held])
    pred = np.polynomial.polynomial.polyval(held / d, coef)
    resid = float(np.max(np.abs(pred - held_vol) / held_vol))
    if resid > 1e-8:
        raise IllConditionedFit(f"Steiner fit residual {resid:.3e}")
    w = [coef[i] / d ** i / comb(n, i, exact=True) for i in range(n + 1)]
    om = unit_ball_volume(n)
    if abs(w[n] - om) > 1e-6 * om:
        raise IllConditionedFit(f"leading Steiner coefficient {w[n]} differs from omega_n {om}")
    w[n] = om
    return QuermassVector(n, tuple(float(v) for v in w))


def steiner_volume(q: QuermassVector, rho: float) -> float:
    n = q.n
    return float(sum(comb(n, i, exact=True) * q[i] * rho ** i for i in range(n + 1)))


def quermass_comparison(profile: MeridianProfile, n: int) -> list[tuple[int, float, float]]:
    """Compare W_j of the body with W_j of the ball sharing its W_{n-1}."""
    q = quermassintegrals(profile, n)
    om = unit_ball_volume(n)
    r = q[n - 1] / om
    return [(j, q[j], om * r ** (n - j)) for j in range(n)]
