"""Independent reference values used to freeze test constants.

Nothing here imports the package: radial eigenvalues come from the
``phi = r psi`` reduction (n = 3) or Bessel functions (n = 2), geometric
measures from closed forms or from dense frustum sums of a support function.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import j0, j1, y0, y1


def ball_volume(n: int, r: float) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


def sphere_area(n: int, r: float) -> float:
    return n * ball_volume(n, 1.0) * r ** (n - 1)


def prolate_area(a: float, b: float) -> float:
    """Surface area of the spheroid with equatorial semi-axis ``a`` < polar ``b``."""
    e = math.sqrt(1.0 - a * a / (b * b))
    return 2 * math.pi * a * a * (1.0 + b / (a * e) * math.asin(e))


def spheroid_volume(a: float, b: float) -> float:
    return 4.0 / 3.0 * math.pi * a * a * b


# ----------------------------------------------------------------------------- radial, n = 3

def _bc_coeffs(beta):
    """Return (is_dirichlet, beta) with Neumann as beta = 0."""
    if beta == "dirichlet":
        return True, 0.0
    b = 0.0 if beta == "neumann" else float(beta)
    return False, b


def _phi_end(k2, r1, r2, beta_in, beta_out):
    """Mismatch of the outer condition for phi'' = -k2 phi started at r1."""
    dir_in, b_in = _bc_coeffs(beta_in)
    dir_out, b_out = _bc_coeffs(beta_out)
    L = r2 - r1
    if k2 > 0:
        k = math.sqrt(k2)
        c, s = math.cos(k * L), math.sin(k * L)
        basis = (c, -k * s), (s / k, c)  # (phi, phi') at r2 for phi(r1)=1,phi'=0 and phi=0,phi'=1
    elif k2 < 0:
        k = math.sqrt(-k2)
        c, s = math.cosh(k * L), math.sinh(k * L)
        basis = (c, k * s), (s / k, c)
    else:
        basis = (1.0, 0.0), (L, 1.0)
    if dir_in:
        a, b = 0.0, 1.0
    else:
        # inward normal at r1: -psi' + beta psi = 0  =>  phi' = (beta + 1/r1) phi
        a, b = 1.0, b_in + 1.0 / r1
    phi = a * basis[0][0] + b * basis[1][0]
    dphi = a * basis[0][1] + b * basis[1][1]
    if dir_out:
        return phi
    # psi' + beta psi = 0 at r2  =>  phi' = (1/r2 - beta) phi
    return dphi - (1.0 / r2 - b_out) * phi


def radial_eigenvalue_n3(r1, r2, beta_in, beta_out, lo=-200.0, hi=None, steps=40000) -> float:
    """Lowest root of the n = 3 dispersion relation by a fine scan and brentq."""
    hi = (4 * math.pi / (r2 - r1)) ** 2 if hi is None else hi
    f = lambda k2: _phi_end(k2, r1, r2, beta_in, beta_out)  # noqa: E731
    grid = np.linspace(lo, hi, steps)
    vals = np.array([f(x) for x in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    a = grid[idx[0]]
    b = grid[idx[0] + 1]
    return brentq(f, a, b, xtol=1e-15, rtol=1e-15)


def nd_eigenvalue_n3() -> float:
    """Neumann at 1, Dirichlet at 2: lambda = x^2 with tan x = -x on (pi/2, pi)."""
    x = brentq(lambda x: math.tan(x) + x, math.pi / 2 + 1e-9, math.pi - 1e-12, xtol=1e-15)
    return x * x


def dd_glue_radius_n3(r1: float, r2: float) -> float:
    k = math.pi / (r2 - r1)
    return brentq(lambda r: math.tan(k * (r - r1)) - k * r, r1 + 1e-12,
                  r1 + (math.pi / 2 - 1e-12) / k, xtol=1e-15)


# ----------------------------------------------------------------------------- radial, n = 2

def radial_eigenvalue_n2(r1, r2, beta_in, beta_out, kmax=20.0, steps=20000) -> float:
    """Positive first eigenvalue of the annulus via J0/Y0 (positive Robin or Dirichlet data)."""
    def rows(k):
        out = []
        for r, beta, sgn in ((r1, beta_in, -1.0), (r2, beta_out, 1.0)):
            if beta == "dirichlet":
                out.append((j0(k * r), y0(k * r)))
            else:
                b = 0.0 if beta == "neumann" else float(beta)
                # sgn * psi' + b psi with psi' = -k (A J1 + B Y1)
                out.append((-sgn * k * j1(k * r) + b * j0(k * r), -sgn * k * y1(k * r) + b * y0(k * r)))
        return out

    def det(k):
        (a, b), (c, d) = rows(k)
        return a * d - b * c

    grid = np.linspace(1e-6, kmax, steps)
    vals = det(grid)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    k = brentq(det, grid[idx[0]], grid[idx[0] + 1], xtol=1e-15, rtol=1e-15)
    return k * k


# ----------------------------------------------------------------------------- convex bodies

def revolved_measures(support, n_theta: int = 200001) -> dict:
    """Volume, surface area and W_2 of a 3D body of revolution from its support function.

    ``support(theta)`` gives h at the normal (sin theta, cos theta). The boundary is the
    envelope ``h n + h' n'``; volume and area are frustum sums, W_2 the sphere integral of h / 3.
    """
    th = np.linspace(0.0, math.pi, n_theta)
    h = support(th)
    dh = np.gradient(h, th, edge_order=2)
    s, c = np.sin(th), np.cos(th)
    rho = h * s + dh * c
    z = h * c - dh * s
    rho[0] = rho[-1] = 0.0
    dz = -np.diff(z)
    r0, r1_ = rho[:-1], rho[1:]
    vol = math.pi * np.sum(dz * (r0 * r0 + r0 * r1_ + r1_ * r1_) / 3.0)
    slant = np.hypot(np.diff(rho), np.diff(z))
    area = math.pi * np.sum((r0 + r1_) * slant)
    w2 = 2 * math.pi * trapezoid(h * s, th) / 3.0
    return {"volume": float(vol), "area": float(area), "W2": float(w2)}


def spheroid_support(zc, a, b):
    return lambda th: zc * np.cos(th) + np.sqrt((a * np.sin(th)) ** 2 + (b * np.cos(th)) ** 2)


def ball_support(zc, r):
    return lambda th: zc * np.cos(th) + r + 0.0 * th


def blend_support(f, g, t):
    return lambda th: t * f(th) + (1.0 - t) * g(th)


def class_residual_n3(outer, inner) -> float:
    om = ball_volume(3, 1.0)
    mo, mi = revolved_measures(outer), revolved_measures(inner)
    return (mo["volume"] - mi["volume"]) / om - (mo["area"] / (3 * om)) ** 1.5 + (mi["W2"] / om) ** 3
