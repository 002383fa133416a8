"""First eigenvalues of spherical shells by shooting.

For a radial eigenfunction ``psi(r)`` on ``A_{s,t}`` the Laplace eigenproblem
becomes

    psi'' = -(n-1)/r * psi' - lam * psi,

integrated from the inner radius with data fixed by the inner boundary
condition (Robin: ``psi' = beta psi``; Neumann: ``psi' = 0``; Dirichlet:
``psi = 0, psi' = 1``). The eigenvalue is the smallest zero of the outer
boundary defect as a function of ``lam``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import IntegrationFailure, NoCrossing, NoRootInScan, NotMonotone, ShapeViolation

__all__ = [
    "BoundaryCondition",
    "ROBIN",
    "NEUMANN",
    "DIRICHLET",
    "ShellProblem",
    "RadialEigenResult",
    "shoot_residual",
    "first_eigenvalue",
    "glue_radius",
    "LevelSpeed",
    "level_speed",
]

ROBIN, NEUMANN, DIRICHLET = "robin", "neumann", "dirichlet"
GRID = 1025
SCAN_STEPS = 2000


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in (ROBIN, NEUMANN, DIRICHLET):
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind == ROBIN and not (math.isfinite(self.beta) and self.beta != 0):
            raise ValueError("Robin parameter must be finite and nonzero")

    @classmethod
    def robin(cls, beta: float) -> "BoundaryCondition":
        return cls(ROBIN, float(beta))

    @classmethod
    def parse(cls, spec) -> "BoundaryCondition":
        """Accept a number (0 means Neumann) or the strings 'neumann' / 'dirichlet'."""
        if isinstance(spec, BoundaryCondition):
            return spec
        if isinstance(spec, str):
            key = spec.strip().lower()
            if key in (NEUMANN, DIRICHLET):
                return cls(key)
            raise ValueError(f"unknown boundary condition {spec!r}")
        if isinstance(spec, bool) or not isinstance(spec, (int, float)):
            raise ValueError(f"unknown boundary condition {spec!r}")
        if spec == 0:
            return cls(NEUMANN)
        return cls.robin(float(spec))

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == DIRICHLET

    @property
    def is_neumann(self) -> bool:
        return self.kind == NEUMANN

    @property
    def positive(self) -> bool:
        """Robin with beta > 0 or Dirichlet (beta = +inf)."""
        return self.kind == DIRICHLET or (self.kind == ROBIN and self.beta > 0)

    @property
    def negative(self) -> bool:
        return self.kind == ROBIN and self.beta < 0

    @property
    def finite_beta(self) -> float:
        """Robin parameter; 0 for Neumann and Dirichlet (the latter is eliminated, never penalized)."""
        return self.beta if self.kind == ROBIN else 0.0

    def to_json(self):
        return self.beta if self.kind == ROBIN else self.kind

    def __str__(self):
        return f"Robin({self.beta:g})" if self.kind == ROBIN else self.kind.capitalize()


NEUMANN_BC = BoundaryCondition(NEUMANN)
DIRICHLET_BC = BoundaryCondition(DIRICHLET)


@dataclass(frozen=True)
class ShellProblem:
    n: int
    s: float
    t: float
    bc_inner: BoundaryCondition
    bc_outer: BoundaryCondition

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        if not 0 < self.s < self.t:
            raise ValueError(f"need 0 < s < t, got s={self.s}, t={self.t}")

    def scaled(self, f: float) -> "ShellProblem":
        def sc(bc):
            return BoundaryCondition.robin(bc.beta / f) if bc.kind == ROBIN else bc
        return ShellProblem(self.n, self.s * f, self.t * f, sc(self.bc_inner), sc(self.bc_outer))

    def to_dict(self):
        return {"n": self.n, "s": self.s, "t": self.t,
                "bc": [self.bc_inner.to_json(), self.bc_outer.to_json()]}


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = _A[6].copy()
_E = _B5 - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@numba.njit(cache=True)
def _dp45(m, lam, r0, y0, dy0, out_r, rtol, atol, h0):
    """Integrate psi'' = -m/r psi' - lam psi from r0 through the increasing nodes ``out_r``.

    Returns (psi, dpsi, status) sampled at ``out_r``; status 0 ok, 1 step underflow.
    """
    nout = out_r.shape[0]
    ys = np.empty(nout)
    dys = np.empty(nout)
    r = r0
    y = y0
    dy = dy0
    h = h0
    k_y = np.empty(7)
    k_d = np.empty(7)
    for j in range(nout):
        target = out_r[j]
        while r < target:
            if target - r <= h:
                h = target - r
                last = True
            else:
                last = False
            for i in range(7):
                yi = y
                di = dy
                for l in range(i):
                    yi += h * _A[i, l] * k_y[l]
                    di += h * _A[i, l] * k_d[l]
                ri = r + _C[i] * h
                k_y[i] = di
                k_d[i] = -m / ri * di - lam * yi
            y5 = y
            d5 = dy
            ey = 0.0
            ed = 0.0
            for i in range(7):
                y5 += h * _B5[i] * k_y[i]
                d5 += h * _B5[i] * k_d[i]
                ey += h * _E[i] * k_y[i]
                ed += h * _E[i] * k_d[i]
            sy = atol + rtol * max(abs(y), abs(y5))
            sd = atol + rtol * max(abs(dy), abs(d5))
            err = math.sqrt(0.5 * ((ey / sy) ** 2 + (ed / sd) ** 2))
            if err <= 1.0:
                if last:
                    r = target
                else:
                    r += h
                y = y5
                dy = d5
                fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** (-0.2))
                if not last:
                    h *= fac
                else:
                    h = max(h, h * fac)
            else:
                h *= max(0.2, 0.9 * err ** (-0.2))
                if h < 1e-14 * max(1.0, abs(r)):
                    return ys, dys, 1
        ys[j] = y
        dys[j] = dy
    return ys, dys, 0


def _initial(bc: BoundaryCondition):
    if bc.kind == ROBIN:
        return 1.0, bc.beta
    if bc.kind == NEUMANN:
        return 1.0, 0.0
    return 0.0, 1.0


def _defect(bc: BoundaryCondition, y, dy):
    if bc.kind == ROBIN:
        return dy + bc.beta * y
    if bc.kind == NEUMANN:
        return dy
    return y


def _integrate(problem: ShellProblem, lam: float, out_r: np.ndarray, rtol: float = 1e-12):
    y0, dy0 = _initial(problem.bc_inner)
    atol = rtol * 1e-3
    h0 = (problem.t - problem.s) / 100.0
    ys, dys, status = _dp45(float(problem.n - 1), float(lam), float(problem.s), y0, dy0,
                            np.ascontiguousarray(out_r, dtype=float), rtol, atol, h0)
    if status:
        raise IntegrationFailure(f"step size underflow at lambda={lam}")
    return ys, dys


def shoot_residual(problem: ShellProblem, lam: float, rtol: float = 1e-12) -> float:
    """Outer boundary defect of the solution started from the inner boundary data."""
    ys, dys = _integrate(problem, lam, np.array([problem.t]), rtol)
    return float(_defect(problem.bc_outer, ys[0], dys[0]))


@dataclass(frozen=True)
class RadialEigenResult:
    problem: ShellProblem
    lam: float
    r: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    psi_prime: np.ndarray = field(repr=False)
    residual: float
    scan: dict = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        lines = ["r,psi,psi_prime"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in
                  zip(self.r.tolist(), self.psi.tolist(), self.psi_prime.tolist())]
        return "\n".join(lines) + "\n"

    def header(self) -> dict:
        return {"lambda": self.lam, "residual": self.residual, "problem": self.problem.to_dict(),
                "scan": self.scan}

    def header_json(self) -> str:
        return json.dumps(self.header(), sort_keys=True)


FLOOR_RETRIES = 4


def _scan_bracket(problem: ShellProblem):
    # positive Robin parameters only raise the eigenvalue, so only negative ones widen the bracket
    bi = min(problem.bc_inner.finite_beta, 0.0)
    bo = min(problem.bc_outer.finite_beta, 0.0)
    lo = -2.0 * (abs(bi) + abs(bo) + 1.0) ** 2 * max(1.0, 1.0 / problem.s ** 2)
    if bi < 0 or bo < 0:
        # thin shells: the constant test function gives boundary mass over volume
        n, s, t = problem.n, problem.s, problem.t
        quotient = (abs(bi) * s ** (n - 1) + abs(bo) * t ** (n - 1)) * n / (t ** n - s ** n)
        lo = min(lo, -4.0 * quotient)
    hi = (20.0 / (problem.t - problem.s)) ** 2
    return lo, hi


def _shape_kind(problem: ShellProblem) -> str | None:
    bi, bo = problem.bc_inner, problem.bc_outer
    if bi.negative or bo.negative:
        return None
    if bi.positive and bo.is_neumann:
        return "increasing"
    if bi.is_neumann and bo.positive:
        return "decreasing"
    if bi.positive and bo.positive:
        return "single_turn"
    return None


def _sign_changes(v, tol):
    s = np.sign(np.where(np.abs(v) <= tol, 0.0, v))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def check_shape(result: RadialEigenResult, tol: float = 1e-8) -> None:
    """Raise ``ShapeViolation`` unless psi has the first-eigenfunction shape."""
    psi, dpsi = result.psi, result.psi_prime
    if (psi[1:-1] < -tol).any():
        raise ShapeViolation("eigenfunction changes sign inside the shell")
    kind = _shape_kind(result.problem)
    scale = max(1.0, float(np.abs(dpsi).max()))
    if kind == "increasing" and (dpsi < -tol * scale).any():
        raise ShapeViolation("RN eigenfunction is not radially increasing")
    if kind == "decreasing" and (dpsi > tol * scale).any():
        raise ShapeViolation("NR eigenfunction is not radially decreasing")
    if kind == "single_turn" and _sign_changes(dpsi, tol * scale) != 1:
        raise ShapeViolation("RR eigenfunction does not change monotonicity exactly once")


def first_eigenvalue(problem: ShellProblem) -> RadialEigenResult:
    """Smallest eigenvalue by a 2000-step scan of the defect and Brent refinement.

    The scan stops at the first sign change, which yields the same bracket as
    scanning the full range.
    """
    r = np.linspace(problem.s, problem.t, GRID)
    if problem.bc_inner.is_neumann and problem.bc_outer.is_neumann:
        ones = np.ones(GRID)
        return RadialEigenResult(problem, 0.0, r, ones, np.zeros(GRID), 0.0,
                                 {"trivial": "neumann-neumann"})
    lo, hi = _scan_bracket(problem)
    for _ in range(FLOOR_RETRIES):
        try:
            return _solve_from(problem, r, lo, hi)
        except (ShapeViolation, NoRootInScan) as err:
            last = err
            if problem.bc_inner.finite_beta >= 0 and problem.bc_outer.finite_beta >= 0:
                raise
            # a mode below the floor was missed; push the floor down and rescan
            lo *= 4.0
    raise last


def _solve_from(problem: ShellProblem, r, lo: float, hi: float) -> RadialEigenResult:
    step = (hi - lo) / SCAN_STEPS
    prev_lam, prev = lo, shoot_residual(problem, lo, rtol=1e-9)
    bracket = None
    for k in range(1, SCAN_STEPS + 1):
        lam = lo + k * step
        cur = shoot_residual(problem, lam, rtol=1e-9)
        if prev == 0.0:
            bracket = (prev_lam, prev_lam)
            break
        if np.sign(cur) != np.sign(prev):
            bracket = (prev_lam, lam)
            break
        prev_lam, prev = lam, cur
    if bracket is None:
        raise NoRootInScan(f"no sign change of the defect on [{lo:.4g}, {hi:.4g}]")

    def f(x):
        return shoot_residual(problem, x)

    a, b = bracket
    if a == b:
        lam = a
    else:
        fa, fb = f(a), f(b)
        if fa == 0.0:
            lam = a
        elif fb == 0.0:
            lam = b
        elif np.sign(fa) == np.sign(fb):
            # the coarse scan tolerance straddled a root; widen by one step
            a, b = a - step, b + step
            lam = brentq(f, a, b, xtol=1e-13 * max(1.0, abs(a)), rtol=1e-15, maxiter=300)
        else:
            lam = brentq(f, a, b, xtol=1e-13 * max(1.0, abs(a)), rtol=1e-15, maxiter=300)
    ys, dys = _integrate(problem, lam, r[1:])
    y0, dy0 = _initial(problem.bc_inner)
    psi = np.concatenate([[y0], ys])
    dpsi = np.concatenate([[dy0], dys])
    scale = float(np.abs(psi).max())
    if psi[np.argmax(np.abs(psi))] < 0:
        scale = -scale
    psi, dpsi = psi / scale, dpsi / scale
    defect = _defect(problem.bc_outer, psi[-1], dpsi[-1])
    if problem.bc_outer.kind == ROBIN:
        defect /= max(1.0, abs(problem.bc_outer.beta))
    result = RadialEigenResult(problem, float(lam), r, psi, dpsi, float(defect),
                               {"lambda_lo": lo, "lambda_hi": hi, "steps": SCAN_STEPS,
                                "bracket": [float(bracket[0]), float(bracket[1])]})
    check_shape(result)
    return result


def eigenvalue(n: int, s: float, t: float, bc_inner, bc_outer) -> float:
    return first_eigenvalue(ShellProblem(n, s, t, BoundaryCondition.parse(bc_inner),
                                         BoundaryCondition.parse(bc_outer))).lam


def lambda_rn(n, r1, r, bc_inner) -> float:
    return first_eigenvalue(ShellProblem(n, r1, r, bc_inner, NEUMANN_BC)).lam


def lambda_nr(n, r, r2, bc_outer) -> float:
    return first_eigenvalue(ShellProblem(n, r, r2, NEUMANN_BC, bc_outer)).lam


def glue_radius(r1: float, r2: float, bc_inner: BoundaryCondition, bc_outer: BoundaryCondition,
                n: int, tol: float = 1e-9) -> tuple[float, float]:
    """Radius where the inner RN and outer NR shell eigenvalues coincide."""
    for bc in (bc_inner, bc_outer):
        if not bc.positive:
            raise ValueError("glue radius needs positive Robin or Dirichlet conditions on both sides")

    def delta(r):
        return lambda_rn(n, r1, r, bc_inner) - lambda_nr(n, r, r2, bc_outer)

    w = r2 - r1
    a, b = r1 + 1e-3 * w, r2 - 1e-3 * w
    da, db = delta(a), delta(b)
    if not (da > 0 > db):
        raise NoCrossing(f"RN - NR difference does not change sign: {da:.4g}, {db:.4g}")
    r_star = brentq(delta, a, b, xtol=1e-14 * r2, rtol=1e-15, maxiter=200)
    lam_in = lambda_rn(n, r1, r_star, bc_inner)
    lam_out = lambda_nr(n, r_star, r2, bc_outer)
    if abs(lam_in - lam_out) > tol * max(1.0, abs(lam_in)):
        raise NoCrossing(f"glue bisection stalled: |delta| = {abs(lam_in - lam_out):.3e}")
    return float(r_star), float(lam_in)


@dataclass(frozen=True)
class LevelSpeed:
    """``g(v) = |psi'(psi^{-1}(v))|`` for a strictly increasing radial eigenfunction."""

    v_min: float
    v_max: float
    width: float
    _g: Callable = field(repr=False)
    _ratio: Callable = field(repr=False)
    _profile: Callable = field(repr=False)
    _inverse: Callable = field(repr=False)

    def __call__(self, v):
        return self._g(v)

    def inverse_web(self, v: float) -> float:
        """``int_{v_min}^{v} dv'/g(v')``, the distance at which the web function reaches ``v``."""
        from scipy.integrate import quad

        v = min(max(v, self.v_min), self.v_max)
        if v >= self.v_max:
            val, _ = quad(self._ratio, self.v_min, self.v_max, weight="alg", wvar=(0.0, -0.5),
                          limit=400, epsabs=1e-13, epsrel=1e-12)
            return val
        val, _ = quad(lambda x: 1.0 / self._g(x), self.v_min, v, limit=400,
                      epsabs=1e-13, epsrel=1e-12)
        return val

    def web(self, d):
        """Web profile ``G(d)``: the value reached at distance ``d`` (capped at ``v_max``)."""
        d = np.clip(np.asarray(d, dtype=float), 0.0, self.width)
        return self._profile(d)


def level_speed(result: RadialEigenResult) -> LevelSpeed:
    dpsi = result.psi_prime
    scale = float(np.abs(dpsi).max())
    if (dpsi[:-1] <= 1e-12 * scale).any() or np.any(np.diff(result.psi) <= 0):
        raise NotMonotone("level speed needs a strictly increasing eigenfunction")
    v, g = result.psi, np.abs(dpsi)
    g_of_v = PchipInterpolator(v, g, extrapolate=True)
    top = v[-1]
    # (v_max - v)/g^2 stays bounded at the Neumann end where g vanishes like sqrt(v_max - v)
    ratio = (top - v[:-1]) / g[:-1] ** 2
    ratio_end = 2 * ratio[-1] - ratio[-2]
    ratio_fit = PchipInterpolator(v, np.concatenate([ratio, [ratio_end]]), extrapolate=True)
    prof = PchipInterpolator(result.r - result.r[0], v, extrapolate=False)
    inv = PchipInterpolator(v, result.r - result.r[0], extrapolate=False)
    return LevelSpeed(float(v[0]), float(top), float(result.r[-1] - result.r[0]),
                      lambda x: g_of_v(x),
                      lambda x: np.sqrt(np.maximum(ratio_fit(x), 0.0)),
                      prof, inv)
