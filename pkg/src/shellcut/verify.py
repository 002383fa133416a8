"""Numerical checks of the comparison theorems, the glue identity and the geometric lemmas.

Every check returns a :class:`VerificationReport`. Inequalities are measured as
a signed margin (positive when satisfied) against a tolerance taken from two
mesh levels, so discretisation error is not mistaken for a violation.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .errors import ClassViolation, PreconditionViolated, ShapeViolation, ShellcutError
from .fem import FemSolution, assemble, boundary_normal_derivative, rayleigh_quotient, solve_first
from .geometry import (AxiDomain, Ball, MeridianProfile, class_residual, concentric_shell, diameter,
                       inner_parallel, inradius, matched_shell_radii, outer_parallel, perimeter,
                       quermassintegrals, steiner_volume, unit_ball_volume, volume)
from .geometry.domain import scale_of
from .mesh import INNER, OUTER, mesh_meridian
from .radial import (NEUMANN_BC, BoundaryCondition, ShellProblem, check_shape, eigenvalue,
                     first_eigenvalue, glue_radius, lambda_nr, lambda_rn, level_speed)

__all__ = ["Claim", "Verdict", "VerificationReport", "richardson", "fem_pair", "verify_thm_main",
           "verify_dpp", "verify_ppt", "verify_glue", "verify_monotonicity", "web_function_bound",
           "verify_geometry_lemmas", "verify_radial_shape_and_hopf", "verify_hopf_sign",
           "meridian_distance", "dd_glue_radius_n3", "steiner_residual"]


class Claim(str, Enum):
    THM_MAIN = "ThmMain"
    THM_DPP = "ThmDPP"
    THM_PPT = "ThmPPT"
    GLUE = "GlueIdentity"
    WEB = "WebBound"
    MONO_RN = "MonotonicityRN"
    MONO_NR = "MonotonicityNR"
    AF = "AFChain"
    INNER_PARALLEL = "InnerParallelLemma"
    QUERMASS = "QuermassComparison"
    FIRST_VARIATION = "FirstVariation"
    HOPF = "HopfSign"
    SHAPE = "EigenfunctionShape"


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INCONCLUSIVE = "Inconclusive"


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Enum):
        return x.value
    return x


@dataclass(eq=False)
class VerificationReport:
    claim: Claim
    inputs: dict
    measured: dict
    margin: float
    tolerance: float
    verdict: Verdict
    provenance: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict, repr=False)  # meshes/solutions for repro bundles

    @classmethod
    def judge(cls, claim, inputs, measured, margin, tolerance, provenance=None, artifacts=None):
        verdict = Verdict.PASS if margin >= -tolerance else Verdict.FAIL
        return cls(claim, inputs, measured, float(margin), float(tolerance), verdict,
                   provenance or {}, artifacts or {})

    @classmethod
    def inconclusive(cls, claim, inputs, error: Exception, provenance=None):
        return cls(claim, inputs, {"error": f"{type(error).__name__}: {error}"}, float("nan"),
                   float("nan"), Verdict.INCONCLUSIVE, provenance or {})

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    def input_hash(self) -> str:
        blob = json.dumps(_clean(self.inputs), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return _clean({
            "claim": self.claim, "inputs": self.inputs, "measured": self.measured,
            "margin": None if math.isnan(self.margin) else self.margin,
            "tolerance": None if math.isnan(self.tolerance) else self.tolerance,
            "verdict": self.verdict, "provenance": {**self.provenance, "version": __version__},
        })

    def summary(self) -> str:
        return (f"{self.claim.value:<20} {self.verdict.value:<12} margin={self.margin:+.3e} "
                f"tol={self.tolerance:.1e}")


# ----------------------------------------------------------------------------- helpers

def richardson(coarse: float, fine: float, floor: float = 1e-8) -> tuple[float, float]:
    """Second-order extrapolation and the matching tolerance ``max(3 |delta|, floor)``."""
    return (4.0 * fine - coarse) / 3.0, max(3.0 * abs(fine - coarse), floor)


def fem_pair(domain: AxiDomain, h: float, bc_inner, bc_outer) -> tuple[FemSolution, FemSolution]:
    """First eigenpairs on meshes of size ``h`` and ``h/2``."""
    coarse = solve_first(assemble(mesh_meridian(domain, h), domain.n, bc_inner, bc_outer))
    fine = solve_first(assemble(mesh_meridian(domain, h / 2), domain.n, bc_inner, bc_outer),
                       shift_hint=coarse.lam)
    return coarse, fine


def _default_h(domain: AxiDomain, h: float | None) -> float:
    return domain.gap / 20.0 if h is None else float(h)


def _bc(spec) -> BoundaryCondition:
    return spec if isinstance(spec, BoundaryCondition) else BoundaryCondition.parse(spec)


def _fem_comparison(claim, domain, h, bc_in, bc_out, r1, r2, lam_shell, inputs):
    coarse, fine = fem_pair(domain, h, bc_in, bc_out)
    lam_ext, tol = richardson(coarse.lam, fine.lam)
    measured = {"R1": r1, "R2": r2, "lambda_shell": lam_shell, "lambda_h": coarse.lam,
                "lambda_h2": fine.lam, "lambda_extrapolated": lam_ext}
    prov = {"h": h, "h2": h / 2, "fem_tol": 1e-12, "shift_h": coarse.shift, "shift_h2": fine.shift,
            "regularity": domain.regularity,
            "iterations": [coarse.iterations, fine.iterations],
            "eig_residual": [coarse.eig_residual, fine.eig_residual]}
    return VerificationReport.judge(claim, inputs, measured, lam_shell - lam_ext, tol, prov,
                                    {"mesh": fine.mesh, "solution": fine})


def _guard(claim, inputs, fn):
    try:
        return fn()
    except ClassViolation:
        raise
    except ShellcutError as exc:
        return VerificationReport.inconclusive(claim, inputs, exc)


# ----------------------------------------------------------------------------- theorems

def verify_thm_main(domain: AxiDomain, bc_inner, bc_outer, h: float | None = None,
                    class_tol: float = 1e-6) -> VerificationReport:
    """``lambda_RR(Omega) <= lambda_RR(A_{R1,R2})`` for domains of the class S."""
    bc_in, bc_out = _bc(bc_inner), _bc(bc_outer)
    if not (bc_in.positive and bc_out.positive):
        raise PreconditionViolated("both Robin parameters must lie in (0, +inf]")
    h = _default_h(domain, h)
    inputs = {"domain": domain.to_dict(), "bc": [bc_in.to_json(), bc_out.to_json()], "h": h}
    res = class_residual(domain)
    if abs(res) > class_tol * scale_of(domain) ** domain.n:
        raise ClassViolation(f"class residual {res:.3e} exceeds {class_tol:g} * scale^n")

    def run():
        r1, r2 = matched_shell_radii(domain, "main")
        lam_shell = eigenvalue(domain.n, r1, r2, bc_in, bc_out)
        rep = _fem_comparison(Claim.THM_MAIN, domain, h, bc_in, bc_out, r1, r2, lam_shell, inputs)
        rep.measured["class_residual"] = res
        return rep
    return _guard(Claim.THM_MAIN, inputs, run)


def verify_dpp(domain: AxiDomain, bc_inner, h: float | None = None) -> VerificationReport:
    """Robin inside, Neumann outside: compare with the shell of equal volume and inner W_{n-1}."""
    bc_in = _bc(bc_inner)
    if not bc_in.positive:
        raise PreconditionViolated("the inner Robin parameter must be positive")
    h = _default_h(domain, h)
    inputs = {"domain": domain.to_dict(), "bc": [bc_in.to_json(), "neumann"], "h": h}

    def run():
        r1, r2 = matched_shell_radii(domain, "dpp")
        lam_shell = lambda_rn(domain.n, r1, r2, bc_in)
        return _fem_comparison(Claim.THM_DPP, domain, h, bc_in, NEUMANN_BC, r1, r2, lam_shell, inputs)
    return _guard(Claim.THM_DPP, inputs, run)


def verify_ppt(domain: AxiDomain, bc_outer, h: float | None = None) -> VerificationReport:
    """Neumann inside, Robin outside: compare with the shell of equal volume and outer perimeter."""
    bc_out = _bc(bc_outer)
    if bc_out.is_neumann:
        raise PreconditionViolated("the outer Robin parameter must be nonzero")
    h = _default_h(domain, h)
    inputs = {"domain": domain.to_dict(), "bc": ["neumann", bc_out.to_json()], "h": h}

    def run():
        r1, r2 = matched_shell_radii(domain, "ppt")
        lam_shell = lambda_nr(domain.n, r1, r2, bc_out)
        return _fem_comparison(Claim.THM_PPT, domain, h, NEUMANN_BC, bc_out, r1, r2, lam_shell, inputs)
    return _guard(Claim.THM_PPT, inputs, run)


def dd_glue_radius_n3(r1: float, r2: float) -> float:
    """Closed-form glue radius for Dirichlet data in three dimensions.

    With ``phi = r psi`` the inner Dirichlet-Neumann eigenfunction is
    ``sin(k (r - r1))`` with ``k = pi / (r2 - r1)``, and psi' vanishes where
    ``tan(k (r - r1)) = k r``.
    """
    k = math.pi / (r2 - r1)
    f = lambda r: math.tan(k * (r - r1)) - k * r  # noqa: E731
    return brentq(f, r1 + 1e-12, r1 + (0.5 * math.pi - 1e-12) / k, xtol=1e-15, rtol=1e-15)


def verify_glue(r1: float, r2: float, bc_inner, bc_outer, n: int = 3) -> VerificationReport:
    """Inner RN and outer NR eigenvalues meet at r* at the value of the full RR eigenvalue."""
    bc_in, bc_out = _bc(bc_inner), _bc(bc_outer)
    inputs = {"R1": r1, "R2": r2, "bc": [bc_in.to_json(), bc_out.to_json()], "n": n}

    def run():
        r_star, _ = glue_radius(r1, r2, bc_in, bc_out, n)
        lam_rn = lambda_rn(n, r1, r_star, bc_in)
        lam_nr = lambda_nr(n, r_star, r2, bc_out)
        lam_rr = eigenvalue(n, r1, r2, bc_in, bc_out)
        diff = abs(lam_rn - lam_nr)
        rel = max(abs(lam_rn - lam_rr), abs(lam_nr - lam_rr)) / abs(lam_rr)
        margins = [1e-9 - diff, 1e-8 - rel]
        measured = {"r_star": r_star, "lambda_rn": lam_rn, "lambda_nr": lam_nr, "lambda_rr": lam_rr,
                    "abs_difference": diff, "relative_to_rr": rel}
        # away from r* the smaller of the two mixed eigenvalues drops below the common value
        for sgn in (-1, 1):
            r = r_star + sgn * 0.1 * (r2 - r1)
            low = min(lambda_rn(n, r1, r, bc_in), lambda_nr(n, r, r2, bc_out))
            measured[f"min_at_{'minus' if sgn < 0 else 'plus'}"] = low
            margins.append((lam_rr - low) / abs(lam_rr))
        if n == 3 and bc_in.is_dirichlet and bc_out.is_dirichlet:
            exact = dd_glue_radius_n3(r1, r2)
            measured["r_star_closed_form"] = exact
            margins.append(1e-8 - abs(r_star - exact))
        return VerificationReport.judge(Claim.GLUE, inputs, measured, min(margins), 0.0,
                                        {"radial_rtol": 1e-12, "glue_tol": 1e-9})
    return _guard(Claim.GLUE, inputs, run)


def verify_monotonicity(r1: float, r2: float, bc_inner, bc_outer, n: int = 3, points: int = 20,
                        tol: float = 1e-9) -> list[VerificationReport]:
    """``r -> lambda_RN(A_{R1,r})`` decreases and ``r -> lambda_NR(A_{r,R2})`` increases."""
    bc_in, bc_out = _bc(bc_inner), _bc(bc_outer)
    if bc_in.negative or bc_out.negative:
        # with beta < 0 shrinking the shell lowers lambda, so the lemma reverses
        raise PreconditionViolated("domain monotonicity needs nonnegative Robin parameters")
    grid = np.linspace(r1, r2, points + 2)[1:-1]
    inputs = {"R1": r1, "R2": r2, "bc": [bc_in.to_json(), bc_out.to_json()], "n": n,
              "points": points}
    rn = np.array([lambda_rn(n, r1, r, bc_in) for r in grid])
    nr = np.array([lambda_nr(n, r, r2, bc_out) for r in grid])
    prov = {"radial_rtol": 1e-12}
    return [
        VerificationReport.judge(Claim.MONO_RN, inputs, {"r": grid.tolist(), "lambda": rn.tolist()},
                                 float(np.min(rn[:-1] - rn[1:])), tol, prov),
        VerificationReport.judge(Claim.MONO_NR, inputs, {"r": grid.tolist(), "lambda": nr.tolist()},
                                 float(np.min(nr[1:] - nr[:-1])), tol, prov),
    ]


# ----------------------------------------------------------------------------- web function

def meridian_distance(profile: MeridianProfile, points: np.ndarray, grid: int = 2049) -> np.ndarray:
    """Distance from meridian points to the convex body ``profile`` (zero inside).

    For a convex body the distance is ``max_u (x.u - h(u))``; a grid search over
    normal angles is refined by golden-section search on the bracketing cell.
    """
    pts = np.asarray(points, dtype=float)
    theta = np.linspace(0.0, math.pi, grid)
    hs = profile.support(theta)
    s, c = np.sin(theta), np.cos(theta)
    val = pts[:, :1] * s + pts[:, 1:] * c - hs
    k = np.argmax(val, axis=1)
    step = theta[1] - theta[0]
    lo = np.clip(theta[k] - step, 0.0, math.pi)
    hi = np.clip(theta[k] + step, 0.0, math.pi)

    def f(th):
        return pts[:, 0] * np.sin(th) + pts[:, 1] * np.cos(th) - profile.support(th)

    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(60):
        left = f1 >= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x2n = np.where(left, x1, a + g * (b - a))
        x1n = np.where(left, b - g * (b - a), x2)
        f2 = np.where(left, f1, f(x2n))
        f1 = np.where(left, f(x1n), f2)
        x1, x2 = x1n, x2n
    best = np.maximum(np.maximum(f(0.5 * (a + b)), val.max(axis=1)), np.maximum(f(lo), f(hi)))
    return np.maximum(best, 0.0)


def _web_quotient(domain: AxiDomain, h: float, bc_in: BoundaryCondition, speed):
    mesh = mesh_meridian(domain, h)
    asm = assemble(mesh, domain.n, bc_in, NEUMANN_BC)
    d = meridian_distance(domain.inner, mesh.vertices)
    w = speed.web(d)
    sol = solve_first(asm)
    return rayleigh_quotient(asm, w), sol


def web_function_bound(domain: AxiDomain, bc_inner, h: float | None = None) -> VerificationReport:
    """``lambda_RN(Omega) <= R(w) <= lambda_RN(A_{r,R})`` for the web test function.

    ``w(x) = G(d(x, Omega_in))`` where ``G`` follows the radial RN eigenfunction
    of the matched shell and is capped at its maximum.
    """
    bc_in = _bc(bc_inner)
    if not bc_in.positive:
        raise PreconditionViolated("the inner Robin parameter must be positive")
    h = _default_h(domain, h)
    inputs = {"domain": domain.to_dict(), "bc": [bc_in.to_json(), "neumann"], "h": h}

    def run():
        r1, r2 = matched_shell_radii(domain, "dpp")
        radial = first_eigenvalue(ShellProblem(domain.n, r1, r2, bc_in, NEUMANN_BC))
        speed = level_speed(radial)
        rq_h, sol_h = _web_quotient(domain, h, bc_in, speed)
        rq_h2, sol_h2 = _web_quotient(domain, h / 2, bc_in, speed)
        rq_ext, tol = richardson(rq_h, rq_h2)
        left = min(rq_h - sol_h.lam, rq_h2 - sol_h2.lam)
        measured = {"R1": r1, "R2": r2, "lambda_shell": radial.lam, "R_h": rq_h, "R_h2": rq_h2,
                    "R_extrapolated": rq_ext, "lambda_fem_h": sol_h.lam, "lambda_fem_h2": sol_h2.lam,
                    "left_margin": left, "right_margin": radial.lam - rq_ext}
        # the left inequality is exact in the discrete space up to round-off
        margin = min(radial.lam - rq_ext, left + tol - 1e-10)
        return VerificationReport.judge(Claim.WEB, inputs, measured, margin, tol,
                                        {"h": h, "h2": h / 2, "distance": "support-function search",
                                         "regularity": domain.regularity},
                                        {"mesh": sol_h2.mesh, "solution": sol_h2})
    return _guard(Claim.WEB, inputs, run)


# ----------------------------------------------------------------------------- geometry

def steiner_residual(profile: MeridianProfile, n: int, rhos=(0.05, 0.37, 1.3)) -> float:
    """Largest relative error of the fitted Steiner polynomial against direct volumes."""
    q = quermassintegrals(profile, n)
    d = diameter(profile)
    errs = []
    for r in rhos:
        exact = volume(outer_parallel(profile, r * d), n)
        errs.append(abs(steiner_volume(q, r * d) - exact) / exact)
    return float(max(errs))


def verify_geometry_lemmas(profile: MeridianProfile, n: int,
                           t_fractions=(0.6, 0.85), equality_tol: float = 1e-6) -> list[VerificationReport]:
    """Aleksandrov-Fenchel chain, quermass comparison, inner parallel and first-variation checks."""
    inputs = {"profile": profile.to_dict(), "n": n}
    q = quermassintegrals(profile, n)
    om = unit_ball_volume(n)
    reports = []

    af = q.af_margins()
    radii = q.normalized_radii()
    reports.append(VerificationReport.judge(
        Claim.AF, inputs, {"normalized_radii": radii.tolist(), "quermass": list(q.values),
                           "steiner_residual": steiner_residual(profile, n),
                           "max_abs_margin": max(abs(m) for *_, m in af)},
        min(m for *_, m in af), equality_tol))

    r = q[n - 1] / om
    comp = [(j, q[j], om * r ** (n - j)) for j in range(n - 1)]
    rel = [(wb - wj) / wb for _, wj, wb in comp]
    reports.append(VerificationReport.judge(
        Claim.QUERMASS, inputs, {"W": [c[1] for c in comp], "W_ball": [c[2] for c in comp],
                                 "radius": r}, min(rel), equality_tol))

    r_in = inradius(profile)
    rows = []
    for frac in t_fractions:
        t = frac * r_in
        delta = 1e-4 * r_in
        p_plus = perimeter(inner_parallel(profile, t + delta), n)
        p_minus = perimeter(inner_parallel(profile, t - delta), n)
        dp = -(p_plus - p_minus) / (2 * delta)
        w2 = quermassintegrals(inner_parallel(profile, t), n)[2] if n > 2 else om
        rhs = n * (n - 1) * w2
        rows.append({"t": t, "minus_dP_dt": dp, "n_n1_W2": rhs, "relative": (dp - rhs) / rhs})
    reports.append(VerificationReport.judge(
        Claim.INNER_PARALLEL, inputs, {"samples": rows, "inradius": r_in},
        min(row["relative"] for row in rows), equality_tol))

    d = diameter(profile)
    rho = 1e-3 * d
    p0 = perimeter(profile, n)
    slope = lambda s: (perimeter(outer_parallel(profile, s), n) - p0) / s  # noqa: E731
    ext = 2.0 * slope(rho / 2) - slope(rho)
    target = n * (n - 1) * (q[2] if n > 2 else om)
    err = abs(ext - target) / target
    reports.append(VerificationReport.judge(
        Claim.FIRST_VARIATION, inputs, {"difference_quotient": ext, "n_n1_W2": target,
                                        "relative_error": err}, -err, equality_tol))
    return reports


# ----------------------------------------------------------------------------- shapes and signs

def _hopf_margin(sol: FemSolution) -> tuple[float, dict]:
    """Smallest normalised value of ``-sign(beta) du/dnu`` over Robin edges."""
    bcs = sol.assembly.bcs
    edges, vals = boundary_normal_derivative(sol, (INNER, OUTER))
    tags = sol.mesh.edge_tags[edges]
    gscale = float(np.abs(vals).max()) or 1.0
    worst = math.inf
    measured = {}
    for tag, name in ((INNER, "inner"), (OUTER, "outer")):
        bc = bcs[tag]
        if bc.is_neumann:
            continue
        expect = -1.0 if (bc.is_dirichlet or bc.beta > 0) else 1.0
        v = expect * vals[tags == tag] / gscale
        measured[f"{name}_min_signed"] = float(v.min())
        measured[f"{name}_expected_sign"] = expect
        worst = min(worst, float(v.min()))
    return worst, measured


def verify_hopf_sign(domain: AxiDomain, bc_inner, bc_outer, h: float | None = None) -> VerificationReport:
    """Normal derivative sign on every Robin edge is ``-sign(beta)``."""
    bc_in, bc_out = _bc(bc_inner), _bc(bc_outer)
    h = _default_h(domain, h)
    inputs = {"domain": domain.to_dict(), "bc": [bc_in.to_json(), bc_out.to_json()], "h": h}

    def run():
        sol = solve_first(assemble(mesh_meridian(domain, h), domain.n, bc_in, bc_out))
        margin, measured = _hopf_margin(sol)
        measured["lambda"] = sol.lam
        return VerificationReport.judge(Claim.HOPF, inputs, measured, margin, 1e-6,
                                        {"h": h, "regularity": domain.regularity},
                                        {"mesh": sol.mesh, "solution": sol})
    return _guard(Claim.HOPF, inputs, run)


def verify_radial_shape_and_hopf(n: int, r1: float, r2: float, bc_inner, bc_outer,
                                 h: float | None = None) -> VerificationReport:
    """Radial monotonicity pattern of the shell eigenfunction plus the Hopf signs of its FEM twin."""
    bc_in, bc_out = _bc(bc_inner), _bc(bc_outer)
    shell = concentric_shell(n, r1, r2)
    h = _default_h(shell, h)
    inputs = {"n": n, "R1": r1, "R2": r2, "bc": [bc_in.to_json(), bc_out.to_json()], "h": h}

    def run():
        res = first_eigenvalue(ShellProblem(n, r1, r2, bc_in, bc_out))
        measured = {"lambda": res.lam}
        try:
            check_shape(res)
            shape_margin = 0.0
        except ShapeViolation as exc:
            measured["shape_error"] = str(exc)
            shape_margin = -1.0
        dpsi = res.psi_prime / max(1.0, float(np.abs(res.psi_prime).max()))
        measured["min_dpsi"] = float(dpsi.min())
        measured["max_dpsi"] = float(dpsi.max())
        sol = solve_first(assemble(mesh_meridian(shell, h), n, bc_in, bc_out))
        hopf, hm = _hopf_margin(sol)
        measured.update(hm)
        return VerificationReport.judge(Claim.SHAPE, inputs, measured, min(shape_margin, hopf), 1e-6,
                                        {"h": h, "shape_tol": 1e-8})
    return _guard(Claim.SHAPE, inputs, run)
