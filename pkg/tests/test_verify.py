import math

import numpy as np
import pytest

import oracles as O
from shellcut import verify as V
from shellcut.errors import ClassViolation, PreconditionViolated
from shellcut.geometry import AxiDomain, Ball, Spheroid, find_class_member, random_convex_polyline
from shellcut.radial import DIRICHLET_BC, NEUMANN_BC, BoundaryCondition

R = BoundaryCondition.robin
PASS, FAIL, INC = V.Verdict.PASS, V.Verdict.FAIL, V.Verdict.INCONCLUSIVE


def test_richardson():
    ext, tol = V.richardson(1.04, 1.01)
    assert ext == pytest.approx(1.0) and tol == pytest.approx(0.09)
    assert V.richardson(1.0, 1.0)[1] == 1e-8


def test_verdict_rule():
    rep = V.VerificationReport.judge(V.Claim.GLUE, {}, {}, -0.5, 1.0)
    assert rep.verdict is PASS
    rep = V.VerificationReport.judge(V.Claim.GLUE, {}, {}, -1.5, 1.0)
    assert rep.verdict is FAIL


def test_thm_main_equality_on_shell(shell12):
    rep = V.verify_thm_main(shell12, R(1.0), R(1.0))
    assert rep.verdict is PASS and abs(rep.margin) <= rep.tolerance


def test_thm_main_strict_on_eccentric(eccentric03):
    rep = V.verify_thm_main(eccentric03, R(1.0), R(1.0))
    assert rep.verdict is PASS and rep.margin > rep.tolerance


def test_thm_main_class_member():
    _, _, dom = find_class_member(Ball(0.0, 0.5), Spheroid(0.0, 1.0, 1.2), Spheroid(0.0, 2.0, 2.4),
                                  Ball(0.0, 4.0), 3)
    assert V.verify_thm_main(dom, R(1.0), R(1.0)).verdict is PASS


def test_thm_main_preconditions(eccentric03):
    with pytest.raises(ClassViolation):
        V.verify_thm_main(AxiDomain(3, Ball(0.0, 2.0), Spheroid(0.0, 0.8, 1.2)), R(1.0), R(1.0))
    with pytest.raises(PreconditionViolated):
        V.verify_thm_main(eccentric03, R(-1.0), R(1.0))


def test_dpp(shell12, eccentric03):
    rep = V.verify_dpp(shell12, R(1.0))
    assert rep.verdict is PASS and abs(rep.margin) <= rep.tolerance
    assert V.verify_dpp(eccentric03, R(1.0)).margin > 0
    assert V.verify_dpp(AxiDomain(3, Ball(0.0, 2.2), Spheroid(0.0, 0.8, 1.2)), R(1.0)).verdict is PASS
    with pytest.raises(PreconditionViolated):
        V.verify_dpp(shell12, NEUMANN_BC)


def test_ppt(shell12, eccentric03):
    rep = V.verify_ppt(shell12, R(1.0))
    assert rep.verdict is PASS and abs(rep.margin) <= rep.tolerance
    assert V.verify_ppt(AxiDomain(3, Spheroid(0.0, 2.0, 2.4), Ball(0.0, 1.0)), R(1.0)).verdict is PASS
    neg = V.verify_ppt(eccentric03, R(-1.0))
    assert neg.verdict is PASS and neg.measured["lambda_shell"] < 0


@pytest.mark.parametrize("args", [(1.0, 2.0, DIRICHLET_BC, DIRICHLET_BC), (1.0, 2.0, R(1.0), R(1.0)),
                                  (0.5, 1.5, R(2.0), R(0.5))])
def test_glue(args):
    rep = V.verify_glue(*args)
    assert rep.verdict is PASS
    assert rep.measured["abs_difference"] <= 1e-9


def test_glue_dd_closed_form():
    rep = V.verify_glue(1.0, 2.0, DIRICHLET_BC, DIRICHLET_BC)
    assert rep.measured["r_star_closed_form"] == pytest.approx(O.dd_glue_radius_n3(1.0, 2.0), abs=1e-13)


def test_monotonicity_reports():
    rn, nr = V.verify_monotonicity(1.0, 2.0, R(1.0), R(1.0))
    assert rn.claim is V.Claim.MONO_RN and nr.claim is V.Claim.MONO_NR
    assert rn.verdict is PASS and nr.verdict is PASS


def test_monotonicity_rejects_negative_beta():
    with pytest.raises(PreconditionViolated):
        V.verify_monotonicity(1.0, 2.0, R(-1.0), R(1.0))


def test_meridian_distance_ball():
    pts = np.array([[0.0, 3.0], [1.5, 0.2], [0.3, 0.0], [2.0, -2.0]])
    d = V.meridian_distance(Ball(0.0, 1.0), pts)
    exact = np.maximum(np.hypot(pts[:, 0], pts[:, 1]) - 1.0, 0.0)
    np.testing.assert_allclose(d, exact, atol=1e-10)


def test_meridian_distance_spheroid_outside():
    p = Spheroid(0.0, 1.0, 2.0)
    # the closest point to (3, 0) on a spheroid with equatorial radius 1 is (1, 0)
    assert V.meridian_distance(p, np.array([[3.0, 0.0]]))[0] == pytest.approx(2.0, abs=1e-10)


def test_web_sandwich(shell12, eccentric03):
    rep = V.web_function_bound(shell12, R(1.0))
    assert rep.verdict is PASS
    assert abs(rep.measured["R_extrapolated"] - rep.measured["lambda_shell"]) <= rep.tolerance
    rep = V.web_function_bound(eccentric03, R(1.0))
    assert rep.verdict is PASS
    assert rep.measured["left_margin"] >= -1e-10


def test_geometry_lemmas_ball_equalities():
    for rep in V.verify_geometry_lemmas(Ball(0.2, 1.3), 3):
        assert rep.verdict is PASS
        assert abs(rep.margin) <= 1e-6


def test_geometry_lemmas_strict():
    for p in (Spheroid(0.0, 1.0, 2.0), random_convex_polyline(np.random.default_rng(5))):
        reps = {r.claim: r for r in V.verify_geometry_lemmas(p, 3)}
        assert all(r.verdict is PASS for r in reps.values())
        for claim in (V.Claim.AF, V.Claim.QUERMASS):
            assert reps[claim].margin > 1e-6


@pytest.mark.parametrize("bc", [(R(1.0), NEUMANN_BC), (NEUMANN_BC, R(1.0)), (R(1.0), R(1.0))])
def test_shape_and_hopf(bc):
    rep = V.verify_radial_shape_and_hopf(3, 1.0, 2.0, *bc)
    assert rep.verdict is PASS


def test_hopf_sign_eccentric(eccentric03):
    rep = V.verify_hopf_sign(eccentric03, R(1.0), R(1.0))
    assert rep.verdict is PASS and rep.margin > 0


def test_solver_error_is_inconclusive(shell12):
    rep = V.verify_dpp(shell12, R(1.0), h=0.5)  # h above gap/3
    assert rep.verdict is INC and "MeshTooCoarse" in rep.measured["error"]


def test_reports_reproducible(eccentric03):
    a = V.verify_thm_main(eccentric03, R(1.0), R(1.0)).to_dict()
    b = V.verify_thm_main(eccentric03, R(1.0), R(1.0)).to_dict()
    assert a == b
