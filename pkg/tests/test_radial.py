import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from shellcut.errors import NoCrossing, NotMonotone
from shellcut.radial import (DIRICHLET_BC, NEUMANN_BC, BoundaryCondition, ShellProblem, check_shape,
                             eigenvalue, first_eigenvalue, glue_radius, lambda_nr, lambda_rn,
                             level_speed, shoot_residual)

R = BoundaryCondition.robin
# frozen from tests/oracles.py: phi = r psi dispersion relation (n = 3) and J0/Y0 determinant (n = 2)
ORACLE_N3 = {
    ("dirichlet", "dirichlet", 1.0, 2.0): math.pi ** 2,
    ("neumann", "dirichlet", 1.0, 2.0): 4.115858365694522,
    (1.0, 1.0, 1.0, 2.0): 1.7915963992923896,
    (1.0, "neumann", 1.0, 2.0): 0.33082201257740607,
    ("neumann", 1.0, 1.0, 2.0): 1.2910617251698246,
    (-1.0, -1.0, 1.0, 2.0): -2.6302958149022673,
    ("neumann", -1.0, 1.0, 2.0): -2.3401745192749424,
    (2.0, 0.5, 0.5, 1.5): 1.316111985966763,
}
ORACLE_N2 = {("dirichlet", "dirichlet"): 9.753322124750705, (1.0, 1.0): 1.6972910826327359}
DD_GLUE_N3 = 1.4302966531242027


def test_oracle_module_reproduces_frozen_values():
    assert O.radial_eigenvalue_n3(1.0, 2.0, 1.0, 1.0) == pytest.approx(ORACLE_N3[(1.0, 1.0, 1.0, 2.0)], rel=1e-12)
    assert O.nd_eigenvalue_n3() == pytest.approx(ORACLE_N3[("neumann", "dirichlet", 1.0, 2.0)], rel=1e-13)
    assert O.dd_glue_radius_n3(1.0, 2.0) == pytest.approx(DD_GLUE_N3, rel=1e-13)


@pytest.mark.parametrize("key", list(ORACLE_N3))
def test_first_eigenvalue_n3_oracle(key):
    bi, bo, s, t = key
    lam = eigenvalue(3, s, t, BoundaryCondition.parse(bi), BoundaryCondition.parse(bo))
    assert lam == pytest.approx(ORACLE_N3[key], rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("key", list(ORACLE_N2))
def test_first_eigenvalue_n2_oracle(key):
    lam = eigenvalue(2, 1.0, 2.0, BoundaryCondition.parse(key[0]), BoundaryCondition.parse(key[1]))
    assert lam == pytest.approx(ORACLE_N2[key], rel=1e-9)


def test_shoot_residual_examples():
    dd = ShellProblem(3, 1.0, 2.0, DIRICHLET_BC, DIRICHLET_BC)
    assert abs(shoot_residual(dd, math.pi ** 2)) <= 1e-9
    nn = ShellProblem(3, 1.0, 2.0, NEUMANN_BC, NEUMANN_BC)
    assert shoot_residual(nn, 0.0) == 0.0
    nd = ShellProblem(3, 1.0, 2.0, NEUMANN_BC, DIRICHLET_BC)
    assert abs(shoot_residual(nd, O.nd_eigenvalue_n3())) <= 1e-9


def test_neumann_neumann_constant():
    res = first_eigenvalue(ShellProblem(3, 1.0, 2.0, NEUMANN_BC, NEUMANN_BC))
    assert abs(res.lam) <= 1e-10
    assert np.ptp(res.psi) <= 1e-8 * np.abs(res.psi).max()


def test_transversal_root():
    p = ShellProblem(3, 1.0, 2.0, R(1.0), R(1.0))
    lam = first_eigenvalue(p).lam
    d = 1e-5
    slope = (shoot_residual(p, lam + d) - shoot_residual(p, lam - d)) / (2 * d)
    assert abs(slope) > 1e-3


@pytest.mark.parametrize("bc, kind", [((R(1.0), NEUMANN_BC), "inc"), ((NEUMANN_BC, R(1.0)), "dec"),
                                      ((R(1.0), R(1.0)), "turn")])
def test_shape(bc, kind):
    res = first_eigenvalue(ShellProblem(3, 1.0, 2.0, *bc))
    check_shape(res)
    dp = res.psi_prime / np.abs(res.psi_prime).max()
    if kind == "inc":
        assert dp.min() >= -1e-8
    elif kind == "dec":
        assert dp.max() <= 1e-8
    else:
        sign = np.sign(dp[np.abs(dp) > 1e-6])
        assert np.count_nonzero(np.diff(sign)) == 1


def test_negative_beta_positive_eigenfunction():
    res = first_eigenvalue(ShellProblem(3, 1.0, 2.0, R(-1.0), R(-1.0)))
    assert np.isfinite(res.lam) and res.lam < 0
    assert np.all(res.psi > 0)


@pytest.mark.parametrize("r2, bi, bo, expected", [
    (1.05, -1.0, "neumann", -19.353836415992948),
    (1.1, -1.0, -1.0, -20.369907385869755),
])
def test_negative_beta_thin_shell(r2, bi, bo, expected):
    # thin shells push the first eigenvalue far below the nominal scan floor
    bc_out = NEUMANN_BC if bo == "neumann" else R(bo)
    res = first_eigenvalue(ShellProblem(3, 1.0, r2, R(bi), bc_out))
    assert res.lam == pytest.approx(expected, rel=1e-9)
    assert np.all(res.psi > 0)


def test_beta_monotonicity():
    lams = [eigenvalue(3, 1.0, 2.0, R(b), R(b)) for b in (0.5, 1.0, 2.0, 4.0)]
    lams.append(eigenvalue(3, 1.0, 2.0, DIRICHLET_BC, DIRICHLET_BC))
    assert np.all(np.diff(lams) > 0)


def test_dirichlet_as_robin_limit():
    big = eigenvalue(3, 1.0, 2.0, R(1e6), R(1e6))
    assert big == pytest.approx(math.pi ** 2, rel=1e-3)


@pytest.mark.parametrize("t", [0.5, 3.0])
def test_scaling_law(t):
    p = ShellProblem(3, 1.0, 2.0, R(1.0), R(2.0))
    assert first_eigenvalue(p.scaled(t)).lam == pytest.approx(first_eigenvalue(p).lam / t ** 2, rel=1e-9)


def test_domain_monotonicity_grid():
    r = np.linspace(1.0, 2.0, 22)[1:-1]
    rn = [lambda_rn(3, 1.0, x, R(1.0)) for x in r]
    nr = [lambda_nr(3, x, 2.0, R(1.0)) for x in r]
    assert np.all(np.diff(rn) <= 1e-9)
    assert np.all(np.diff(nr) >= -1e-9)


def test_glue_dd_closed_form():
    r_star, lam = glue_radius(1.0, 2.0, DIRICHLET_BC, DIRICHLET_BC, 3)
    assert r_star == pytest.approx(DD_GLUE_N3, abs=1e-8)
    assert lam == pytest.approx(math.pi ** 2, rel=1e-8)


def test_glue_matches_full_and_scales():
    r_star, lam = glue_radius(1.0, 2.0, R(1.0), R(2.0), 3)
    assert lam == pytest.approx(eigenvalue(3, 1.0, 2.0, R(1.0), R(2.0)), rel=1e-8)
    r2, lam2 = glue_radius(2.0, 4.0, R(0.5), R(1.0), 3)
    assert r2 == pytest.approx(2 * r_star, rel=1e-8)
    assert lam2 == pytest.approx(lam / 4, rel=1e-8)


def test_glue_rejects_neumann():
    with pytest.raises((NoCrossing, ValueError)):
        glue_radius(1.0, 2.0, NEUMANN_BC, R(1.0), 3)


def test_level_speed_roundtrip():
    res = first_eigenvalue(ShellProblem(3, 1.0, 2.0, R(1.0), NEUMANN_BC))
    g = level_speed(res)
    np.testing.assert_allclose(g(res.psi[:-1]), np.abs(res.psi_prime[:-1]), rtol=1e-8, atol=1e-10)
    assert g.inverse_web(g.v_max) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(NotMonotone):
        level_speed(first_eigenvalue(ShellProblem(3, 1.0, 2.0, R(1.0), R(1.0))))


def test_bc_parse():
    assert BoundaryCondition.parse("Dirichlet").is_dirichlet
    assert BoundaryCondition.parse(0).is_neumann
    assert BoundaryCondition.parse(-2.5).negative
    with pytest.raises(ValueError):
        BoundaryCondition.parse("robin")
    with pytest.raises(ValueError):
        BoundaryCondition.parse(True)


@given(st.floats(0.2, 3.0), st.floats(0.2, 2.0), st.floats(0.1, 5.0))
def test_scaling_property(s, width, beta):
    p = ShellProblem(3, s, s + width, R(beta), NEUMANN_BC)
    lam = first_eigenvalue(p).lam
    assert first_eigenvalue(p.scaled(2.0)).lam == pytest.approx(lam / 4, rel=1e-9)


@given(st.floats(1.05, 1.95))
def test_rn_nr_bracket_full(r):
    # max-min characterisation: the smaller mixed eigenvalue never exceeds the full one
    full = eigenvalue(3, 1.0, 2.0, R(1.0), R(1.0))
    assert min(lambda_rn(3, 1.0, r, R(1.0)), lambda_nr(3, r, 2.0, R(1.0))) <= full * (1 + 1e-10)
