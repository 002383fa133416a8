import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from shellcut.errors import EmptyErosion, NoSignChange, NonConvexProfile, NotNested
from shellcut.geometry import (AxiDomain, Ball, MinkowskiBlend, Polyline, Spheroid, class_residual,
                               concentric_shell, diameter, find_class_member, inner_parallel, inradius,
                               matched_shell_radii, outer_parallel, perimeter, profile_from_dict,
                               quermass_comparison, quermassintegrals, random_convex_polyline,
                               shell_volume, steiner_volume, unit_ball_volume, volume)
from shellcut.geometry.measures import mean_width_quermass

# frozen from tests/oracles.py (frustum sums on 200001 support samples, accurate to ~1e-9)
SPHEROID_12_W2 = 5.781255135391111
CLASS_MEMBER_T = 0.7374479474181075


def test_volume_examples():
    assert volume(Ball(0.0, 2.0), 3) == pytest.approx(32 * math.pi / 3, rel=1e-12)
    assert volume(Ball(0.4, 1.0), 2) == pytest.approx(math.pi, rel=1e-12)
    assert volume(Spheroid(0.0, 1.0, 2.0), 3) == pytest.approx(8 * math.pi / 3, rel=1e-9)


def test_perimeter_examples():
    assert perimeter(Ball(0.0, 2.0), 3) == pytest.approx(16 * math.pi, rel=1e-12)
    assert perimeter(Ball(0.0, 1.5), 2) == pytest.approx(3 * math.pi, rel=1e-12)
    assert perimeter(Spheroid(0.0, 1.0, 2.0), 3) == pytest.approx(O.prolate_area(1.0, 2.0), rel=1e-9)


def test_spheroid_mean_width_against_oracle():
    assert mean_width_quermass(Spheroid(0.0, 1.0, 2.0), 3) == pytest.approx(SPHEROID_12_W2, rel=1e-8)


def test_ball_quermass():
    q = quermassintegrals(Ball(0.0, 2.0), 3)
    om = unit_ball_volume(3)
    np.testing.assert_allclose(q.values, [om * 8, om * 4, om * 2, om], rtol=1e-9)
    np.testing.assert_allclose(quermassintegrals(Ball(0.0, 1.0), 2).values, [math.pi] * 3, rtol=1e-9)


def test_spheroid_quermass_matches_quadrature():
    p = Spheroid(0.0, 1.0, 2.0)
    q = quermassintegrals(p, 3)
    assert q[0] == pytest.approx(volume(p, 3), rel=1e-7)
    assert 3 * q[1] == pytest.approx(perimeter(p, 3), rel=1e-7)
    assert min(m for *_, m in q.af_margins()) > 1e-3


def test_outer_parallel_identities():
    grown = outer_parallel(Ball(0.1, 1.0), 0.5)
    th = np.linspace(0, math.pi, 7)
    np.testing.assert_allclose(grown.support(th), Ball(0.1, 1.5).support(th), rtol=1e-14)
    p = Spheroid(0.0, 1.0, 2.0)
    assert volume(outer_parallel(p, 0.0), 3) == pytest.approx(volume(p, 3), rel=1e-12)


@pytest.mark.parametrize("profile", [Spheroid(0.0, 1.0, 2.0), Polyline(np.array([[0, 1], [1, 0.5], [1, -1], [0, -1.5]], float))])
def test_steiner_exactness_held_out(profile):
    q = quermassintegrals(profile, 3)
    d = diameter(profile)
    for r in np.array([0.013, 0.21, 0.55, 0.9, 1.7]) * d:
        assert steiner_volume(q, r) == pytest.approx(volume(outer_parallel(profile, r), 3), rel=1e-7)


def test_inner_parallel_ball_and_errors():
    assert volume(inner_parallel(Ball(0.0, 2.0), 0.5), 3) == pytest.approx(volume(Ball(0, 1.5), 3), rel=1e-10)
    p = Spheroid(0.0, 1.0, 2.0)
    assert volume(inner_parallel(p, 0.0), 3) == pytest.approx(volume(p, 3), rel=1e-12)
    with pytest.raises(EmptyErosion):
        inner_parallel(Ball(0.0, 1.0), 1.0)


def test_inner_parallel_lemma_random_body():
    p = random_convex_polyline(np.random.default_rng(11))
    r = inradius(p)
    for frac in (0.3, 0.6):
        t, d = frac * r, 1e-4 * r
        dp = -(perimeter(inner_parallel(p, t + d), 3) - perimeter(inner_parallel(p, t - d), 3)) / (2 * d)
        w2 = quermassintegrals(inner_parallel(p, t), 3)[2]
        assert dp >= 6 * w2 * (1 - 1e-6)


def test_invalid_profiles():
    with pytest.raises(NonConvexProfile):
        Ball(0.0, -1.0)
    with pytest.raises(NotNested):
        AxiDomain(3, Ball(0.0, 1.0), Ball(0.0, 2.0))
    with pytest.raises(ValueError):
        AxiDomain(1, Ball(0.0, 2.0), Ball(0.0, 1.0))


def test_profile_roundtrip():
    p = MinkowskiBlend(Ball(0.0, 1.0), Spheroid(0.2, 1.0, 1.5), 0.3)
    assert profile_from_dict(p.to_dict()).to_dict() == p.to_dict()
    with pytest.raises(ValueError):
        profile_from_dict({"kind": "ball", "center_z": 0, "radius": 1, "extra": 2})


def test_class_residual_examples(shell12, eccentric03):
    assert abs(class_residual(shell12)) <= 1e-8
    assert abs(class_residual(eccentric03)) <= 1e-8


def test_class_family_endpoint_signs():
    bi, oi, oo, bo = Ball(0.0, 0.5), Spheroid(0.0, 1.0, 1.2), Spheroid(0.0, 2.0, 2.4), Ball(0.0, 4.0)
    f10 = class_residual(AxiDomain(3, bo, oi))  # a = 1: outer B_out, b = 0: inner Omega_in
    f01 = class_residual(AxiDomain(3, oo, bi))
    assert f10 > 0 > f01


def test_find_class_member_regression():
    a, b, dom = find_class_member(Ball(0.0, 0.5), Spheroid(0.0, 1.0, 1.2), Spheroid(0.0, 2.0, 2.4),
                                  Ball(0.0, 4.0), 3)
    assert 0 < a < 1 and b == pytest.approx(1 - a, abs=1e-15)
    assert a == pytest.approx(CLASS_MEMBER_T, abs=1e-7)
    assert abs(class_residual(dom)) <= 1e-10


def test_find_class_member_balls_tie_break():
    a, b, _ = find_class_member(Ball(0, 0.5), Ball(0, 1.0), Ball(0, 2.0), Ball(0, 4.0), 3)
    assert (a, b) == (0.5, 0.5)


def test_find_class_member_errors():
    with pytest.raises(NotNested):
        find_class_member(Ball(0, 1.5), Ball(0, 1.0), Ball(0, 2.0), Ball(0, 4.0), 3)
    with pytest.raises(NoSignChange):
        # swapped roles make the endpoint signs wrong
        find_class_member(Ball(0, 0.5), Ball(0, 0.7), Spheroid(0, 2.0, 2.4), Spheroid(0, 2.1, 2.6), 3)


def test_matched_radii(shell12, eccentric03):
    for rule in ("main", "dpp", "ppt"):
        assert matched_shell_radii(shell12, rule) == pytest.approx((1.0, 2.0), rel=1e-10)
    assert matched_shell_radii(eccentric03, "main") == pytest.approx((1.0, 2.0), rel=1e-10)
    dom = AxiDomain(3, Ball(0.0, 2.2), Spheroid(0.0, 0.8, 1.2))
    r, R = matched_shell_radii(dom, "dpp")
    assert shell_volume(3, r, R) == pytest.approx(dom.volume(), rel=1e-8)


def test_quermass_comparison_examples():
    for j, wj, wb in quermass_comparison(Ball(0.3, 1.2), 3):
        assert wj == pytest.approx(wb, rel=1e-8)
    rows = quermass_comparison(Spheroid(0.0, 1.0, 2.0), 3)
    assert all(wj < wb for j, wj, wb in rows if j <= 1)


@given(st.floats(0.3, 3.0), st.sampled_from([0.5, 2.0]))
def test_scaling_covariance(a, t):
    p = Spheroid(0.0, a, 1.0)
    q, qt = quermassintegrals(p, 3), quermassintegrals(p.scaled(t), 3)
    for i in range(4):
        assert qt[i] == pytest.approx(t ** (3 - i) * q[i], rel=1e-8)


@given(st.integers(0, 10_000))
def test_af_chain_random_polylines(seed):
    p = random_convex_polyline(np.random.default_rng(seed))
    q = quermassintegrals(p, 3)
    margins = [m for *_, m in q.af_margins()]
    assert min(margins) > 1e-8


@given(st.floats(-3.0, 3.0))
def test_class_residual_translation_invariant(dz):
    dom = AxiDomain(3, Spheroid(0.1, 2.0, 2.4), Ball(0.0, 1.0))
    assert class_residual(dom.translated(dz)) == pytest.approx(class_residual(dom), rel=1e-9, abs=1e-12)


@given(st.floats(0.05, 2.0))
def test_steiner_property_spheroid(rho):
    p = Spheroid(0.0, 0.7, 1.3)
    assert steiner_volume(quermassintegrals(p, 3), rho) == pytest.approx(volume(outer_parallel(p, rho), 3), rel=1e-7)


def test_regularity_flag():
    assert concentric_shell(3, 1.0, 2.0).regularity == "C11"
    poly = random_convex_polyline(np.random.default_rng(3), n_points=12, size=3.0)
    assert AxiDomain(3, poly, Ball(0.0, 0.1)).regularity == "outside stated regularity"
