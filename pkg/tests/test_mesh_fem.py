import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shellcut.errors import MeshTooCoarse, ZeroNorm
from shellcut.fem import (assemble, boundary_normal_derivative, gradients, rayleigh_quotient,
                          solve_first, weighted_measure)
from shellcut.geometry import AxiDomain, Ball, Spheroid, concentric_shell, perimeter, volume
from shellcut.mesh import AXIS, INNER, OUTER, MeridianMesh, mesh_meridian
from shellcut.radial import DIRICHLET_BC, NEUMANN_BC, BoundaryCondition, eigenvalue

R = BoundaryCondition.robin
RR1 = 1.7915963992923896  # tests/oracles.py


def _solve(dom, h, bi, bo, n=None):
    return solve_first(assemble(mesh_meridian(dom, h), n or dom.n, bi, bo))


def test_concentric_mesh_checks(shell12):
    m = mesh_meridian(shell12, 0.1)
    assert m.grid is not None
    assert np.all(m.areas() > 0)
    assert m.min_angle() > 15.0
    for tag in (INNER, OUTER, AXIS):
        assert m.edges_with_tag(tag).size > 0


def test_eccentric_mesh_quality(eccentric03):
    m = mesh_meridian(eccentric03, 0.05)
    assert m.min_angle() > 15.0
    axis_nodes = m.vertices[m.nodes_with_tag(AXIS)]
    assert np.all(axis_nodes[:, 0] == 0.0)
    assert axis_nodes[:, 1].min() < -0.5 and axis_nodes[:, 1].max() > 0.5


def test_mesh_too_coarse(shell12):
    with pytest.raises(MeshTooCoarse):
        mesh_meridian(shell12, 1.0 / 3.0)


def test_mesh_json_roundtrip(eccentric03):
    m = mesh_meridian(eccentric03, 0.2)
    back = MeridianMesh.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.edge_tags, m.edge_tags)


def test_n2_stiffness_is_standard_p1(shell12):
    m = mesh_meridian(concentric_shell(2, 1.0, 2.0), 0.2)
    asm = assemble(m, 2, NEUMANN_BC, NEUMANN_BC)
    g, area = gradients(m)
    K = np.zeros((m.n_vertices,) * 2)
    for t, tri in enumerate(m.triangles):
        K[np.ix_(tri, tri)] += area[t] * g[t] @ g[t].T
    np.testing.assert_allclose(asm.K.toarray(), K, atol=1e-13)


@pytest.mark.parametrize("bc", [(R(1.0), R(2.0)), (NEUMANN_BC, DIRICHLET_BC)])
def test_ones_vector_identities(eccentric03, bc):
    m = mesh_meridian(eccentric03, 0.1)
    asm = assemble(m, 3, *bc)
    one = np.ones(m.n_vertices)
    assert abs(one @ asm.K @ one) <= 1e-12
    assert one @ asm.M @ one == pytest.approx(weighted_measure(m, 3), rel=1e-12)


def test_bitwise_symmetry(eccentric03):
    asm = assemble(mesh_meridian(eccentric03, 0.1), 3, R(1.0), R(-0.5))
    for A in asm:
        d = (A - A.T).tocsr()
        d.eliminate_zeros()
        assert d.nnz == 0


def test_neumann_neumann_zero(eccentric03):
    sol = _solve(eccentric03, 0.1, NEUMANN_BC, NEUMANN_BC)
    assert abs(sol.lam) <= 1e-9
    assert np.ptp(sol.u) <= 1e-8 * np.abs(sol.u).max()


def test_dd_convergence_order(shell12):
    errs = [_solve(shell12, h, DIRICHLET_BC, DIRICHLET_BC).lam - math.pi ** 2 for h in (0.08, 0.04, 0.02)]
    assert all(e > 0 for e in errs)  # Galerkin upper bound
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.6 <= q <= 4.4 for q in ratios), ratios


def test_rr_matches_radial(shell12):
    e1 = abs(_solve(shell12, 0.04, R(1.0), R(1.0)).lam - RR1)
    e2 = abs(_solve(shell12, 0.02, R(1.0), R(1.0)).lam - RR1)
    assert e1 < 1e-3 and 3.0 < e1 / e2 < 5.0


@pytest.mark.parametrize("bc", [(R(1.0), NEUMANN_BC), (NEUMANN_BC, DIRICHLET_BC), (DIRICHLET_BC, R(1.0))])
def test_mixed_bc_second_order(shell12, bc):
    exact = eigenvalue(3, 1.0, 2.0, *bc)
    e1 = abs(_solve(shell12, 0.08, *bc).lam - exact)
    e2 = abs(_solve(shell12, 0.04, *bc).lam - exact)
    assert 3.0 < e1 / e2 < 5.0


def test_rayleigh_examples(eccentric03):
    asm = assemble(mesh_meridian(eccentric03, 0.1), 3, R(1.0), R(2.0))
    sol = solve_first(asm)
    assert rayleigh_quotient(asm, sol.u) == pytest.approx(sol.lam, rel=1e-12)
    nn = assemble(asm.mesh, 3, NEUMANN_BC, NEUMANN_BC)
    assert abs(rayleigh_quotient(nn, np.ones(asm.mesh.n_vertices))) <= 1e-14
    with pytest.raises(ZeroNorm):
        rayleigh_quotient(asm, np.zeros(asm.mesh.n_vertices))


def test_rayleigh_constant_matches_geometry():
    dom = AxiDomain(3, Spheroid(0.0, 2.0, 2.4), Ball(0.1, 1.0))
    asm = assemble(mesh_meridian(dom, dom.gap / 10), 3, R(1.0), R(2.0))
    rq = rayleigh_quotient(asm, np.ones(asm.mesh.n_vertices))
    expect = (1.0 * perimeter(dom.inner, 3) + 2.0 * perimeter(dom.outer, 3)) / dom.volume()
    assert rq == pytest.approx(expect, rel=0.02)


def test_hopf_signs(eccentric03, shell12):
    sol = _solve(eccentric03, 0.05, R(1.0), R(1.0))
    _, v = boundary_normal_derivative(sol)
    assert np.all(v < 0)
    sol = _solve(shell12, 0.05, R(-1.0), R(-1.0))
    _, v = boundary_normal_derivative(sol)
    assert np.all(v > 0)


def test_neumann_edges_flux_vanishes(shell12):
    tops = []
    for h in (0.08, 0.04):
        sol = _solve(shell12, h, R(1.0), NEUMANN_BC)
        _, v = boundary_normal_derivative(sol, (OUTER,))
        _, all_v = boundary_normal_derivative(sol)
        tops.append(np.abs(v).max() / np.abs(all_v).max())
    assert tops[1] < tops[0] and tops[1] < 0.05


def test_shift_hint_reuse(shell12):
    a = _solve(shell12, 0.08, R(1.0), R(1.0))
    b = solve_first(assemble(mesh_meridian(shell12, 0.08), 3, R(1.0), R(1.0)), shift_hint=a.lam)
    assert b.lam == pytest.approx(a.lam, rel=1e-12)


@settings(max_examples=5)
@given(st.floats(-2.0, 2.0))
def test_translation_invariance(dz):
    dom = AxiDomain(3, Ball(0.2, 2.0), Spheroid(0.0, 0.9, 1.1))
    lam = _solve(dom, 0.1, R(1.0), R(1.0)).lam
    assert _solve(dom.translated(dz), 0.1, R(1.0), R(1.0)).lam == pytest.approx(lam, rel=1e-10)


def test_solution_csv_header(shell12):
    sol = _solve(shell12, 0.2, R(1.0), R(1.0))
    lines = sol.nodal_csv().splitlines()
    assert lines[0] == "rho,z,u" and len(lines) == sol.mesh.n_vertices + 1
