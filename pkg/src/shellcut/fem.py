"""Weighted P1 finite elements for the axisymmetric Robin Laplacian on the meridian."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NoConvergence, NotPositiveDefinite, ZeroNorm
from .mesh import INNER, INTERFACE, OUTER, MeridianMesh
from .radial import BoundaryCondition

__all__ = ["Assembly", "FemSolution", "assemble", "solve_first", "boundary_normal_derivative",
           "rayleigh_quotient", "gradients", "weighted_measure"]

_G = 0.5 / math.sqrt(3.0)
_MID = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass(eq=False)
class Assembly:
    """Stiffness ``K``, Robin ``B`` and mass ``M`` on all nodes, plus the free-node mask."""

    mesh: MeridianMesh
    n: int
    bcs: dict
    K: sp.csr_matrix
    B: sp.csr_matrix
    M: sp.csr_matrix
    free: np.ndarray
    weighted_area: float
    weighted_boundary: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.K, self.B, self.M))

    @property
    def A(self) -> sp.csr_matrix:
        return (self.K + self.B).tocsr()


def _sym(a: sp.spmatrix) -> sp.csr_matrix:
    # (x + y)/2 is commutative in floating point, so the result is bitwise symmetric
    a = a.tocsr()
    return ((a + a.T) * 0.5).tocsr()


def gradients(mesh: MeridianMesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients ``(T, 3, 2)`` and areas ``(T,)``."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    g = np.empty(p.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (y[:, j] - y[:, k]) / (2 * area)
        g[:, i, 1] = (x[:, k] - x[:, j]) / (2 * area)
    return g, area


def _weights(mesh: MeridianMesh, n: int) -> np.ndarray:
    rho = np.einsum("qi,ti->tq", _MID, mesh.vertices[mesh.triangles][..., 0])
    return rho ** (n - 2)


def _edge_quadrature(mesh: MeridianMesh, edges: np.ndarray, n: int):
    a = mesh.vertices[mesh.boundary_edges[edges, 0]]
    b = mesh.vertices[mesh.boundary_edges[edges, 1]]
    length = np.hypot(*(b - a).T)
    s = np.array([0.5 - _G, 0.5 + _G])
    rho = a[:, None, 0] * (1 - s) + b[:, None, 0] * s
    return length, s, rho ** (n - 2)


def weighted_measure(mesh: MeridianMesh, n: int) -> float:
    _, area = gradients(mesh)
    return float((area * _weights(mesh, n).mean(1)).sum())


def assemble(mesh: MeridianMesh, n: int, bc_inner: BoundaryCondition,
             bc_outer: BoundaryCondition, bc_interface: BoundaryCondition | None = None) -> Assembly:
    """Assemble the weighted forms with weight ``rho**(n-2)``.

    Volume integrals use the three mid-edge points, Robin edges two-point Gauss.
    Dirichlet nodes are marked not free and removed at solve time.
    """
    nv = mesh.n_vertices
    tri = mesh.triangles
    g, area = gradients(mesh)
    w = _weights(mesh, n)
    wbar = w.mean(1)
    ke = np.einsum("tid,tjd->tij", g, g) * (area * wbar)[:, None, None]
    me = np.einsum("tq,qi,qj->tij", w, _MID, _MID) * (area / 3.0)[:, None, None]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    K = _sym(sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(nv, nv)))
    M = _sym(sp.coo_matrix((me.ravel(), (rows, cols)), shape=(nv, nv)))

    bcs = {INNER: bc_inner, OUTER: bc_outer}
    if bc_interface is not None:
        bcs[INTERFACE] = bc_interface
    free = np.ones(nv, dtype=bool)
    b_rows, b_cols, b_vals = [], [], []
    boundary = {}
    for tag, bc in bcs.items():
        edges = mesh.edges_with_tag(tag)
        if edges.size == 0:
            boundary[tag] = 0.0
            continue
        length, s, wq = _edge_quadrature(mesh, edges, n)
        boundary[tag] = float((0.5 * length * wq.sum(1)).sum())
        if bc.kind == "dirichlet":
            free[mesh.boundary_edges[edges].ravel()] = False
        elif bc.kind == "robin" and bc.beta != 0.0:
            phi = np.stack([1 - s, s], 1)  # (q, 2)
            be = bc.beta * 0.5 * np.einsum("e,eq,qi,qj->eij", length, wq, phi, phi)
            ev = mesh.boundary_edges[edges]
            b_rows.append(np.repeat(ev, 2, axis=1).ravel())
            b_cols.append(np.tile(ev, (1, 2)).ravel())
            b_vals.append(be.ravel())
    if b_vals:
        B = _sym(sp.coo_matrix((np.concatenate(b_vals),
                                (np.concatenate(b_rows), np.concatenate(b_cols))), shape=(nv, nv)))
    else:
        B = sp.csr_matrix((nv, nv))
    return Assembly(mesh, n, bcs, K, B, M, free, float((area * wbar).sum()), boundary)


@dataclass(eq=False)
class FemSolution:
    assembly: Assembly
    lam: float
    u: np.ndarray
    iterations: int
    eig_residual: float
    shift: float

    @property
    def mesh(self) -> MeridianMesh:
        return self.assembly.mesh

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "iterations": self.iterations,
                "eig_residual": self.eig_residual, "shift": self.shift,
                "u": self.u.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def nodal_csv(self) -> str:
        lines = ["rho,z,u"]
        lines += [f"{r!r},{z!r},{v!r}" for (r, z), v in zip(self.mesh.vertices.tolist(), self.u.tolist())]
        return "\n".join(lines) + "\n"


def _default_shift(asm: Assembly) -> float:
    total = 0.0
    for tag, bc in asm.bcs.items():
        if bc.kind == "robin":
            total += abs(bc.beta) * asm.weighted_boundary.get(tag, 0.0)
    return -(1.0 + total / asm.weighted_area)


def _factor_pd(mat: sp.csc_matrix):
    lu = splu(mat, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    d = lu.U.diagonal()
    ok = bool(np.all(d > 0)) and np.array_equal(lu.perm_r, lu.perm_c)
    return lu, ok


def solve_first(asm: Assembly, shift_hint: float | None = None, tol: float = 1e-12,
                max_iter: int = 500, res_tol: float = 1e-10) -> FemSolution:
    """Lowest eigenpair of ``(K + B) u = lam M u`` by shift-invert inverse iteration.

    The shift is verified to lie below the spectrum by checking that the sparse
    factorisation of ``K + B - sigma M`` has a positive pivot sequence.
    """
    A = asm.A
    M = asm.M
    f = asm.free
    Af = A[f][:, f].tocsc()
    Mf = M[f][:, f].tocsc()
    if shift_hint is not None:
        sigma = shift_hint - 0.5 * abs(shift_hint) - 1e-3
    else:
        sigma = _default_shift(asm)
    for _ in range(7):
        lu, ok = _factor_pd((Af - sigma * Mf).tocsc())
        if ok:
            break
        sigma = min(2.0 * sigma, sigma - 1.0)
    else:
        raise NotPositiveDefinite(f"no shift below the spectrum found (last {sigma:.6g})")
    v = np.ones(Af.shape[0])
    v /= math.sqrt(v @ (Mf @ v))
    lam_old = (v @ (Af @ v))
    settled = False
    res = math.inf
    for it in range(1, max_iter + 1):
        v = lu.solve(Mf @ v)
        nrm = v @ (Mf @ v)
        if not nrm > 0:
            raise ZeroNorm("iterate lost its mass norm")
        v /= math.sqrt(nrm)
        av = Af @ v
        lam = float(v @ av)
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            # the quotient settles quadratically faster than the vector; also ask for a small residual
            settled = True
            res = float(np.linalg.norm(av - lam * (Mf @ v)) / np.linalg.norm(av)) if np.any(av) else 0.0
            if res <= res_tol:
                break
        lam_old = lam
    if not settled:
        raise NoConvergence(f"inverse iteration did not settle in {max_iter} steps")
    if v.sum() < 0:
        v = -v
    u = np.zeros(asm.mesh.n_vertices)
    u[f] = v
    return FemSolution(asm, lam, u, it, res, float(sigma))


def rayleigh_quotient(asm: Assembly, w: np.ndarray) -> float:
    """Discrete Rayleigh quotient of nodal values ``w`` (Dirichlet nodes are zeroed)."""
    w = np.where(asm.free, np.asarray(w, float), 0.0)
    den = w @ (asm.M @ w)
    if not den > 0:
        raise ZeroNorm("test function has zero weighted mass")
    return float(w @ (asm.A @ w) / den)


def boundary_normal_derivative(sol: FemSolution, tags=(INNER, OUTER)) -> tuple[np.ndarray, np.ndarray]:
    """Outward normal derivative of ``u`` on the boundary edges carrying ``tags``.

    Returns edge indices and one value per edge from the owning triangle's gradient.
    """
    mesh = sol.mesh
    edges = np.flatnonzero(np.isin(mesh.edge_tags, list(tags)))
    t = mesh.edge_triangle[edges]
    g, _ = gradients(mesh)
    grad_u = np.einsum("tid,ti->td", g[t], sol.u[mesh.triangles[t]])
    a = mesh.vertices[mesh.boundary_edges[edges, 0]]
    b = mesh.vertices[mesh.boundary_edges[edges, 1]]
    tang = b - a
    nrm = np.stack([tang[:, 1], -tang[:, 0]], 1) / np.hypot(*tang.T)[:, None]
    centroid = mesh.vertices[mesh.triangles[t]].mean(1)
    flip = ((centroid - a) * nrm).sum(1) > 0
    nrm[flip] *= -1
    return edges, (grad_u * nrm).sum(1)
