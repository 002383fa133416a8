"""Gradient-flow basins of the meridian eigenfunction and the cut between them.

The P1 gradient is constant on each triangle, so the flow ``z' = -grad u`` is
integrated exactly: inside a triangle the path is a straight segment to the
exit edge. Where the velocities on both sides of an edge point into it, the
path slides along the edge (the tangential derivative is continuous for P1);
at a vertex it enters whichever incident triangle its own velocity points
into, or otherwise slides down the steepest descending edge.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .errors import PreconditionViolated, SignSpotCheckFailed, StartOutsideMesh, SubmeshDisconnected
from .fem import FemSolution, assemble, gradients, solve_first
from .mesh import AXIS, INNER, INTERFACE, OUTER, MeridianMesh, polar_mesh
from .radial import NEUMANN_BC, BoundaryCondition

__all__ = ["Terminal", "Direction", "FlowTrace", "CutResult", "Tracer", "trace_flow",
           "classify_basins", "cut_diagnostics", "cut_generic_field", "torsion_field",
           "interface_normal_derivative", "fitted_interface", "recovered_gradient"]

INNER_LABEL, OUTER_LABEL, UNRESOLVED = 0, 1, 2
_LABEL_NAMES = ("inner", "outer", "unresolved")


class Terminal(Enum):
    HIT_INNER = 0
    HIT_OUTER = 1
    STAGNATED = 2
    MAX_STEPS = 3


class Direction(Enum):
    DESCEND = 1
    ASCEND = -1


@dataclass(eq=False)
class FlowTrace:
    start: tuple
    points: np.ndarray
    terminal: Terminal
    grad_norm: float     # |grad u| where the trace ended, meaningful for STAGNATED
    values: np.ndarray   # u along ``points``

    def to_dict(self) -> dict:
        return {"start": list(self.start), "terminal": self.terminal.name.lower(),
                "grad_norm": self.grad_norm, "points": self.points.tolist()}


# ----------------------------------------------------------------------------- kernel

@numba.njit(cache=True)
def _after_exit(t, ie, lam, verts, tris, nbr, ltag, vel, gb, record, pts, npts):
    """Resolve the state after leaving triangle ``t`` through edge ``ie``.

    Returns (mode, t_or_vertex, code, px, pz): mode 0 = inside triangle,
    1 = at vertex, 2 = terminal with ``code``.
    """
    lam[ie] = 0.0
    s = 0.0
    for i in range(3):
        if lam[i] < 0.0:
            lam[i] = 0.0
        s += lam[i]
    px = 0.0
    pz = 0.0
    for i in range(3):
        lam[i] /= s
        px += lam[i] * verts[tris[t, i], 0]
        pz += lam[i] * verts[tris[t, i], 1]
    if record:
        pts[npts[0], 0] = px
        pts[npts[0], 1] = pz
        npts[0] += 1
    j1 = (ie + 1) % 3
    j2 = (ie + 2) % 3
    if lam[j1] <= 1e-12:
        return 1, tris[t, j2], -1, px, pz
    if lam[j2] <= 1e-12:
        return 1, tris[t, j1], -1, px, pz
    tag = ltag[t, ie]
    if tag == 0 or tag == 1:
        return 2, t, tag, px, pz
    a = tris[t, j1]
    b = tris[t, j2]
    ex = verts[b, 0] - verts[a, 0]
    ez = verts[b, 1] - verts[a, 1]
    vt = vel[t, 0] * ex + vel[t, 1] * ez
    if tag < 0:
        t2 = nbr[t, ie]
        # outward normal of t across edge ie is -grad(lambda_ie)
        vn = -(vel[t2, 0] * gb[t, ie, 0] + vel[t2, 1] * gb[t, ie, 1])
        vmag = math.sqrt(vel[t2, 0] ** 2 + vel[t2, 1] ** 2)
        if vn > 1e-12 * vmag * math.sqrt(gb[t, ie, 0] ** 2 + gb[t, ie, 1] ** 2):
            return 0, t2, -1, px, pz
    # slide along the edge (both sides push into it, or it is the axis)
    if vt > 0.0:
        target = b
    elif vt < 0.0:
        target = a
    else:
        return 2, t, 2, px, pz
    if record:
        pts[npts[0], 0] = verts[target, 0]
        pts[npts[0], 1] = verts[target, 1]
        npts[0] += 1
    return 1, target, -1, verts[target, 0], verts[target, 1]


@numba.njit(cache=True)
def _trace(t0, px, pz, verts, tris, nbr, ltag, vtag, vel, gb, speed, u, sgn,
           vt_ptr, vt_idx, eps, max_steps, record, pts):
    npts = np.zeros(1, dtype=np.int64)
    if record:
        pts[0, 0] = px
        pts[0, 1] = pz
        npts[0] = 1
    mode = 0
    cur = t0
    lam = np.empty(3)
    d = np.empty(3)
    last_speed = speed[t0]
    for step in range(max_steps):
        if mode == 0:
            t = cur
            last_speed = speed[t]
            if speed[t] < eps:
                return 2, npts[0], last_speed
            for i in range(3):
                j = tris[t, (i + 1) % 3]
                lam[i] = gb[t, i, 0] * (px - verts[j, 0]) + gb[t, i, 1] * (pz - verts[j, 1])
                d[i] = gb[t, i, 0] * vel[t, 0] + gb[t, i, 1] * vel[t, 1]
            tau = np.inf
            ie = -1
            for i in range(3):
                if d[i] < 0.0:
                    ti = max(lam[i], 0.0) / (-d[i])
                    if ti < tau:
                        tau = ti
                        ie = i
            if ie < 0:
                return 2, npts[0], last_speed
            for i in range(3):
                lam[i] += tau * d[i]
            mode, cur, code, px, pz = _after_exit(t, ie, lam, verts, tris, nbr, ltag, vel, gb,
                                                   record, pts, npts)
            if mode == 2:
                return code, npts[0], last_speed
        else:
            k = cur
            if vtag[k] == 0 or vtag[k] == 1:
                return vtag[k], npts[0], last_speed
            best = -1
            best_rate = 0.0
            best_loc = -1
            for q in range(vt_ptr[k], vt_ptr[k + 1]):
                t = vt_idx[q]
                if speed[t] < eps:
                    continue
                loc = 0
                for i in range(3):
                    if tris[t, i] == k:
                        loc = i
                # velocity enters t iff it raises both other barycentrics
                d1 = gb[t, (loc + 1) % 3, 0] * vel[t, 0] + gb[t, (loc + 1) % 3, 1] * vel[t, 1]
                d2 = gb[t, (loc + 2) % 3, 0] * vel[t, 0] + gb[t, (loc + 2) % 3, 1] * vel[t, 1]
                if d1 >= 0.0 and d2 >= 0.0 and speed[t] > best_rate:
                    best = t
                    best_rate = speed[t]
                    best_loc = loc
            if best >= 0:
                t = best
                dk = gb[t, best_loc, 0] * vel[t, 0] + gb[t, best_loc, 1] * vel[t, 1]
                tau = 1.0 / (-dk)
                for i in range(3):
                    lam[i] = tau * (gb[t, i, 0] * vel[t, 0] + gb[t, i, 1] * vel[t, 1])
                lam[best_loc] = 0.0
                last_speed = speed[t]
                mode, cur, code, px, pz = _after_exit(t, best_loc, lam, verts, tris, nbr, ltag,
                                                       vel, gb, record, pts, npts)
                if mode == 2:
                    return code, npts[0], last_speed
                continue
            # no triangle accepts the flow: slide down the steepest incident edge
            target = -1
            best_rate = 0.0
            for q in range(vt_ptr[k], vt_ptr[k + 1]):
                t = vt_idx[q]
                for i in range(3):
                    m = tris[t, i]
                    if m == k:
                        continue
                    ln = math.sqrt((verts[m, 0] - verts[k, 0]) ** 2 + (verts[m, 1] - verts[k, 1]) ** 2)
                    rate = sgn * (u[k] - u[m]) / ln
                    if rate > best_rate:
                        best_rate = rate
                        target = m
            if target < 0 or best_rate < eps:
                return 2, npts[0], best_rate
            last_speed = best_rate
            if record:
                pts[npts[0], 0] = verts[target, 0]
                pts[npts[0], 1] = verts[target, 1]
                npts[0] += 1
            cur = target
            px = verts[target, 0]
            pz = verts[target, 1]
    return 3, npts[0], last_speed


@numba.njit(cache=True)
def _trace_many(t_start, p_start, verts, tris, nbr, ltag, vtag, vel, gb, speed, u, sgn,
                vt_ptr, vt_idx, eps, max_steps):
    out = np.empty(t_start.shape[0], dtype=np.int64)
    dummy = np.empty((1, 2))
    for s in range(t_start.shape[0]):
        code, _, _ = _trace(t_start[s], p_start[s, 0], p_start[s, 1], verts, tris, nbr, ltag,
                            vtag, vel, gb, speed, u, sgn, vt_ptr, vt_idx, eps, max_steps,
                            False, dummy)
        out[s] = code
    return out


# ----------------------------------------------------------------------------- tracer

class Tracer:
    """Precomputed mesh tables for tracing the flow of a nodal P1 field."""

    def __init__(self, mesh: MeridianMesh, u: np.ndarray, direction: Direction):
        self.mesh = mesh
        self.u = np.ascontiguousarray(u, dtype=float)
        self.direction = direction
        gb, area = gradients(mesh)
        self.gb = np.ascontiguousarray(gb)
        self.area = area
        grad = np.einsum("tid,ti->td", gb, self.u[mesh.triangles])
        self.grad = grad
        self.vel = np.ascontiguousarray(-direction.value * grad)
        self.speed = np.hypot(grad[:, 0], grad[:, 1])
        self.eps = 1e-7 * float(self.speed.max())
        tris = mesh.triangles
        self.nbr = np.ascontiguousarray(mesh.neighbors)
        ltag = -np.ones((mesh.n_triangles, 3), dtype=np.int64)
        nv = mesh.n_vertices
        key = {}
        for e, (a, b) in enumerate(mesh.boundary_edges.tolist()):
            key[(min(a, b), max(a, b))] = int(mesh.edge_tags[e])
        for t in np.flatnonzero((self.nbr < 0).any(1)).tolist():
            for i in range(3):
                if self.nbr[t, i] < 0:
                    a, b = int(tris[t, (i + 1) % 3]), int(tris[t, (i + 2) % 3])
                    ltag[t, i] = key.get((min(a, b), max(a, b)), AXIS)
        self.ltag = ltag
        vtag = -np.ones(nv, dtype=np.int64)
        for tag in (AXIS, INTERFACE, INNER, OUTER):
            vtag[mesh.nodes_with_tag(tag)] = tag if tag in (INNER, OUTER) else AXIS
        self.vtag = vtag
        order = np.argsort(tris.ravel(), kind="stable")
        self.vt_idx = (order // 3).astype(np.int64)
        counts = np.bincount(tris.ravel(), minlength=nv)
        self.vt_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.max_steps = 10 * mesh.n_triangles
        self.verts = np.ascontiguousarray(mesh.vertices)
        self.tris = np.ascontiguousarray(tris)

    def _args(self):
        return (self.verts, self.tris, self.nbr, self.ltag, self.vtag, self.vel, self.gb,
                self.speed, self.u, float(self.direction.value), self.vt_ptr, self.vt_idx,
                self.eps, self.max_steps)

    def locate(self, point) -> int:
        p = np.asarray(point, dtype=float)
        tris = self.mesh.triangles
        lam = np.empty((tris.shape[0], 3))
        for i in range(3):
            xj = self.verts[tris[:, (i + 1) % 3]]
            lam[:, i] = (self.gb[:, i] * (p - xj)).sum(1)
        inside = np.flatnonzero(lam.min(1) >= -1e-12)
        if inside.size == 0:
            raise StartOutsideMesh(f"start point {tuple(p)} is not in the meshed domain")
        return int(inside[0])

    def _critical_vertex(self, start) -> int:
        """Vertex at ``start`` that is a discrete local extremum of u, else -1."""
        t = self.locate(start)
        tri = self.tris[t]
        d = np.hypot(*(self.verts[tri] - np.asarray(start, float)).T)
        k = int(np.argmin(d))
        if d[k] > 1e-12 * self.mesh.h:
            return -1
        v = int(tri[k])
        ring = np.unique(self.tris[self.vt_idx[self.vt_ptr[v]:self.vt_ptr[v + 1]]])
        diff = self.u[ring[ring != v]] - self.u[v]
        # the flow starting exactly at a critical point stays there
        return v if np.all(diff <= 0) or np.all(diff >= 0) else -1

    def trace(self, start) -> FlowTrace:
        v = self._critical_vertex(start)
        if v >= 0:
            p = self.verts[v][None].copy()
            return FlowTrace(tuple(map(float, start)), p, Terminal.STAGNATED, 0.0, self.u[[v]])
        t0 = self.locate(start)
        pts = np.empty((self.max_steps + 2, 2))
        code, npts, spd = _trace(t0, float(start[0]), float(start[1]), *self._args()[:10],
                                 self.vt_ptr, self.vt_idx, self.eps, self.max_steps, True, pts)
        pts = pts[:npts].copy()
        return FlowTrace(tuple(map(float, start)), pts, Terminal(int(code)), float(spd),
                         self._values(pts))

    def _values(self, pts: np.ndarray) -> np.ndarray:
        # evaluate along the path by locating each point; used for monotonicity checks
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            t = self.locate(p)
            xj = self.verts[self.mesh.triangles[t]]
            lam = [(self.gb[t, k] * (p - xj[(k + 1) % 3])).sum() for k in range(3)]
            out[i] = float(np.dot(lam, self.u[self.mesh.triangles[t]]))
        return out

    def trace_many(self, tri_index: np.ndarray, points: np.ndarray) -> np.ndarray:
        return _trace_many(np.ascontiguousarray(tri_index, dtype=np.int64),
                           np.ascontiguousarray(points, dtype=float), *self._args())


def _direction_for(bcs: dict) -> Direction:
    signs = []
    for tag in (INNER, OUTER):
        bc = bcs[tag]
        if bc.kind == "dirichlet":
            signs.append(1)
        elif bc.kind == "robin" and bc.beta != 0.0:
            signs.append(1 if bc.beta > 0 else -1)
        else:
            signs.append(0)
    if signs[0] == 0 or signs[0] != signs[1]:
        raise PreconditionViolated("basins need both Robin parameters of one strict sign")
    return Direction.DESCEND if signs[0] > 0 else Direction.ASCEND


def trace_flow(sol: FemSolution, start, direction: Direction | None = None) -> FlowTrace:
    """Follow ``-grad u`` (``DESCEND``) or ``+grad u`` (``ASCEND``) from ``start``."""
    if direction is None:
        direction = _direction_for(sol.assembly.bcs)
    return Tracer(sol.mesh, sol.u, direction).trace(start)


# ----------------------------------------------------------------------------- basins

@dataclass(eq=False)
class CutResult:
    mesh: MeridianMesh
    labels: np.ndarray              # final per-triangle label
    raw_labels: np.ndarray          # before imputation
    interface_edges: np.ndarray     # (k, 2) vertex pairs
    interface: list                 # polylines as vertex-index arrays
    r_star_estimate: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def fraction_unresolved(self) -> float:
        return float(np.mean(self.raw_labels == UNRESOLVED))

    def to_dict(self) -> dict:
        return {
            "labels": {name: np.flatnonzero(self.labels == i).tolist()
                       for i, name in enumerate(_LABEL_NAMES)},
            "interface": [self.mesh.vertices[p].tolist() for p in self.interface],
            "r_star_estimate": self.r_star_estimate,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def interface_csv(self) -> str:
        lines = ["polyline,rho,z"]
        for k, p in enumerate(self.interface):
            lines += [f"{k},{r!r},{z!r}" for r, z in self.mesh.vertices[p].tolist()]
        return "\n".join(lines) + "\n"


def _impute(mesh: MeridianMesh, raw: np.ndarray) -> np.ndarray:
    labels = raw.copy()
    nbr = mesh.neighbors
    while True:
        todo = np.flatnonzero(labels == UNRESOLVED)
        if todo.size == 0:
            return labels
        nl = np.where(nbr[todo] >= 0, labels[np.maximum(nbr[todo], 0)], UNRESOLVED)
        n_in = (nl == INNER_LABEL).sum(1)
        n_out = (nl == OUTER_LABEL).sum(1)
        decided = (n_in + n_out) > 0
        if not decided.any():
            return labels
        new = np.where(n_in >= n_out, INNER_LABEL, OUTER_LABEL)
        labels[todo[decided]] = new[decided]


def _chain(edges: np.ndarray) -> list:
    """Split an edge set into vertex polylines, starting from open ends."""
    adj: dict[int, list[int]] = {}
    for a, b in edges.tolist():
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    used = set()
    lines = []
    starts = sorted(v for v, nb in adj.items() if len(nb) != 2) + sorted(adj)
    for s in starts:
        for nxt in sorted(adj[s]):
            if (min(s, nxt), max(s, nxt)) in used:
                continue
            line = [s]
            prev, cur = s, nxt
            used.add((min(s, cur), max(s, cur)))
            line.append(cur)
            while len(adj[cur]) == 2:
                cand = [w for w in adj[cur] if (min(cur, w), max(cur, w)) not in used]
                if not cand:
                    break
                prev, cur = cur, cand[0]
                used.add((min(prev, cur), max(prev, cur)))
                line.append(cur)
            lines.append(np.array(line, dtype=np.int64))
    return lines


def _components(mesh: MeridianMesh, mask: np.ndarray) -> int:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return 0
    pos = -np.ones(mesh.n_triangles, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    nb = mesh.neighbors[idx]
    rows, cols = np.nonzero((nb >= 0) & mask[np.maximum(nb, 0)])
    graph = sp.coo_matrix((np.ones(rows.size), (rows, pos[nb[rows, cols]])),
                          shape=(idx.size, idx.size))
    return int(connected_components(graph, directed=False)[0])


def _seeds(tracer: Tracer, seeds: str):
    mesh = tracer.mesh
    p = mesh.vertices[mesh.triangles]
    bary = p.mean(1)
    tri = np.arange(mesh.n_triangles)
    if seeds == "barycenter":
        return [(tri, bary)]
    if seeds == "double":
        out = [(tri, bary)]
        for i in range(3):
            mid = 0.5 * (p[:, (i + 1) % 3] + p[:, (i + 2) % 3])
            out.append((tri, mid + 1e-3 * (bary - mid)))
        return out
    raise ValueError(f"unknown seed rule {seeds!r}")


def _basins(mesh: MeridianMesh, u: np.ndarray, direction: Direction, n: int,
            seeds: str = "barycenter", center=None) -> CutResult:
    tracer = Tracer(mesh, u, direction)
    codes = [tracer.trace_many(t, pts) for t, pts in _seeds(tracer, seeds)]
    codes = np.stack(codes)
    votes_in = (codes == Terminal.HIT_INNER.value).sum(0)
    votes_out = (codes == Terminal.HIT_OUTER.value).sum(0)
    raw = np.full(mesh.n_triangles, UNRESOLVED, dtype=np.int64)
    first = codes[0]
    raw[(votes_in > votes_out) | ((votes_in == votes_out) & (first == 0) & (votes_in > 0))] = INNER_LABEL
    raw[(votes_out > votes_in) | ((votes_in == votes_out) & (first == 1) & (votes_out > 0))] = OUTER_LABEL
    labels = _impute(mesh, raw)
    nb = mesh.neighbors
    t_idx, loc = np.nonzero(nb >= 0)
    other = nb[t_idx, loc]
    keep = (t_idx < other) & (labels[t_idx] != labels[other]) \
        & (labels[t_idx] != UNRESOLVED) & (labels[other] != UNRESOLVED)
    tri = mesh.triangles
    edges = np.stack([tri[t_idx[keep], (loc[keep] + 1) % 3], tri[t_idx[keep], (loc[keep] + 2) % 3]], 1)
    wa = tracer.area * mesh.vertices[tri][..., 0].mean(1) ** (n - 2)
    terminals = {t.name.lower(): int((first == t.value).sum()) for t in Terminal}
    diag = {
        "terminals": terminals,
        "fraction_unresolved": float(np.mean(raw == UNRESOLVED)),
        "imputed": int(np.sum((raw == UNRESOLVED) & (labels != UNRESOLVED))),
        "inner_components": _components(mesh, labels == INNER_LABEL),
        "outer_components": _components(mesh, labels == OUTER_LABEL),
        "resolved_area_fraction": float(wa[labels != UNRESOLVED].sum() / wa.sum()),
    }
    r_star = None
    if center is not None and edges.size:
        vid = np.unique(edges)
        r = np.hypot(mesh.vertices[vid, 0], mesh.vertices[vid, 1] - center)
        r_star = float(r.mean())
        diag["interface_radius_rel_std"] = float(r.std() / r.mean())
    return CutResult(mesh, labels, raw, edges.astype(np.int64), _chain(edges), r_star, diag)


def _shell_center(domain) -> float | None:
    from .geometry import Ball
    if domain is not None and isinstance(domain.inner, Ball) and isinstance(domain.outer, Ball) \
            and domain.inner.center_z == domain.outer.center_z:
        return float(domain.inner.center_z)
    return None


def classify_basins(sol: FemSolution, seeds: str = "barycenter", domain=None) -> CutResult:
    """Label triangles by the boundary component their flow line reaches.

    Pass ``domain`` to get a radius estimate of the interface for concentric shells.
    """
    direction = _direction_for(sol.assembly.bcs)
    return _basins(sol.mesh, sol.u, direction, sol.assembly.n, seeds, _shell_center(domain))


# ----------------------------------------------------------------------------- diagnostics

def _smooth_normals(mesh: MeridianMesh, cut: CutResult, points: np.ndarray) -> np.ndarray:
    """Unit normals of the interface at ``points`` from a local quadratic fit of r(alpha).

    The interface is a staircase of mesh edges whose own normals are off by O(1);
    the fitted curve recovers the normal of the underlying level set to O(h).
    """
    zc = mesh.center_z
    vid = np.unique(cut.interface_edges)
    v = mesh.vertices[vid]
    a_v = np.arctan2(v[:, 0], v[:, 1] - zc)
    r_v = np.hypot(v[:, 0], v[:, 1] - zc)
    a_p = np.arctan2(points[:, 0], points[:, 1] - zc)
    width = 4.0 * mesh.h / max(float(r_v.mean()), mesh.h)
    normals = np.empty_like(points)
    for i, a0 in enumerate(a_p):
        sel = np.abs(a_v - a0) <= width
        x = a_v[sel] - a0
        if sel.sum() >= 4:
            c = np.polyfit(x, r_v[sel], 2)
            r0, dr = np.polyval(c, 0.0), c[1]
        else:
            r0, dr = np.hypot(points[i, 0], points[i, 1] - zc), 0.0
        # tangent of (r sin a, zc + r cos a) with respect to a
        tx = dr * math.sin(a0) + r0 * math.cos(a0)
        tz = dr * math.cos(a0) - r0 * math.sin(a0)
        nrm = np.array([tz, -tx])
        nrm /= np.hypot(*nrm)
        # orient away from the centre
        if nrm[0] * math.sin(a0) + nrm[1] * math.cos(a0) < 0:
            nrm = -nrm
        normals[i] = nrm
    return normals


def interface_normal_derivative(mesh: MeridianMesh, u: np.ndarray, cut: CutResult, n: int) -> dict:
    """Normal derivative of ``u`` across the interface, averaged over the two sides."""
    if cut.interface_edges.size == 0:
        return {"max": 0.0, "l2": 0.0, "max_edge_normal": 0.0, "relative_l2": 0.0}
    gb, _ = gradients(mesh)
    grad = np.einsum("tid,ti->td", gb, u[mesh.triangles])
    nb = mesh.neighbors
    tri = mesh.triangles
    e = cut.interface_edges
    # owning triangles on each side
    key = {}
    for t in range(mesh.n_triangles):
        for i in range(3):
            a, b = tri[t, (i + 1) % 3], tri[t, (i + 2) % 3]
            key.setdefault((min(a, b), max(a, b)), []).append(t)
    pairs = np.array([key[(min(a, b), max(a, b))] for a, b in e.tolist()])
    gavg = 0.5 * (grad[pairs[:, 0]] + grad[pairs[:, 1]])
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    mid = 0.5 * (a + b)
    length = np.hypot(*(b - a).T)
    ns = _smooth_normals(mesh, cut, mid)
    val = (gavg * ns).sum(1)
    tang = b - a
    en = np.stack([tang[:, 1], -tang[:, 0]], 1) / length[:, None]
    raw = np.abs((gavg * en).sum(1))
    w = mid[:, 0] ** (n - 2)
    l2 = math.sqrt(float((length * w * val ** 2).sum()))
    gscale = float(np.hypot(grad[:, 0], grad[:, 1]).max())
    return {"max": float(np.abs(val).max()), "l2": l2, "max_edge_normal": float(raw.max()),
            "relative_l2": l2 / gscale if gscale > 0 else 0.0, "grad_scale": gscale}


def recovered_gradient(mesh: MeridianMesh, u: np.ndarray) -> np.ndarray:
    """Nodal gradient by area-weighted averaging of the element gradients."""
    gb, area = gradients(mesh)
    grad = np.einsum("tid,ti->td", gb, u[mesh.triangles])
    out = np.zeros((mesh.n_vertices, 2))
    wsum = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(out, mesh.triangles[:, i], grad * area[:, None])
        np.add.at(wsum, mesh.triangles[:, i], area)
    return out / wsum[:, None]


@numba.njit(cache=True)
def _walk(t, x, z, verts, tris, nbr, ltag, gb):
    """Walk from triangle ``t`` to the one containing (x, z).

    Returns (triangle, code, x): code -1 when found, 0/1 when the point lies
    beyond the inner/outer profile, 3 when the walk fails. Crossing the axis
    reflects the point.
    """
    for _ in range(100000):
        worst = 0.0
        iw = -1
        for i in range(3):
            j = tris[t, (i + 1) % 3]
            lam = gb[t, i, 0] * (x - verts[j, 0]) + gb[t, i, 1] * (z - verts[j, 1])
            if lam < worst - 1e-13:
                worst = lam
                iw = i
        if iw < 0:
            return t, -1, x
        nxt = nbr[t, iw]
        if nxt >= 0:
            t = nxt
            continue
        tag = ltag[t, iw]
        if tag == 0 or tag == 1:
            return t, tag, x
        if x < 0.0:
            x = -x
        else:
            return t, 3, x
    return t, 3, x


@numba.njit(cache=True)
def _smooth_velocity(t, x, z, verts, tris, gb, gnode, sgn):
    vx = 0.0
    vz = 0.0
    for i in range(3):
        j = tris[t, (i + 1) % 3]
        lam = gb[t, i, 0] * (x - verts[j, 0]) + gb[t, i, 1] * (z - verts[j, 1])
        vx -= sgn * lam * gnode[tris[t, i], 0]
        vz -= sgn * lam * gnode[tris[t, i], 1]
    return vx, vz


@numba.njit(cache=True)
def _trace_smooth(t, x, z, verts, tris, nbr, ltag, gb, gnode, sgn, dl, eps, max_steps):
    """Basin of (x, z) under the normalised flow of the interpolated nodal gradient."""
    t, code, x = _walk(t, x, z, verts, tris, nbr, ltag, gb)
    if code >= 0:
        return code
    for _ in range(max_steps):
        vx, vz = _smooth_velocity(t, x, z, verts, tris, gb, gnode, sgn)
        sp_ = math.sqrt(vx * vx + vz * vz)
        if sp_ < eps:
            return 2
        xm = x + 0.5 * dl * vx / sp_
        zm = z + 0.5 * dl * vz / sp_
        tm, code, xm = _walk(t, xm, zm, verts, tris, nbr, ltag, gb)
        if code >= 0:
            return code
        vx, vz = _smooth_velocity(tm, xm, zm, verts, tris, gb, gnode, sgn)
        sp_ = math.sqrt(vx * vx + vz * vz)
        if sp_ < eps:
            return 2
        x = x + dl * vx / sp_
        z = z + dl * vz / sp_
        t, code, x = _walk(tm, x, z, verts, tris, nbr, ltag, gb)
        if code >= 0:
            return code
    return 3


@numba.njit(cache=True)
def _ray_separatrix(alpha, rad, r0, zc, t_node, verts, tris, nbr, ltag, gb, gnode, sgn,
                    dl, eps, max_steps, window, tol):
    n_rays = alpha.shape[0]
    out = r0.copy()
    ok = np.zeros(n_rays, dtype=np.bool_)
    for j in range(n_rays):
        sa = math.sin(alpha[j])
        ca = math.cos(alpha[j])
        n_k = rad.shape[1]
        prev_code = -1
        best = -1.0
        best_dist = np.inf
        # basins of the ray nodes near the discrete interface
        for k in range(1, n_k - 1):
            if abs(rad[j, k] - r0[j]) > window:
                continue
            code = _trace_smooth(t_node[j, k], rad[j, k] * sa, zc + rad[j, k] * ca, verts, tris,
                                 nbr, ltag, gb, gnode, sgn, dl, eps, max_steps)
            if prev_code == 0 and code == 1:
                lo = rad[j, k - 1]
                hi = rad[j, k]
                t0 = t_node[j, k - 1]
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    c = _trace_smooth(t0, mid * sa, zc + mid * ca, verts, tris, nbr, ltag, gb,
                                      gnode, sgn, dl, eps, max_steps)
                    if c == 0:
                        lo = mid
                    elif c == 1:
                        hi = mid
                    else:
                        break
                root = 0.5 * (lo + hi)
                if abs(root - r0[j]) < best_dist:
                    best_dist = abs(root - r0[j])
                    best = root
            prev_code = code
        if best > 0.0:
            out[j] = best
            ok[j] = True
    return out, ok


def fitted_interface(mesh: MeridianMesh, u: np.ndarray, cut: CutResult, direction: Direction):
    """Locate the basin boundary of a smoothed flow along each mesh ray.

    The flow uses the linear interpolant of the area-averaged nodal gradient,
    a continuous field whose basin boundary is not tied to mesh edges. Along
    each ray the switch between the two basins nearest the discrete interface
    is bisected. Returns the ray angles, the fitted ray lengths, the discrete
    interface radii and a per-ray success mask.
    """
    ids = mesh.ray_nodes()
    n_theta, n_r = mesh.grid
    alpha = np.linspace(0.0, math.pi, n_theta + 1)
    v = mesh.vertices[ids]
    rad = np.hypot(v[..., 0], v[..., 1] - mesh.center_z)
    on_cut = np.zeros(mesh.n_vertices, dtype=bool)
    on_cut[np.unique(cut.interface_edges)] = True
    flags = on_cut[ids]
    if not flags.any(1).all():
        raise SubmeshDisconnected("the interface does not cross every mesh ray")
    r0 = np.array([rad[j, flags[j]].mean() for j in range(n_theta + 1)])
    tracer = Tracer(mesh, u, direction)
    gnode = recovered_gradient(mesh, u)
    t_node = tracer.vt_idx[tracer.vt_ptr[:-1]][ids]
    eps = 1e-9 * float(np.hypot(gnode[:, 0], gnode[:, 1]).max())
    r, ok = _ray_separatrix(alpha, rad, r0, mesh.center_z, np.ascontiguousarray(t_node),
                            tracer.verts, tracer.tris, tracer.nbr, tracer.ltag, tracer.gb,
                            np.ascontiguousarray(gnode), float(direction.value), 0.25 * mesh.h,
                            eps, 40 * (n_r + n_theta), 2.5 * mesh.h, 1e-6 * mesh.h)
    return alpha, r, r0, ok


def _fitted_eigenvalues(sol: FemSolution, cut: CutResult) -> dict:
    mesh = sol.mesh
    asm = sol.assembly
    alpha, r_cut, r0, ok = fitted_interface(mesh, sol.u, cut, _direction_for(asm.bcs))
    n_theta, n_r = mesh.grid
    v = mesh.vertices[mesh.ray_nodes()]
    rad = np.hypot(v[..., 0], v[..., 1] - mesh.center_z)
    r_in, r_out = rad[:, 0], rad[:, -1]
    if not np.all((r_cut > r_in) & (r_cut < r_out)):
        raise SubmeshDisconnected("fitted interface leaves the domain")
    inner = polar_mesh(alpha, r_in, r_cut, mesh.center_z, mesh.h, INNER, INTERFACE)
    outer = polar_mesh(alpha, r_cut, r_out, mesh.center_z, mesh.h, INTERFACE, OUTER)
    lam_in = solve_first(assemble(inner, asm.n, asm.bcs[INNER], NEUMANN_BC, NEUMANN_BC),
                         shift_hint=sol.lam).lam
    lam_out = solve_first(assemble(outer, asm.n, NEUMANN_BC, asm.bcs[OUTER], NEUMANN_BC),
                          shift_hint=sol.lam).lam
    return {"lambda_rn_inner": lam_in, "lambda_nr_outer": lam_out,
            "shift_from_interface": float(np.abs(r_cut - r0).max()),
            "rays_resolved": float(ok.mean()),
            "r_fitted_mean": float(r_cut.mean())}


def cut_diagnostics(sol: FemSolution, cut: CutResult, tolerance: float = 0.02,
                    fitted: bool = True) -> CutResult:
    """Add interface flux and the two mixed eigenvalues of the basins to ``cut``.

    The mixed eigenvalues are computed on the exact triangle partition. On
    structured meshes they are also computed on meshes fitted to the zero-flux
    curve near the interface (``fitted``), which removes the O(h) error of a
    staircase boundary; that curve must stay within one mesh size of the
    basin interface.
    """
    asm = sol.assembly
    mesh = sol.mesh
    diag = dict(cut.diagnostics)
    diag["normal_derivative"] = interface_normal_derivative(mesh, sol.u, cut, asm.n)
    diag["lambda_rr_global"] = sol.lam
    lam = sol.lam
    part = {}
    for label, tag, key in ((INNER_LABEL, INNER, "lambda_rn_inner"),
                            (OUTER_LABEL, OUTER, "lambda_nr_outer")):
        mask = cut.labels == label
        if _components(mesh, mask) != 1:
            raise SubmeshDisconnected(f"{_LABEL_NAMES[label]} basin is not edge-connected")
        sub, _ = mesh.submesh(mask)
        bc = asm.bcs[tag]
        if tag == INNER:
            sub_asm = assemble(sub, asm.n, bc, NEUMANN_BC, NEUMANN_BC)
        else:
            sub_asm = assemble(sub, asm.n, NEUMANN_BC, bc, NEUMANN_BC)
        part[key] = solve_first(sub_asm, shift_hint=sol.lam).lam
    diag["partition"] = {**part,
                         "relative_gap_inner": abs(part["lambda_rn_inner"] - lam) / abs(lam),
                         "relative_gap_outer": abs(part["lambda_nr_outer"] - lam) / abs(lam)}
    best = part
    if fitted and mesh.grid is not None:
        fit = _fitted_eigenvalues(sol, cut)
        fit["consistent"] = bool(fit["shift_from_interface"] <= mesh.h and fit["rays_resolved"] == 1.0)
        diag["fitted"] = fit
        if fit["consistent"]:
            best = fit
    diag["lambda_rn_inner"] = best["lambda_rn_inner"]
    diag["lambda_nr_outer"] = best["lambda_nr_outer"]
    diag["relative_gap_inner"] = abs(diag["lambda_rn_inner"] - lam) / abs(lam)
    diag["relative_gap_outer"] = abs(diag["lambda_nr_outer"] - lam) / abs(lam)
    diag["within_tolerance"] = bool(max(diag["relative_gap_inner"], diag["relative_gap_outer"]) <= tolerance)
    return CutResult(cut.mesh, cut.labels, cut.raw_labels, cut.interface_edges, cut.interface,
                     cut.r_star_estimate, diag)


# ----------------------------------------------------------------------------- generic fields

def torsion_field(mesh: MeridianMesh, n: int) -> np.ndarray:
    """Solve ``-Laplace w = 1`` with ``w = 0`` on both profiles (meridian weak form)."""
    from .radial import DIRICHLET_BC
    asm = assemble(mesh, n, DIRICHLET_BC, DIRICHLET_BC)
    f = asm.free
    rhs = asm.M @ np.ones(mesh.n_vertices)
    w = np.zeros(mesh.n_vertices)
    w[f] = spsolve(asm.K[f][:, f].tocsc(), rhs[f])
    return w


def cut_generic_field(mesh: MeridianMesh, w: np.ndarray, laplacian_sign: int, normal_sign: int,
                      n: int = 3, seed: int = 0, domain=None) -> CutResult:
    """Basins of a caller-supplied positive field with declared signs.

    ``normal_sign < 0`` means the field decreases towards the boundary, so the
    flow descends. Positivity and both declared signs are spot-checked on a
    seeded sample of nodes.
    """
    if laplacian_sign not in (-1, 1) or normal_sign not in (-1, 1):
        raise SignSpotCheckFailed("declared signs must be -1 or +1")
    w = np.asarray(w, dtype=float)
    rng = np.random.default_rng(seed)
    bnodes = np.unique(mesh.boundary_edges[np.isin(mesh.edge_tags, [INNER, OUTER])])
    interior = np.setdiff1d(np.arange(mesh.n_vertices), bnodes)
    sample = rng.choice(interior, size=min(100, interior.size), replace=False)
    if not np.all(w[sample] > 0):
        raise SignSpotCheckFailed("field is not positive at sampled interior nodes")
    asm = assemble(mesh, n, NEUMANN_BC, NEUMANN_BC)
    # (K w)_i approximates -int Laplace(w) phi_i; axis nodes carry no boundary term
    lap = -(asm.K @ w)[sample]
    if np.sign(np.median(lap)) != laplacian_sign:
        raise SignSpotCheckFailed("declared sign of the Laplacian disagrees with the field")
    sol = FemSolution(asm, float("nan"), w, 0, float("nan"), float("nan"))
    from .fem import boundary_normal_derivative
    _, dn = boundary_normal_derivative(sol, (INNER, OUTER))
    if np.sign(np.median(dn)) != normal_sign:
        raise SignSpotCheckFailed("declared sign of the normal derivative disagrees with the field")
    direction = Direction.DESCEND if normal_sign < 0 else Direction.ASCEND
    cut = _basins(mesh, w, direction, n, "barycenter", _shell_center(domain))
    diag = dict(cut.diagnostics)
    diag["normal_derivative"] = interface_normal_derivative(mesh, w, cut, n)
    diag["assumption"] = "declared boundary sign is taken on trust beyond the spot check"
    cut.diagnostics = diag
    return cut
