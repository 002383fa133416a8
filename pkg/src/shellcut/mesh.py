"""Structured triangulation of the meridian half-domain between two profiles."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshTooCoarse, RayMiss
from .geometry import AxiDomain, MeridianProfile

__all__ = ["INNER", "OUTER", "AXIS", "INTERFACE", "TAG_NAMES", "MeridianMesh",
           "mesh_meridian", "polar_mesh", "ray_intersection"]

INNER, OUTER, AXIS, INTERFACE = 0, 1, 2, 3
TAG_NAMES = {INNER: "inner", OUTER: "outer", AXIS: "axis", INTERFACE: "interface"}


@dataclass(eq=False)
class MeridianMesh:
    vertices: np.ndarray          # (N, 2) columns rho, z
    triangles: np.ndarray         # (T, 3), counter-clockwise
    boundary_edges: np.ndarray    # (E, 2)
    edge_tags: np.ndarray         # (E,)
    h: float
    center_z: float = 0.0         # axis point the mesh rays leave from
    grid: tuple | None = None     # (n_theta, n_r) for structured polar meshes
    edge_triangle: np.ndarray = field(default=None, repr=False)  # (E,) owning triangle
    _neighbors: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.edge_triangle is None:
            self.edge_triangle = _owning_triangles(self.triangles, self.boundary_edges)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        worst = math.pi
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = (a * b).sum(1) / np.hypot(a[:, 0], a[:, 1]) / np.hypot(b[:, 0], b[:, 1])
            worst = min(worst, float(np.arccos(np.clip(cosang, -1, 1)).min()))
        return math.degrees(worst)

    def edges_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.edge_tags == tag)

    def nodes_with_tag(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_edges[self.edge_tags == tag])

    @property
    def neighbors(self) -> np.ndarray:
        """(T, 3) triangle across the edge opposite local vertex i, -1 on the boundary."""
        if self._neighbors is None:
            self._neighbors = _neighbors(self.triangles)
        return self._neighbors

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "center_z": self.center_z,
            "grid": list(self.grid) if self.grid else None,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "edges": [{"v": [int(a), int(b)], "tag": TAG_NAMES[int(t)]}
                      for (a, b), t in zip(self.boundary_edges, self.edge_tags)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MeridianMesh":
        names = {v: k for k, v in TAG_NAMES.items()}
        edges = np.array([e["v"] for e in data["edges"]], dtype=np.int64).reshape(-1, 2)
        tags = np.array([names[e["tag"]] for e in data["edges"]], dtype=np.int64)
        return cls(np.asarray(data["vertices"], float), np.asarray(data["triangles"], np.int64),
                   edges, tags, float(data["h"]), float(data.get("center_z", 0.0)),
                   tuple(data["grid"]) if data.get("grid") else None)

    def ray_nodes(self) -> np.ndarray:
        """(n_theta + 1, n_r + 1) vertex ids of a structured polar mesh."""
        if self.grid is None:
            raise ValueError("mesh has no polar grid structure")
        n_theta, n_r = self.grid
        return np.arange((n_theta + 1) * (n_r + 1)).reshape(n_theta + 1, n_r + 1)

    def submesh(self, tri_mask: np.ndarray) -> tuple["MeridianMesh", np.ndarray]:
        """Mesh made of the selected triangles; cut edges are tagged INTERFACE.

        Returns the submesh and the parent index of each submesh vertex.
        """
        tris = self.triangles[tri_mask]
        used = np.unique(tris)
        remap = -np.ones(self.n_vertices, dtype=np.int64)
        remap[used] = np.arange(used.size)
        nb = self.neighbors[tri_mask]
        edges, tags = [], []
        lookup = {}
        for (a, b), t in zip(self.boundary_edges, self.edge_tags):
            lookup[(min(a, b), max(a, b))] = t
        for tri, nbr in zip(tris, nb):
            for i in range(3):
                a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
                if nbr[i] >= 0 and tri_mask[nbr[i]]:
                    continue
                key = (min(a, b), max(a, b))
                edges.append((remap[a], remap[b]))
                tags.append(lookup.get(key, INTERFACE) if nbr[i] < 0 else INTERFACE)
        sub = MeridianMesh(self.vertices[used], remap[tris], np.array(edges, dtype=np.int64),
                           np.array(tags, dtype=np.int64).reshape(-1), self.h, self.center_z)
        return sub, used


def _edge_keys(a, b, nv):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return lo * nv + hi


def _neighbors(tris: np.ndarray) -> np.ndarray:
    nv = int(tris.max()) + 1
    t = tris.shape[0]
    keys = np.concatenate([_edge_keys(tris[:, (i + 1) % 3], tris[:, (i + 2) % 3], nv)
                           for i in range(3)])
    owner = np.tile(np.arange(t), 3)
    local = np.repeat(np.arange(3), t)
    order = np.argsort(keys, kind="stable")
    k, o, l = keys[order], owner[order], local[order]
    nbr = -np.ones((t, 3), dtype=np.int64)
    same = np.flatnonzero(k[1:] == k[:-1])
    nbr[o[same], l[same]] = o[same + 1]
    nbr[o[same + 1], l[same + 1]] = o[same]
    return nbr


def _owning_triangles(tris: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if edges.size == 0:
        return np.empty(0, dtype=np.int64)
    nv = int(max(tris.max(), edges.max())) + 1
    keys = np.concatenate([_edge_keys(tris[:, (i + 1) % 3], tris[:, (i + 2) % 3], nv)
                           for i in range(3)])
    owner = np.tile(np.arange(tris.shape[0]), 3)
    table = dict(zip(keys.tolist(), owner.tolist()))
    ek = _edge_keys(edges[:, 0], edges[:, 1], nv)
    return np.array([table[k] for k in ek.tolist()], dtype=np.int64)


def ray_intersection(profile: MeridianProfile, zc: float, alpha: np.ndarray) -> np.ndarray:
    """Distance from ``(0, zc)`` to the profile boundary along polar angles ``alpha``.

    ``alpha`` is measured from +z towards +rho. The polar angle of the support
    point is monotone in the normal angle, so each ray is located by bisection
    on the normal angle and then intersected with the bracketing chord.
    """
    alpha = np.asarray(alpha, dtype=float)
    lo = np.zeros_like(alpha)
    hi = np.full_like(alpha, math.pi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        rho, z = profile.point(mid, -1)
        below = np.arctan2(rho, z - zc) < alpha
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r0, z0 = profile.point(lo, +1)
    r1, z1 = profile.point(hi, -1)
    dr, dz = np.sin(alpha), np.cos(alpha)
    er, ez = r1 - r0, z1 - z0
    # solve (0, zc) + s (dr, dz) = P0 + q (er, ez)
    det = dr * (-ez) - dz * (-er)
    qr, qz = r0, z0 - zc
    s_chord = np.divide(qr * (-ez) - qz * (-er), det, out=np.full_like(alpha, np.nan),
                        where=np.abs(det) > 1e-300)
    s_point = np.hypot(r0, z0 - zc)
    chord = np.hypot(er, ez)
    s = np.where((chord > 1e-12) & np.isfinite(s_chord), s_chord, s_point)
    top = alpha <= 0.0
    bot = alpha >= math.pi
    s = np.where(top, profile.support(0.0) - zc, s)
    s = np.where(bot, profile.support(math.pi) + zc, s)
    return s


def mesh_meridian(domain: AxiDomain, h: float) -> MeridianMesh:
    """Transfinite polar mesh between the inner and outer meridian curves.

    Rays leave the centre of the inner body's axis extent; along each ray the
    nodes interpolate linearly between the two boundary crossings. Quads are
    split along their shorter diagonal.
    """
    g = domain.gap
    if not 0 < h < g / 3:
        raise MeshTooCoarse(f"h = {h} must be positive and below gap/3 = {g / 3:.6g}")
    inner, outer = domain.inner, domain.outer
    zc = 0.5 * (inner.support(0.0) - inner.support(math.pi))
    probe = np.linspace(0.0, math.pi, 721)
    r_probe = ray_intersection(outer, zc, probe)
    n_theta = max(4, math.ceil(math.pi * float(r_probe.max()) / h))
    alpha = np.linspace(0.0, math.pi, n_theta + 1)
    r_in = ray_intersection(inner, zc, alpha)
    r_out = ray_intersection(outer, zc, alpha)
    if not (np.isfinite(r_in).all() and np.isfinite(r_out).all()) or (r_in <= 0).any() \
            or (r_out <= r_in).any():
        raise RayMiss("a ray failed to cross both profiles in order")
    return polar_mesh(alpha, r_in, r_out, zc, h)


def polar_mesh(alpha: np.ndarray, r_in: np.ndarray, r_out: np.ndarray, zc: float, h: float,
               inner_tag: int = INNER, outer_tag: int = OUTER) -> MeridianMesh:
    """Structured mesh between two star-shaped curves given by ray lengths from ``(0, zc)``."""
    n_theta = alpha.size - 1
    n_r = max(1, math.ceil(float((r_out - r_in).max()) / h))
    frac = np.arange(n_r + 1) / n_r
    rad = r_in[:, None] + frac[None, :] * (r_out - r_in)[:, None]
    verts = np.stack([rad * np.sin(alpha)[:, None], zc + rad * np.cos(alpha)[:, None]], axis=-1)
    verts[0, :, 0] = 0.0
    verts[-1, :, 0] = 0.0
    verts = verts.reshape(-1, 2)

    def vid(j, k):
        return j * (n_r + 1) + k

    j, k = np.meshgrid(np.arange(n_theta), np.arange(n_r), indexing="ij")
    j, k = j.ravel(), k.ravel()
    a, b, c, d = vid(j, k), vid(j + 1, k), vid(j + 1, k + 1), vid(j, k + 1)
    diag_ac = np.hypot(*(verts[a] - verts[c]).T)
    diag_bd = np.hypot(*(verts[b] - verts[d]).T)
    use_ac = diag_ac <= diag_bd
    t1 = np.where(use_ac[:, None], np.stack([a, b, c], 1), np.stack([a, b, d], 1))
    t2 = np.where(use_ac[:, None], np.stack([a, c, d], 1), np.stack([b, c, d], 1))
    tris = np.empty((2 * t1.shape[0], 3), dtype=np.int64)
    tris[0::2], tris[1::2] = t1, t2
    p = verts[tris]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) \
        - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    jj = np.arange(n_theta)
    kk = np.arange(n_r)
    edges = np.concatenate([
        np.stack([vid(jj, 0), vid(jj + 1, 0)], 1),
        np.stack([vid(jj, n_r), vid(jj + 1, n_r)], 1),
        np.stack([vid(0, kk), vid(0, kk + 1)], 1),
        np.stack([vid(n_theta, kk), vid(n_theta, kk + 1)], 1),
    ])
    tags = np.concatenate([np.full(n_theta, inner_tag), np.full(n_theta, outer_tag),
                           np.full(2 * n_r, AXIS)])
    return MeridianMesh(verts, tris, edges.astype(np.int64), tags.astype(np.int64), float(h), float(zc),
                        (n_theta, n_r))
