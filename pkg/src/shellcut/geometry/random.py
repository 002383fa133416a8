"""Seeded random convex meridian profiles for property tests and lemma sweeps."""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull

from .profiles import Polyline


def random_convex_polyline(rng: np.random.Generator, n_points: int = 8,
                           size: float = 1.0, center_z: float = 0.0) -> Polyline:
    """Convex hull of random points and their mirror images, cut at the axis.

    The axis is always crossed in the interior of the hull because the point
    set is symmetric, so the right half of the hull is a valid meridian.
    """
    pts = np.column_stack([rng.uniform(0.2, 1.0, n_points) * size,
                           rng.uniform(-1.0, 1.0, n_points) * size + center_z])
    cloud = np.concatenate([pts, pts * [-1.0, 1.0]])
    hull = ConvexHull(cloud)
    ring = cloud[hull.vertices]  # counter-clockwise
    crossings = []
    k = len(ring)
    for i in range(k):
        a, b = ring[i], ring[(i + 1) % k]
        if (a[0] > 0) != (b[0] > 0) or a[0] == 0.0:
            if a[0] == 0.0:
                crossings.append(a[1])
            elif b[0] != 0.0:
                s = a[0] / (a[0] - b[0])
                crossings.append(a[1] + s * (b[1] - a[1]))
    top, bot = max(crossings), min(crossings)
    right = ring[ring[:, 0] > 0]
    zmid = 0.5 * (top + bot)
    right = right[np.argsort(np.arctan2(right[:, 0], right[:, 1] - zmid))]
    return Polyline(np.concatenate([[[0.0, top]], right, [[0.0, bot]]]))
