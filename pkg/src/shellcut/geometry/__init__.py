from .domain import (
    AxiDomain,
    class_residual,
    concentric_shell,
    find_class_member,
    gap,
    matched_shell_radii,
    shell_volume,
)
from .measures import (
    Dimension,
    QuermassVector,
    diameter,
    inner_parallel,
    inradius,
    mean_width_quermass,
    outer_parallel,
    perimeter,
    quermass_comparison,
    quermassintegrals,
    steiner_volume,
    unit_ball_volume,
    volume,
    width,
)
from .profiles import (
    Ball,
    InnerParallel,
    MeridianProfile,
    MinkowskiBlend,
    Parallel,
    Polyline,
    Spheroid,
    profile_from_dict,
)
from .random import random_convex_polyline
