"""Built-in benchmark problems.

Material values are taken from the canonical published benchmarks:

* Reed (1971): the classic heterogeneous 1D slab.  The original problem is
  reflected at x=0; here the reflective boundary is removed by duplicating
  the domain about x=0, giving a [-8, 8] slab with vacuum boundaries.
* Kobayashi (2000) 3D dogleg void duct, problem-3 family with the 50%
  scattering variant, flattened to 2D by extending the duct and source
  infinitely along z.  The exact duct rectangles below are fixed constants
  of this package.
"""

from __future__ import annotations

from .geometry import Mesh, ProblemSpec, RegionSpec

__all__ = ["reed_problem", "dogleg_problem", "homogeneous_slab", "PRESETS"]

# Reed's half-slab layout on [0, 8]: (x0, x1, sigma_a, sigma_s, q)
_REED_HALF = (
    (0.0, 2.0, 50.0, 0.0, 50.0),   # strong absorber with a strong source
    (2.0, 3.0, 5.0, 0.0, 0.0),     # plain absorber
    (3.0, 5.0, 0.0, 0.0, 0.0),     # void gap
    (5.0, 6.0, 0.1, 0.9, 1.0),     # scatterer with a weak source
    (6.0, 8.0, 0.1, 0.9, 0.0),     # scatterer only
)


def reed_problem(cells: int = 80) -> ProblemSpec:
    """Reed's problem mirrored onto [-8, 8] with vacuum boundaries.

    `cells` spans the full mirrored slab and must be a multiple of 16 so the
    1-cm region edges land on mesh edges.  The default matches the usual
    published resolution.
    """
    if cells < 16 or cells % 16 != 0:
        raise ValueError("cells must be a positive multiple of 16")
    regions = []
    for x0, x1, sa, ss, q in _REED_HALF:
        regions.append(RegionSpec((x0,), (x1,), sa, ss, q))
        regions.append(RegionSpec((-x1,), (-x0,), sa, ss, q))
    regions.sort(key=lambda r: r.lo[0])
    return ProblemSpec(Mesh.uniform_1d(-8.0, 8.0, cells), regions)


# Dogleg materials: shield sigma_t = 0.1 with 50% scattering, duct is
# near-vacuum, and the source sits at the duct mouth in shield material.
_SHIELD = dict(sigma_a=0.05, sigma_s=0.05)
_DUCT = dict(sigma_a=5e-5, sigma_s=5e-5)

# Duct path on the 30 x 50 cm domain (all edges on multiples of 10 cm):
# up from the source, one lateral jog, then up again to the top boundary.
_DOGLEG_RECTS = {
    "source": (0, 10, 0, 10),
    "duct_leg_a": (0, 10, 10, 30),
    "duct_jog": (10, 20, 20, 30),
    "duct_leg_b": (10, 20, 30, 50),
    "shield_1": (10, 20, 0, 20),
    "shield_2": (20, 30, 0, 30),
    "shield_3": (20, 30, 30, 50),
    "shield_4": (0, 10, 30, 50),
}


def dogleg_problem(nx: int = 30, ny: int = 50) -> ProblemSpec:
    """2D duct-streaming benchmark on [0,30] x [0,50] cm, vacuum boundaries."""
    if nx % 3 != 0 or ny % 5 != 0:
        raise ValueError("nx must be a multiple of 3 and ny a multiple of 5")
    regions = []
    for name, (x0, x1, y0, y1) in _DOGLEG_RECTS.items():
        if name.startswith("duct"):
            mat = _DUCT
        else:
            mat = _SHIELD
        q = 1.0 if name == "source" else 0.0
        regions.append(RegionSpec((float(x0), float(y0)), (float(x1), float(y1)),
                                  q=q, **mat))
    mesh = Mesh.uniform_2d(0.0, 30.0, nx, 0.0, 50.0, ny)
    return ProblemSpec(mesh, regions)


def homogeneous_slab(width: float = 100.0, cells: int = 200, sigma_a: float = 0.1,
                     sigma_s: float = 0.9, q: float = 1.0) -> ProblemSpec:
    """Single-material slab, handy for infinite-medium style checks."""
    region = RegionSpec((0.0,), (width,), sigma_a, sigma_s, q)
    return ProblemSpec(Mesh.uniform_1d(0.0, width, cells), [region])


PRESETS = {
    "reed": reed_problem,
    "dogleg": dogleg_problem,
}
