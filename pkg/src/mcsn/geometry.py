"""Spatial domain description: material regions, structured meshes, ray tracing.

Supports 1D slabs (streaming along the z axis of the direction vector) and
2D XY domains that extend infinitely in z.  Direction vectors are always unit
3-vectors; the unused components simply do not move the particle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "OutOfDomainError",
    "RegionSpec",
    "Mesh",
    "BoundarySource",
    "ProblemSpec",
    "locate",
    "distance_to_cell_exit",
    "material_at",
    "refine_problem",
    "project_to_coarse",
]

_ALIGN_RTOL = 1e-12


class OutOfDomainError(ValueError):
    """Raised when a position falls outside the domain closure."""


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned material region with constant cross sections.

    `lo`/`hi` are 1- or 2-tuples of cm coordinates.  `sigma_a` and `sigma_s`
    are absorption/scattering cross sections in 1/cm, `q` is the isotropic,
    angle-integrated volumetric source strength.
    """

    lo: tuple
    hi: tuple
    sigma_a: float
    sigma_s: float
    q: float = 0.0

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) not in (1, 2):
            raise ValueError("region extent must be 1D or 2D")
        for a, b in zip(self.lo, self.hi):
            if not b > a:
                raise ValueError(f"degenerate region extent {self.lo}..{self.hi}")
        if self.sigma_a < 0 or self.sigma_s < 0 or self.q < 0:
            raise ValueError("sigma_a, sigma_s and q must be nonnegative")

    @property
    def sigma_t(self) -> float:
        return self.sigma_a + self.sigma_s

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v


@dataclass(frozen=True)
class Mesh:
    """Structured mesh from strictly increasing edge arrays (one per axis)."""

    edges_x: np.ndarray
    edges_y: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges_x", np.asarray(self.edges_x, dtype=np.float64))
        if self.edges_y is not None:
            object.__setattr__(self, "edges_y", np.asarray(self.edges_y, dtype=np.float64))
        for e in self._edge_arrays():
            if e.size < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("mesh edges must be strictly increasing with >= 2 entries")

    def _edge_arrays(self):
        return [self.edges_x] if self.edges_y is None else [self.edges_x, self.edges_y]

    @classmethod
    def uniform_1d(cls, x0: float, x1: float, cells: int) -> "Mesh":
        return cls(np.linspace(x0, x1, cells + 1))

    @classmethod
    def uniform_2d(cls, x0, x1, nx, y0, y1, ny) -> "Mesh":
        return cls(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1))

    @property
    def dimension(self) -> int:
        return 1 if self.edges_y is None else 2

    @property
    def nx(self) -> int:
        return self.edges_x.size - 1

    @property
    def ny(self) -> int:
        return 1 if self.edges_y is None else self.edges_y.size - 1

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volumes(self) -> np.ndarray:
        """Flat (C order, y-major) array of cell volumes (lengths in 1D)."""
        wx = np.diff(self.edges_x)
        if self.dimension == 1:
            return wx.copy()
        wy = np.diff(self.edges_y)
        return (wy[:, None] * wx[None, :]).ravel()

    @property
    def cell_centers(self) -> np.ndarray:
        """Cell centers: shape (ncells,) in 1D, (ncells, 2) flat in 2D."""
        cx = 0.5 * (self.edges_x[:-1] + self.edges_x[1:])
        if self.dimension == 1:
            return cx
        cy = 0.5 * (self.edges_y[:-1] + self.edges_y[1:])
        xx, yy = np.meshgrid(cx, cy)
        return np.column_stack([xx.ravel(), yy.ravel()])

    @property
    def domain_volume(self) -> float:
        v = self.edges_x[-1] - self.edges_x[0]
        if self.dimension == 2:
            v *= self.edges_y[-1] - self.edges_y[0]
        return float(v)


# Face indices used for boundary sources: 1D uses x_lo/x_hi only.
FACES = ("x_lo", "x_hi", "y_lo", "y_hi")


@dataclass(frozen=True)
class BoundarySource:
    """Constant incoming boundary intensity per face (applies to incoming
    directions only).  Intensity units match the angular flux."""

    x_lo: float = 0.0
    x_hi: float = 0.0
    y_lo: float = 0.0
    y_hi: float = 0.0

    def __post_init__(self):
        if min(self.x_lo, self.x_hi, self.y_lo, self.y_hi) < 0:
            raise ValueError("boundary intensities must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_lo, self.x_hi, self.y_lo, self.y_hi], dtype=np.float64)

    @property
    def total(self) -> float:
        return self.x_lo + self.x_hi + self.y_lo + self.y_hi


class PackedProblem(NamedTuple):
    """Plain-array view of a ProblemSpec consumed by the compiled kernels."""

    ndim: int
    nx: int
    ny: int
    ex: np.ndarray
    ey: np.ndarray
    sig_a: np.ndarray      # flat per cell, y-major
    sig_s: np.ndarray
    sig_t: np.ndarray
    q: np.ndarray
    vol: np.ndarray
    # volumetric source bookkeeping (per region)
    reg_lo_x: np.ndarray
    reg_hi_x: np.ndarray
    reg_lo_y: np.ndarray
    reg_hi_y: np.ndarray
    src_cdf: np.ndarray    # cumulative source fraction per region
    q_total: float         # total emission per unit time
    # boundary source bookkeeping (per face, see FACES)
    face_g: np.ndarray
    face_w: np.ndarray     # incoming partial-current weight per face per unit time
    g_total: float


@dataclass
class ProblemSpec:
    """Complete fixed-source transport problem on a structured mesh.

    Regions must tile the domain exactly and their boundaries must coincide
    with mesh edges, which keeps per-cell cross sections exact.
    """

    mesh: Mesh
    regions: list
    boundary: BoundarySource = field(default_factory=BoundarySource)
    initial: object = None          # optional particle census for time stepping
    mode: str = "steady"            # "steady" | "time"
    dt: float | None = None

    def __post_init__(self):
        if self.mode not in ("steady", "time"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "time" and (self.dt is None or self.dt <= 0):
            raise ValueError("time mode requires a positive dt")
        dim = self.mesh.dimension
        for r in self.regions:
            if len(r.lo) != dim:
                raise ValueError("region dimensionality does not match the mesh")
        self._validate_alignment()
        self._cell_region = self._assign_cells()
        self._packed = None

    # -- construction checks ------------------------------------------------

    def _edge_tol(self) -> float:
        return _ALIGN_RTOL * max(
            abs(self.mesh.edges_x[0]), abs(self.mesh.edges_x[-1]), 1.0
        )

    def _validate_alignment(self):
        tol = self._edge_tol()
        axes = [(self.mesh.edges_x, 0)]
        if self.mesh.dimension == 2:
            axes.append((self.mesh.edges_y, 1))
        for edges, ax in axes:
            lo, hi = edges[0], edges[-1]
            for r in self.regions:
                for v in (r.lo[ax], r.hi[ax]):
                    if v < lo - tol or v > hi + tol:
                        raise ValueError(f"region edge {v} outside domain on axis {ax}")
                    if np.min(np.abs(edges - v)) > tol:
                        raise ValueError(
                            f"region edge {v} on axis {ax} does not coincide with a mesh edge"
                        )
        vol = sum(r.volume for r in self.regions)
        if abs(vol - self.mesh.domain_volume) > 1e-12 * self.mesh.domain_volume:
            raise ValueError("regions do not tile the domain (volume mismatch)")

    def _assign_cells(self) -> np.ndarray:
        centers = self.mesh.cell_centers
        if self.mesh.dimension == 1:
            centers = centers[:, None]
        owner = np.full(self.mesh.ncells, -1, dtype=np.int64)
        for ri, r in enumerate(self.regions):
            inside = np.ones(self.mesh.ncells, dtype=bool)
            for ax in range(centers.shape[1]):
                inside &= (centers[:, ax] > r.lo[ax]) & (centers[:, ax] < r.hi[ax])
            if np.any(owner[inside] >= 0):
                raise ValueError("overlapping regions")
            owner[inside] = ri
        if np.any(owner < 0):
            raise ValueError("regions leave uncovered cells")
        return owner

    # -- derived arrays -----------------------------------------------------

    def packed(self) -> PackedProblem:
        if self._packed is not None:
            return self._packed
        mesh = self.mesh
        dim = mesh.dimension
        ri = self._cell_region
        sig_a = np.array([self.regions[i].sigma_a for i in ri])
        sig_s = np.array([self.regions[i].sigma_s for i in ri])
        qarr = np.array([self.regions[i].q for i in ri])
        ey = mesh.edges_y if dim == 2 else np.array([0.0, 1.0])

        reg_lo = np.array([r.lo for r in self.regions], dtype=np.float64)
        reg_hi = np.array([r.hi for r in self.regions], dtype=np.float64)
        if dim == 1:
            reg_lo = np.column_stack([reg_lo[:, 0], np.zeros(len(self.regions))])
            reg_hi = np.column_stack([reg_hi[:, 0], np.ones(len(self.regions))])
        emit = np.array([r.q * r.volume for r in self.regions], dtype=np.float64)
        q_total = float(emit.sum())
        cdf = np.cumsum(emit)
        if q_total > 0:
            cdf /= q_total

        face_g = self.boundary.as_array()
        if dim == 1:
            area = np.array([1.0, 1.0, 0.0, 0.0])
            face_g = face_g.copy()
            face_g[2:] = 0.0
        else:
            lx = mesh.edges_x[-1] - mesh.edges_x[0]
            ly = mesh.edges_y[-1] - mesh.edges_y[0]
            area = np.array([ly, ly, lx, lx])
        # incoming partial current of an isotropic incident intensity G is pi*G
        face_w = np.pi * face_g * area
        self._packed = PackedProblem(
            ndim=dim,
            nx=mesh.nx,
            ny=mesh.ny,
            ex=mesh.edges_x,
            ey=ey,
            sig_a=sig_a,
            sig_s=sig_s,
            sig_t=sig_a + sig_s,
            q=qarr,
            vol=mesh.cell_volumes,
            reg_lo_x=reg_lo[:, 0].copy(),
            reg_hi_x=reg_hi[:, 0].copy(),
            reg_lo_y=reg_lo[:, 1].copy(),
            reg_hi_y=reg_hi[:, 1].copy(),
            src_cdf=cdf,
            q_total=q_total,
            face_g=face_g,
            face_w=face_w,
            g_total=float(face_w.sum()),
        )
        return self._packed

    @property
    def source_total(self) -> float:
        """Total volumetric emission per unit time, integral of q."""
        return self.packed().q_total

    def flat_cell(self, cell) -> int:
        if self.mesh.dimension == 1:
            return int(cell)
        ix, iy = cell
        return int(iy) * self.mesh.nx + int(ix)


# -- point queries ----------------------------------------------------------


def _locate_axis(edges: np.ndarray, x: float) -> int:
    n = edges.size - 1
    if x < edges[0] or x > edges[-1]:
        raise OutOfDomainError(f"position {x} outside [{edges[0]}, {edges[-1]}]")
    if x == edges[-1]:
        return n - 1
    # points exactly on an interior edge belong to the higher-index cell
    return int(np.searchsorted(edges, x, side="right")) - 1


def locate(problem: ProblemSpec, x):
    """Cell index containing position `x` (int in 1D, (ix, iy) in 2D)."""
    mesh = problem.mesh
    if mesh.dimension == 1:
        return _locate_axis(mesh.edges_x, float(np.asarray(x).reshape(-1)[0]))
    px, py = np.asarray(x, dtype=np.float64).reshape(2)
    return (_locate_axis(mesh.edges_x, px), _locate_axis(mesh.edges_y, py))


def _axis_exit(edges, i, x, w):
    """Distance along the axis component w to leave cell i; +inf if w == 0."""
    if w > 0.0:
        return (edges[i + 1] - x) / w, i + 1 == edges.size - 1
    if w < 0.0:
        return (x - edges[i]) / (-w), i == 0
    return np.inf, False


def distance_to_cell_exit(problem: ProblemSpec, x, omega):
    """Distance along `omega` to the first cell face from `x`.

    Returns (distance, kind) with kind "interior-face" or "domain-boundary".
    Distances are true 3D path lengths; in 1D only omega[2] moves the
    particle, in 2D only (omega[0], omega[1]).
    """
    mesh = problem.mesh
    omega = np.asarray(omega, dtype=np.float64)
    if mesh.dimension == 1:
        pos = float(np.asarray(x).reshape(-1)[0])
        i = _locate_axis(mesh.edges_x, pos)
        d, bnd = _axis_exit(mesh.edges_x, i, pos, omega[2])
    else:
        px, py = np.asarray(x, dtype=np.float64).reshape(2)
        ix = _locate_axis(mesh.edges_x, px)
        iy = _locate_axis(mesh.edges_y, py)
        dx, bx = _axis_exit(mesh.edges_x, ix, px, omega[0])
        dy, by = _axis_exit(mesh.edges_y, iy, py, omega[1])
        d, bnd = (dx, bx) if dx <= dy else (dy, by)
    if not np.isfinite(d):
        return np.inf, "interior-face"
    return float(d), "domain-boundary" if bnd else "interior-face"


def material_at(problem: ProblemSpec, cell):
    """(sigma_a, sigma_s, q) of the region owning `cell`."""
    r = problem.regions[problem._cell_region[problem.flat_cell(cell)]]
    return (r.sigma_a, r.sigma_s, r.q)


# -- mesh refinement ----------------------------------------------------------


def refine_problem(problem: ProblemSpec, factor: int) -> ProblemSpec:
    """Same regions on a mesh with every cell split `factor` times per axis."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be a positive integer")
    if factor == 1:
        return problem

    def refine_edges(edges):
        parts = [np.linspace(edges[i], edges[i + 1], factor + 1)[:-1]
                 for i in range(edges.size - 1)]
        return np.append(np.concatenate(parts), edges[-1])

    mesh = problem.mesh
    if mesh.dimension == 1:
        fine = Mesh(refine_edges(mesh.edges_x))
    else:
        fine = Mesh(refine_edges(mesh.edges_x), refine_edges(mesh.edges_y))
    return ProblemSpec(fine, list(problem.regions), problem.boundary)


def project_to_coarse(fine_field, coarse_mesh: Mesh, factor: int) -> np.ndarray:
    """Volume-weighted average of nested fine cells onto the parent mesh."""
    f = np.asarray(fine_field, dtype=np.float64)
    if factor == 1:
        return f.reshape(-1).copy()
    if coarse_mesh.dimension == 1:
        return f.reshape(coarse_mesh.nx, factor).mean(axis=1)
    g = f.reshape(coarse_mesh.ny, factor, coarse_mesh.nx, factor)
    return g.mean(axis=(1, 3)).reshape(-1)


def prolong_to_fine(coarse_field, coarse_mesh: Mesh, factor: int) -> np.ndarray:
    """Piecewise-constant injection of a per-cell field onto the refined mesh."""
    f = np.asarray(coarse_field, dtype=np.float64)
    if factor == 1:
        return f.reshape(-1).copy()
    if coarse_mesh.dimension == 1:
        return np.repeat(f.reshape(-1), factor)
    g = f.reshape(coarse_mesh.ny, coarse_mesh.nx)
    return np.repeat(np.repeat(g, factor, axis=0), factor, axis=1).reshape(-1)
