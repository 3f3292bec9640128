"""Indexed uniform-sample streams and measure-preserving physical transforms.

Every random quantity in a history is a pure function of
(stream, particle_index, dim).  Two stream kinds exist: a counter-based
pseudorandom generator and a Halton low-discrepancy sequence.  Swapping the
kind is the single switch between plain Monte Carlo and quasi-Monte Carlo;
everything downstream consumes uniforms identically.

Dimension layout per history:

    dim 0        birth x (also selects the source region)
    dim 1        birth y (2D only)
    dim 2, 3     birth direction (polar cosine, azimuth)
    dim 4        birth time (time-dependent mode only)
    dim 5 + 3k   optical depth of the flight after k scatters (one draw per
                 flight, translated through material changes)
    dim 6 + 3k,
    dim 7 + 3k   post-scatter direction (polar cosine, azimuth)

Halton dimensions are capped by `dimension_budget`; draws past the budget
fall back to the pseudorandom generator with the same key so histories stay
well defined at any scatter depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import ProblemSpec

__all__ = [
    "SampleStream",
    "radical_inverse",
    "draw",
    "sample_isotropic_direction",
    "sample_exponential_distance",
    "sample_source_birth",
    "default_dimension_budget",
    "PRIMES",
]

# First 64 primes; Halton dim k uses base PRIMES[k].
PRIMES = np.array(
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
     71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139,
     149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
     227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
     307, 311], dtype=np.int64,
)

KIND_PRN = 0
KIND_HALTON = 1

DIM_POS_X = 0
DIM_POS_Y = 1
DIM_DIR_MU = 2
DIM_DIR_PHI = 3
DIM_TIME = 4
DIM_STREAMING = 5

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def default_dimension_budget(n_scatter_cap) -> int:
    """Halton dimension budget for a given scatter cap (inf allowed)."""
    cap = 8 if math.isinf(n_scatter_cap) else min(int(n_scatter_cap), 8)
    return DIM_STREAMING + 3 * cap


@njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def _prn_uniform(seed, pidx, dim):
    """Stateless counter-based uniform in [0,1): hash of (seed, pidx, dim)."""
    h = _mix64(_U64(seed) + _GOLDEN)
    h = _mix64(h ^ _U64(pidx))
    h = _mix64(h ^ _U64(dim))
    return (h >> _U64(11)) * _INV_2_53


@njit(cache=True, nogil=True)
def _radical_inverse(index, base):
    f = 1.0
    r = 0.0
    i = index
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


@njit(cache=True, nogil=True)
def _stream_uniform(kind, seed, start, budget, pidx, dim):
    if kind == KIND_HALTON and dim < budget:
        return _radical_inverse(start + pidx, PRIMES[dim])
    return _prn_uniform(seed, pidx, dim)


@njit(cache=True, nogil=True)
def _iso_direction(u1, u2):
    mu = 2.0 * u1 - 1.0
    s = math.sqrt(max(0.0, 1.0 - mu * mu))
    phi = 2.0 * math.pi * u2
    return s * math.cos(phi), s * math.sin(phi), mu


@dataclass(frozen=True)
class SampleStream:
    """Deterministic indexed source of uniforms in [0,1).

    kind "mc" is the counter-based pseudorandom generator keyed by `seed`;
    kind "qmc" is the plain (unscrambled) Halton sequence offset by
    `start_index`.  `dimension_budget` caps the Halton dimensions; None means
    resolve from the run's scatter cap at run time.
    """

    kind: str = "mc"
    seed: int = 0
    start_index: int = 0
    dimension_budget: int | None = None

    def __post_init__(self):
        if self.kind not in ("mc", "qmc"):
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.start_index < 0:
            raise ValueError("start_index must be nonnegative")
        if self.dimension_budget is not None and not (
            0 < self.dimension_budget <= PRIMES.size
        ):
            raise ValueError(f"dimension_budget must be in 1..{PRIMES.size}")

    def params(self, n_scatter_cap=math.inf):
        """(kind, seed, start, budget) scalars for the compiled kernels."""
        budget = self.dimension_budget
        if budget is None:
            budget = default_dimension_budget(n_scatter_cap)
        budget = min(budget, PRIMES.size)
        kind = KIND_HALTON if self.kind == "qmc" else KIND_PRN
        # Halton overflow draws stay decorrelated across start offsets.
        seed = self.seed + (self.start_index if kind == KIND_HALTON else 0)
        return kind, seed, self.start_index, budget


def radical_inverse(index: int, base: int) -> float:
    """Base-b radical inverse of a nonnegative integer index."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    if base < 2:
        raise ValueError("base must be >= 2")
    return float(_radical_inverse(int(index), int(base)))


def draw(stream: SampleStream, particle_index, dim: int):
    """Uniform(s) in [0,1) for (stream, particle_index, dim).

    `particle_index` may be a scalar or integer array; the result matches its
    shape.  Pure function: identical arguments yield identical values.
    """
    kind, seed, start, budget = stream.params()
    pidx = np.asarray(particle_index, dtype=np.int64)
    if pidx.ndim == 0:
        return float(_stream_uniform(kind, seed, start, budget, int(pidx), dim))
    out = np.empty(pidx.shape, dtype=np.float64)
    flat = pidx.ravel()
    oflat = out.ravel()
    for i in range(flat.size):
        oflat[i] = _stream_uniform(kind, seed, start, budget, flat[i], dim)
    return out


def sample_isotropic_direction(u1: float, u2: float) -> np.ndarray:
    """Unit 3-vector uniform on the sphere from two uniforms."""
    return np.array(_iso_direction(u1, u2))


def sample_exponential_distance(u: float, sigma: float) -> float:
    """Inverse-CDF exponential flight distance; +inf in vacuum (sigma=0)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return math.inf
    return -math.log1p(-u) / sigma


# -- births -------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _gen_source_births(kind, seed, start, budget, idx0, count, ndim,
                       reg_lo_x, reg_hi_x, reg_lo_y, reg_hi_y, src_cdf,
                       t0, dt, timed, w0,
                       x, y, ox, oy, oz, t, w):
    for i in range(count):
        pidx = idx0 + i
        u0 = _stream_uniform(kind, seed, start, budget, pidx, DIM_POS_X)
        r = np.searchsorted(src_cdf, u0, side="right")
        if r >= src_cdf.size:
            r = src_cdf.size - 1
        lo = 0.0 if r == 0 else src_cdf[r - 1]
        span = src_cdf[r] - lo
        frac = (u0 - lo) / span if span > 0.0 else 0.0
        x[i] = reg_lo_x[r] + frac * (reg_hi_x[r] - reg_lo_x[r])
        if ndim == 2:
            u1 = _stream_uniform(kind, seed, start, budget, pidx, DIM_POS_Y)
            y[i] = reg_lo_y[r] + u1 * (reg_hi_y[r] - reg_lo_y[r])
        else:
            y[i] = 0.0
        u2 = _stream_uniform(kind, seed, start, budget, pidx, DIM_DIR_MU)
        u3 = _stream_uniform(kind, seed, start, budget, pidx, DIM_DIR_PHI)
        ox[i], oy[i], oz[i] = _iso_direction(u2, u3)
        if timed:
            u4 = _stream_uniform(kind, seed, start, budget, pidx, DIM_TIME)
            t[i] = t0 + u4 * dt
        else:
            t[i] = t0
        w[i] = w0


@njit(cache=True, nogil=True)
def _gen_boundary_births(kind, seed, start, budget, idx0, count, ndim,
                         ex0, ex1, ey0, ey1, face_cdf,
                         t0, dt, timed, w0,
                         x, y, ox, oy, oz, t, w):
    # Face order matches geometry.FACES: x_lo, x_hi, y_lo, y_hi.
    for i in range(count):
        pidx = idx0 + i
        u0 = _stream_uniform(kind, seed, start, budget, pidx, DIM_POS_X)
        f = np.searchsorted(face_cdf, u0, side="right")
        if f >= face_cdf.size:
            f = face_cdf.size - 1
        lo = 0.0 if f == 0 else face_cdf[f - 1]
        span = face_cdf[f] - lo
        frac = (u0 - lo) / span if span > 0.0 else 0.0
        u2 = _stream_uniform(kind, seed, start, budget, pidx, DIM_DIR_MU)
        u3 = _stream_uniform(kind, seed, start, budget, pidx, DIM_DIR_PHI)
        mu_n = math.sqrt(u2)  # cosine-weighted angle to the inward normal
        s = math.sqrt(max(0.0, 1.0 - u2))
        phi = 2.0 * math.pi * u3
        ca, sa = math.cos(phi), math.sin(phi)
        if ndim == 1:
            # 1D slab: spatial axis is driven by omega_z
            x[i] = ex0 if f == 0 else ex1
            y[i] = 0.0
            oz[i] = mu_n if f == 0 else -mu_n
            ox[i], oy[i] = s * ca, s * sa
        else:
            if f == 0 or f == 1:
                x[i] = ex0 if f == 0 else ex1
                y[i] = ey0 + frac * (ey1 - ey0)
                ox[i] = mu_n if f == 0 else -mu_n
                oy[i], oz[i] = s * ca, s * sa
            else:
                x[i] = ex0 + frac * (ex1 - ex0)
                y[i] = ey0 if f == 2 else ey1
                oy[i] = mu_n if f == 2 else -mu_n
                ox[i], oz[i] = s * ca, s * sa
        if timed:
            u4 = _stream_uniform(kind, seed, start, budget, pidx, DIM_TIME)
            t[i] = t0 + u4 * dt
        else:
            t[i] = t0
        w[i] = w0


def sample_source_birth(stream: SampleStream, particle_index: int,
                        problem: ProblemSpec, n_total: int,
                        t0: float = 0.0, dt: float | None = None):
    """Birth state (x, omega, t, w0) for one volumetric source particle.

    Positions follow the region-wise source density (inverse CDF over
    regions, uniform within a region); directions are isotropic; in
    time-dependent mode the birth time is uniform over the step.  Weights are
    uniform and normalized so that `n_total` births carry the full source
    emission (per unit time in steady state, per step otherwise).
    """
    p = problem.packed()
    if p.q_total <= 0.0:
        raise ValueError("empty source: problem has zero total emission")
    timed = dt is not None
    w0 = p.q_total * (dt if timed else 1.0) / n_total
    kind, seed, start, budget = stream.params()
    out = [np.empty(1) for _ in range(7)]
    _gen_source_births(kind, seed, start, budget, int(particle_index), 1,
                       p.ndim, p.reg_lo_x, p.reg_hi_x, p.reg_lo_y, p.reg_hi_y,
                       p.src_cdf, t0, dt if timed else 0.0, timed, w0, *out)
    x, y, ox, oy, oz, t, w = (a[0] for a in out)
    pos = x if p.ndim == 1 else np.array([x, y])
    return pos, np.array([ox, oy, oz]), float(t), float(w)
