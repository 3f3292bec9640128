"""Scatter-capped Monte Carlo transport with implicit capture.

Histories carry a scatter counter n.  While n is below the cap the particle
samples candidate collisions at the local scattering rate, attenuates with
sigma_a, and scores into the `pre` tally; once n reaches the cap it streams
collision-free, attenuates with sigma_t, and scores into the `post` tally.
All scores use the exact attenuated track-length integral.

The stepwise remap re-expresses a step's full solution as fresh zero-scatter
particles (`run_remap`), with a legacy variant that instead accumulates the
step's particle populations (`run_legacy_combine`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import ProblemSpec, locate
from .sampling import (
    DIM_STREAMING,
    SampleStream,
    _gen_boundary_births,
    _gen_source_births,
    _iso_direction,
    _stream_uniform,
)

__all__ = [
    "Particle",
    "ParticleBank",
    "TallyField",
    "Census",
    "McLegResult",
    "RemapResult",
    "InvariantError",
    "score_segment",
    "advance_history",
    "run_mc_leg",
    "run_remap",
    "run_legacy_combine",
]

# Scatter cap encoding for the kernels; effectively unlimited.
_CAP_INF = 2**62

# Termination status codes used by the history kernel.
_ST_CUTOFF = 0
_ST_EXITED = 1
_ST_CENSUS = 2
_ST_INVALID = 3

_STATUS_NAMES = {_ST_CUTOFF: "weight-cutoff", _ST_EXITED: "exited", _ST_CENSUS: "census"}

DEFAULT_WEIGHT_CUTOFF_FRACTION = 1e-8


class InvariantError(RuntimeError):
    """A history produced an invalid state (NaN or negative weight)."""


def _encode_cap(n_s) -> int:
    if n_s is None or (isinstance(n_s, float) and math.isinf(n_s)):
        return _CAP_INF
    cap = int(n_s)
    if cap < 0 or cap != n_s:
        raise ValueError(f"invalid scatter cap {n_s!r}")
    return cap


@dataclass
class Particle:
    """Monte Carlo particle state."""

    x: object                 # float (1D) or length-2 array (2D)
    omega: np.ndarray         # unit 3-vector
    t: float = 0.0
    w: float = 1.0
    n: int = 0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64)
        if abs(np.linalg.norm(self.omega) - 1.0) > 1e-12:
            raise ValueError("omega must be a unit vector")
        if self.w < 0:
            raise ValueError("weight must be nonnegative")


@dataclass
class ParticleBank:
    """Column-wise particle storage shared with the compiled kernels."""

    x: np.ndarray
    y: np.ndarray
    ox: np.ndarray
    oy: np.ndarray
    oz: np.ndarray
    t: np.ndarray
    w: np.ndarray
    n: np.ndarray

    @classmethod
    def empty(cls, count: int = 0) -> "ParticleBank":
        f = lambda: np.zeros(count, dtype=np.float64)
        return cls(f(), f(), f(), f(), f(), f(), f(), np.zeros(count, dtype=np.int64))

    @classmethod
    def concat(cls, banks) -> "ParticleBank":
        banks = [b for b in banks if len(b)]
        if not banks:
            return cls.empty()
        return cls(*[np.concatenate([getattr(b, f) for b in banks])
                     for f in ("x", "y", "ox", "oy", "oz", "t", "w", "n")])

    def __len__(self) -> int:
        return self.x.size

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.w))

    def select(self, mask) -> "ParticleBank":
        return ParticleBank(*[getattr(self, f)[mask].copy()
                              for f in ("x", "y", "ox", "oy", "oz", "t", "w", "n")])


@dataclass
class TallyField:
    """Raw pre/post track-length accumulators, (time_bins, ncells)."""

    pre: np.ndarray
    post: np.ndarray

    @classmethod
    def for_problem(cls, problem: ProblemSpec, time_bins: int = 1) -> "TallyField":
        shape = (time_bins, problem.mesh.ncells)
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def time_bins(self) -> int:
        return self.pre.shape[0]


def score_segment(tally: TallyField, cell: int, w_in: float, sigma_att: float,
                  length: float, leg: str, time_bin: int = 0) -> float:
    """Score one attenuated track segment; returns the attenuated weight.

    The score is the exact integral of the decaying weight over the segment,
    w_in*(1-exp(-sigma*l))/sigma, with the vacuum limit w_in*l.
    """
    if length < 0 or sigma_att < 0:
        raise ValueError("length and sigma_att must be nonnegative")
    arr = tally.pre if leg == "pre" else tally.post
    if sigma_att == 0.0:
        arr[time_bin, cell] += w_in * length
        return w_in
    arr[time_bin, cell] += w_in * (-math.expm1(-sigma_att * length)) / sigma_att
    return w_in * math.exp(-sigma_att * length)


# -- history kernel -----------------------------------------------------------


@njit(cache=True, nogil=True)
def _axis_cell(edges, v):
    n = edges.size - 1
    if v >= edges[n]:
        return n - 1
    i = np.searchsorted(edges, v, side="right") - 1
    if i < 0:
        i = 0
    return i


@njit(cache=True, nogil=True)
def _score(arr, bin_cell, w, sig, s):
    if sig > 0.0:
        arr[bin_cell] += w * (-math.expm1(-sig * s)) / sig
        return w * math.exp(-sig * s)
    arr[bin_cell] += w * s
    return w


@njit(cache=True, nogil=True)
def _score_timed(arr, cell, ncells, tb_edges, tcur, w, sig, s):
    # split a segment across time bins; returns the attenuated weight
    T = tb_edges.size - 1
    rem = s
    tt = tcur
    while rem > 0.0:
        b = np.searchsorted(tb_edges, tt, side="right") - 1
        if b < 0:
            b = 0
        if b >= T:
            b = T - 1
        sub = tb_edges[b + 1] - tt
        if sub > rem or b == T - 1:
            sub = rem
        w = _score(arr, b * ncells + cell, w, sig, sub)
        tt += sub
        rem -= sub
    return w


@njit(cache=True, nogil=True)
def _advance_bank(ndim, nx, ny, ex, ey, sig_a, sig_s, sig_t,
                  n_cap, t_end, w_min, timed, tb_edges,
                  kind, seed, start, budget,
                  x, y, ox, oy, oz, t, w, n, pidx, status,
                  pre, post):
    """Run every particle in the bank to termination.  Returns weight sums.

    One optical-depth draw serves a whole flight: it is drawn (lazily, in the
    first scattering cell the flight touches) from the flight's fixed stream
    dimension 5+3k and translated through material changes, which is the
    exponential-transport equivalent of per-cell resampling and keeps each
    history's dimension layout independent of the mesh.
    """
    ncells = nx * ny
    exited_w = 0.0
    absorbed_w = 0.0
    census_w = 0.0
    for i in range(x.size):
        px = x[i]
        py = y[i]
        dx = ox[i]
        dy = oy[i]
        dz = oz[i]
        tt = t[i]
        ww = w[i]
        nn = n[i]
        pid = pidx[i]
        tau = -1.0   # optical depth to the next collision; <0 means not drawn
        ix = _axis_cell(ex, px)
        iy = _axis_cell(ey, py) if ndim == 2 else 0
        st = _ST_CUTOFF
        while True:
            if ww != ww or ww < 0.0:
                st = _ST_INVALID
                break
            cell = iy * nx + ix
            pre_limit = nn < n_cap
            sig = sig_a[cell] if pre_limit else sig_t[cell]

            # distance to the cell exit along the real 3D flight path
            if ndim == 1:
                if dz > 0.0:
                    d_exit = (ex[ix + 1] - px) / dz
                    nbr_ix, nbr_iy = ix + 1, iy
                    on_bnd = ix + 1 == nx
                elif dz < 0.0:
                    d_exit = (px - ex[ix]) / (-dz)
                    nbr_ix, nbr_iy = ix - 1, iy
                    on_bnd = ix == 0
                else:
                    d_exit = math.inf
                    nbr_ix, nbr_iy = ix, iy
                    on_bnd = False
            else:
                if dx > 0.0:
                    dxe = (ex[ix + 1] - px) / dx
                elif dx < 0.0:
                    dxe = (px - ex[ix]) / (-dx)
                else:
                    dxe = math.inf
                if dy > 0.0:
                    dye = (ey[iy + 1] - py) / dy
                elif dy < 0.0:
                    dye = (py - ey[iy]) / (-dy)
                else:
                    dye = math.inf
                if dxe <= dye:
                    d_exit = dxe
                    if dx > 0.0:
                        nbr_ix, nbr_iy = ix + 1, iy
                        on_bnd = ix + 1 == nx
                    else:
                        nbr_ix, nbr_iy = ix - 1, iy
                        on_bnd = ix == 0
                else:
                    d_exit = dye
                    if dy > 0.0:
                        nbr_ix, nbr_iy = ix, iy + 1
                        on_bnd = iy + 1 == ny
                    else:
                        nbr_ix, nbr_iy = ix, iy - 1
                        on_bnd = iy == 0

            # candidate collision from the flight's remaining optical depth
            d_coll = math.inf
            if pre_limit and sig_s[cell] > 0.0:
                if tau < 0.0:
                    u = _stream_uniform(kind, seed, start, budget, pid,
                                        DIM_STREAMING + 3 * nn)
                    tau = -math.log1p(-u)
                d_coll = tau / sig_s[cell]

            d_census = (t_end - tt) if timed else math.inf

            s = d_exit
            event = 2  # 0=census, 1=collision, 2=face
            if d_coll < s:
                s = d_coll
                event = 1
            if d_census <= s:
                s = d_census
                event = 0

            if s == math.inf:
                # direction has no in-plane component and nothing else can
                # happen: score the full decaying track, then drop the weight
                if sig > 0.0:
                    bc = cell if not timed else (tb_edges.size - 2) * ncells + cell
                    if pre_limit:
                        pre[bc] += ww / sig
                    else:
                        post[bc] += ww / sig
                absorbed_w += ww
                ww = 0.0
                st = _ST_CUTOFF
                break

            w_before = ww
            if timed:
                if pre_limit:
                    ww = _score_timed(pre, cell, ncells, tb_edges, tt, ww, sig, s)
                else:
                    ww = _score_timed(post, cell, ncells, tb_edges, tt, ww, sig, s)
            else:
                if pre_limit:
                    ww = _score(pre, cell, ww, sig, s)
                else:
                    ww = _score(post, cell, ww, sig, s)
            absorbed_w += w_before - ww

            if ndim == 1:
                px += dz * s
            else:
                px += dx * s
                py += dy * s
            tt += s

            if event == 0:
                census_w += ww
                st = _ST_CENSUS
                break
            if event == 1:
                base = DIM_STREAMING + 3 * nn
                u1 = _stream_uniform(kind, seed, start, budget, pid, base + 1)
                u2 = _stream_uniform(kind, seed, start, budget, pid, base + 2)
                dx, dy, dz = _iso_direction(u1, u2)
                nn += 1
                tau = -1.0
            else:
                if tau >= 0.0:
                    tau -= sig_s[cell] * s
                    if tau < 0.0:
                        tau = 0.0
                if on_bnd:
                    exited_w += ww
                    st = _ST_EXITED
                    break
                # snap to the crossed edge to avoid float drift
                if nbr_ix != ix:
                    px = ex[nbr_ix] if nbr_ix > ix else ex[ix]
                    ix = nbr_ix
                else:
                    py = ey[nbr_iy] if nbr_iy > iy else ey[iy]
                    iy = nbr_iy
            if ww < w_min:
                absorbed_w += ww
                ww = 0.0
                st = _ST_CUTOFF
                break

        x[i] = px
        y[i] = py
        ox[i] = dx
        oy[i] = dy
        oz[i] = dz
        t[i] = tt
        w[i] = ww
        n[i] = nn
        status[i] = st
    return exited_w, absorbed_w, census_w


@dataclass
class Census:
    """Step-end particle population plus the step's weight ledger."""

    bank: ParticleBank
    birth_weight: float = 0.0
    exited_weight: float = 0.0
    absorbed_weight: float = 0.0
    census_weight: float = 0.0

    def __len__(self):
        return len(self.bank)

    @property
    def balance_residual(self) -> float:
        """Relative weight-balance defect birth vs exited+absorbed+census."""
        if self.birth_weight == 0.0:
            return 0.0
        out = self.exited_weight + self.absorbed_weight + self.census_weight
        return abs(self.birth_weight - out) / self.birth_weight


@dataclass
class McLegResult:
    tally: TallyField                  # raw accumulators
    pre: np.ndarray                    # step-averaged scalar flux, (ncells,)
    post: np.ndarray
    census: Census
    counts: dict
    next_index: int                    # first unused stream particle index
    w_nominal: float                   # nominal birth weight of this step
    status: np.ndarray = field(repr=False, default=None)


def _resolve_w_min(bank: ParticleBank, frac: float) -> float:
    if len(bank) == 0:
        return 0.0
    return frac * bank.total_weight / len(bank)


def _run_bank(problem, bank, pidx, n_cap, stream_params, t0, dt,
              time_bins, tally, w_min, threads, block_size):
    """Advance a bank through the kernel in fixed-order blocks."""
    p = problem.packed()
    timed = dt is not None
    t_end = (t0 + dt) if timed else math.inf
    tb_edges = (np.linspace(t0, t_end, time_bins + 1) if timed
                else np.array([0.0, 1.0]))
    kind, seed, start, budget = stream_params
    nb = len(bank)
    status = np.zeros(nb, dtype=np.int8)
    pre_flat = tally.pre.reshape(-1)
    post_flat = tally.post.reshape(-1)

    blocks = [(i, min(i + block_size, nb)) for i in range(0, nb, block_size)]

    def run_block(lo, hi):
        bpre = np.zeros_like(pre_flat)
        bpost = np.zeros_like(post_flat)
        sums = _advance_bank(
            p.ndim, p.nx, p.ny, p.ex, p.ey, p.sig_a, p.sig_s, p.sig_t,
            n_cap, t_end, w_min, timed, tb_edges,
            kind, seed, start, budget,
            bank.x[lo:hi], bank.y[lo:hi], bank.ox[lo:hi], bank.oy[lo:hi],
            bank.oz[lo:hi], bank.t[lo:hi], bank.w[lo:hi], bank.n[lo:hi],
            pidx[lo:hi], status[lo:hi], bpre, bpost)
        return sums, bpre, bpost

    if threads > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: run_block(*b), blocks))
    else:
        results = [run_block(*b) for b in blocks]

    exited = absorbed = census_w = 0.0
    # merge in block order: results do not depend on the thread count
    for (sums, bpre, bpost) in results:
        exited += sums[0]
        absorbed += sums[1]
        census_w += sums[2]
        pre_flat += bpre
        post_flat += bpost

    if np.any(status == _ST_INVALID):
        bad = np.nonzero(status == _ST_INVALID)[0]
        raise InvariantError(f"history produced NaN/negative weight at rows {bad[:8]}")
    return status, exited, absorbed, census_w


def _normalized(raw: np.ndarray, problem: ProblemSpec, dt) -> np.ndarray:
    """Step-averaged scalar flux from a raw (T, ncells) accumulator."""
    v = problem.mesh.cell_volumes
    span = dt if dt is not None else 1.0
    return raw.sum(axis=0) / (v * span)


def run_mc_leg(problem: ProblemSpec, N_s, N_p: int, stream: SampleStream, *,
               census_in: ParticleBank | None = None,
               t0: float = 0.0, dt: float | None = None, time_bins: int = 1,
               index_base: int = 0, threads: int = 1, block_size: int = 8192,
               w_min_frac: float = DEFAULT_WEIGHT_CUTOFF_FRACTION) -> McLegResult:
    """One scatter-capped MC solve over a step (or to equilibrium).

    Spawns volumetric source particles (stream indices index_base..), injects
    boundary-source particles when the problem has incoming intensity, resumes
    `census_in` particles with reset scatter counters, and tallies the
    step-averaged angle-integrated flux separately for the below-cap and
    at-cap legs.
    """
    p = problem.packed()
    cap = _encode_cap(N_s)
    timed = dt is not None
    span = dt if timed else 1.0

    banks = []
    pidx_parts = []
    counts = {"n_source": 0, "n_boundary": 0, "n_census_in": 0,
              "source_base": index_base, "boundary_base": index_base}
    next_index = index_base

    if p.q_total > 0.0:
        if N_p < 1:
            raise ValueError("zero particles with a nonzero source")
        sp = stream.params(N_s)
        src = ParticleBank.empty(N_p)
        w0 = p.q_total * span / N_p
        _gen_source_births(*sp, next_index, N_p, p.ndim,
                           p.reg_lo_x, p.reg_hi_x, p.reg_lo_y, p.reg_hi_y,
                           p.src_cdf, t0, span, timed, w0,
                           src.x, src.y, src.ox, src.oy, src.oz, src.t, src.w)
        banks.append(src)
        pidx_parts.append(np.arange(next_index, next_index + N_p, dtype=np.int64))
        next_index += N_p
        counts["n_source"] = N_p

    if p.g_total > 0.0:
        n_b = N_p if p.q_total == 0.0 else max(1, int(round(N_p * p.g_total / p.q_total)))
        sp = stream.params(N_s)
        bnd = ParticleBank.empty(n_b)
        w0b = p.g_total * span / n_b
        face_cdf = np.cumsum(p.face_w) / p.g_total
        counts["boundary_base"] = next_index
        _gen_boundary_births(*sp, next_index, n_b, p.ndim,
                             p.ex[0], p.ex[-1], p.ey[0], p.ey[-1], face_cdf,
                             t0, span, timed, w0b,
                             bnd.x, bnd.y, bnd.ox, bnd.oy, bnd.oz, bnd.t, bnd.w)
        banks.append(bnd)
        pidx_parts.append(np.arange(next_index, next_index + n_b, dtype=np.int64))
        next_index += n_b
        counts["n_boundary"] = n_b

    if census_in is not None and len(census_in) > 0:
        res = ParticleBank(*[getattr(census_in, f).copy()
                             for f in ("x", "y", "ox", "oy", "oz", "t", "w", "n")])
        res.t[:] = t0
        res.n[:] = 0  # the scatter counter restarts every step
        banks.append(res)
        nc = len(res)
        pidx_parts.append(np.arange(next_index, next_index + nc, dtype=np.int64))
        next_index += nc
        counts["n_census_in"] = nc

    tally = TallyField.for_problem(problem, time_bins)
    if not banks:
        census = Census(ParticleBank.empty())
        zero = np.zeros(problem.mesh.ncells)
        return McLegResult(tally, zero, zero.copy(), census,
                           counts | {"n_histories": 0}, next_index, 0.0)

    bank = ParticleBank.concat(banks)
    pidx = np.concatenate(pidx_parts)
    birth_w = bank.total_weight
    w_min = _resolve_w_min(bank, w_min_frac)

    status, exited, absorbed, census_w = _run_bank(
        problem, bank, pidx, cap, stream.params(N_s), t0, dt,
        time_bins, tally, w_min, threads, block_size)

    census = Census(bank.select(status == _ST_CENSUS), birth_w, exited,
                    absorbed, census_w)
    counts["n_histories"] = len(bank)
    return McLegResult(tally, _normalized(tally.pre, problem, dt),
                       _normalized(tally.post, problem, dt), census, counts,
                       next_index, (p.q_total * span / N_p) if p.q_total > 0 else 0.0,
                       status)


def advance_history(p: Particle, N_s, t_end: float, stream: SampleStream,
                    problem: ProblemSpec, tally: TallyField, *,
                    particle_index: int = 0, w_min: float | None = None,
                    time_bins_origin: float = 0.0) -> str:
    """Advance a single particle to termination, scoring into `tally`.

    Returns "exited", "census" or "weight-cutoff".  The particle is updated
    in place.  `t_end` may be inf for equilibrium transport.
    """
    locate(problem, p.x)  # raises OutOfDomainError when outside
    pk = problem.packed()
    bank = ParticleBank.empty(1)
    if pk.ndim == 1:
        bank.x[0] = float(np.asarray(p.x).reshape(-1)[0])
    else:
        bank.x[0], bank.y[0] = np.asarray(p.x, dtype=np.float64).reshape(2)
    bank.ox[0], bank.oy[0], bank.oz[0] = p.omega
    bank.t[0] = p.t
    bank.w[0] = p.w
    bank.n[0] = p.n
    cap = _encode_cap(N_s)
    if p.n > cap:
        raise ValueError("particle scatter counter exceeds the cap")
    if w_min is None:
        w_min = DEFAULT_WEIGHT_CUTOFF_FRACTION * p.w
    timed = math.isfinite(t_end)
    dt = (t_end - time_bins_origin) if timed else None
    pidx = np.array([particle_index], dtype=np.int64)
    status, *_ = _run_bank(problem, bank, pidx, cap,
                           stream.params(N_s), time_bins_origin, dt,
                           tally.time_bins, tally, w_min, 1, 8192)
    p.x = bank.x[0] if pk.ndim == 1 else np.array([bank.x[0], bank.y[0]])
    p.omega = np.array([bank.ox[0], bank.oy[0], bank.oz[0]])
    p.t = float(bank.t[0])
    p.w = float(bank.w[0])
    p.n = int(bank.n[0])
    return _STATUS_NAMES[int(status[0])]


# -- stepwise remap -----------------------------------------------------------


@njit(cache=True, nogil=True)
def _gen_reemission_births(kind, seed, start, budget, idx0, count, ndim,
                           nx, ex, ey, cdf, tb_edges, ncells, w0,
                           x, y, ox, oy, oz, t, w):
    # cdf runs over flattened (time_bin, cell); emission is isotropic and
    # uniform inside the selected cell and time bin
    for i in range(count):
        pid = idx0 + i
        u0 = _stream_uniform(kind, seed, start, budget, pid, 0)
        k = np.searchsorted(cdf, u0, side="right")
        if k >= cdf.size:
            k = cdf.size - 1
        b = k // ncells
        cell = k % ncells
        iy = cell // nx
        ix = cell % nx
        lo = 0.0 if k == 0 else cdf[k - 1]
        span = cdf[k] - lo
        frac = (u0 - lo) / span if span > 0.0 else 0.0
        x[i] = ex[ix] + frac * (ex[ix + 1] - ex[ix])
        if ndim == 2:
            u1 = _stream_uniform(kind, seed, start, budget, pid, 1)
            y[i] = ey[iy] + u1 * (ey[iy + 1] - ey[iy])
        else:
            y[i] = 0.0
        u2 = _stream_uniform(kind, seed, start, budget, pid, 2)
        u3 = _stream_uniform(kind, seed, start, budget, pid, 3)
        ox[i], oy[i], oz[i] = _iso_direction(u2, u3)
        u4 = _stream_uniform(kind, seed, start, budget, pid, 4)
        t[i] = tb_edges[b] + u4 * (tb_edges[b + 1] - tb_edges[b])
        w[i] = w0


@dataclass
class RemapResult:
    census: Census
    tally: TallyField                 # raw zero-scatter (post) accumulator
    flux: np.ndarray                  # normalized step-average of the tally
    n_new: int                        # freshly sampled computer particles
    n_processed: int
    emitted_weight: float
    next_index: int = 0               # first unused stream particle index


def _reemission_weights(problem, leg: McLegResult, sn_flux, dt, include_pre):
    # The MC tallies are already time integrals.  The collided field is the
    # end-of-step value of a transient that starts each step at zero, so its
    # within-step time integral is the trapezoidal dt/2.
    p = problem.packed()
    T = leg.tally.time_bins
    raw = leg.tally.post.copy()
    if include_pre:
        raw += leg.tally.pre
    e = raw * p.sig_s[None, :]
    if sn_flux is not None:
        sn = np.asarray(sn_flux, dtype=np.float64)
        e += (p.sig_s * sn * p.vol)[None, :] * (0.5 * dt / T)
    return e


def _emit_and_stream(problem, emission, n_new, idx0, stream, census_in,
                     reuse_source, reuse_boundary, t0, dt, time_bins,
                     w_nominal, threads, block_size, w_min_frac):
    """Zero-scatter solve shared by both remap variants."""
    p = problem.packed()
    tb_edges = np.linspace(t0, t0 + dt, time_bins + 1)
    banks = []
    pidx_parts = []
    n_new_total = 0
    sp = stream.params(0)

    if reuse_source and p.q_total > 0.0:
        base, n_src = reuse_source
        src = ParticleBank.empty(n_src)
        w0 = p.q_total * dt / n_src
        _gen_source_births(*sp, base, n_src, p.ndim,
                           p.reg_lo_x, p.reg_hi_x, p.reg_lo_y, p.reg_hi_y,
                           p.src_cdf, t0, dt, True, w0,
                           src.x, src.y, src.ox, src.oy, src.oz, src.t, src.w)
        banks.append(src)
        pidx_parts.append(np.arange(base, base + n_src, dtype=np.int64))

    if reuse_boundary and p.g_total > 0.0:
        base, n_b = reuse_boundary
        bnd = ParticleBank.empty(n_b)
        w0b = p.g_total * dt / n_b
        face_cdf = np.cumsum(p.face_w) / p.g_total
        _gen_boundary_births(*sp, base, n_b, p.ndim,
                             p.ex[0], p.ex[-1], p.ey[0], p.ey[-1], face_cdf,
                             t0, dt, True, w0b,
                             bnd.x, bnd.y, bnd.ox, bnd.oy, bnd.oz, bnd.t, bnd.w)
        banks.append(bnd)
        pidx_parts.append(np.arange(base, base + n_b, dtype=np.int64))

    if census_in is not None and len(census_in) > 0:
        res = ParticleBank(*[getattr(census_in, f).copy()
                             for f in ("x", "y", "ox", "oy", "oz", "t", "w", "n")])
        res.t[:] = t0
        res.n[:] = 0
        banks.append(res)
        pidx_parts.append(np.arange(idx0, idx0 + len(res), dtype=np.int64))
        idx0 += len(res)

    emitted = float(emission.sum()) if emission is not None else 0.0
    if emission is not None and emitted > 0.0:
        if np.any(emission < 0):
            raise InvariantError("negative remap source field")
        if n_new is None:
            n_new = max(1, int(round(emitted / w_nominal))) if w_nominal > 0 else 1
        re = ParticleBank.empty(n_new)
        cdf = np.cumsum(emission.reshape(-1)) / emitted
        _gen_reemission_births(*sp, idx0, n_new, p.ndim, p.nx, p.ex, p.ey,
                               cdf, tb_edges, p.nx * p.ny, emitted / n_new,
                               re.x, re.y, re.ox, re.oy, re.oz, re.t, re.w)
        banks.append(re)
        pidx_parts.append(np.arange(idx0, idx0 + n_new, dtype=np.int64))
        idx0 += n_new
        n_new_total = n_new

    tally = TallyField.for_problem(problem, time_bins)
    if not banks:
        return RemapResult(Census(ParticleBank.empty()), tally,
                           np.zeros(problem.mesh.ncells), 0, 0, 0.0, idx0)

    bank = ParticleBank.concat(banks)
    pidx = np.concatenate(pidx_parts)
    birth_w = bank.total_weight
    w_min = _resolve_w_min(bank, w_min_frac)
    status, exited, absorbed, census_w = _run_bank(
        problem, bank, pidx, 0, stream.params(0), t0, dt, time_bins,
        tally, w_min, threads, block_size)
    census = Census(bank.select(status == _ST_CENSUS), birth_w, exited,
                    absorbed, census_w)
    return RemapResult(census, tally, _normalized(tally.post, problem, dt),
                       n_new_total, len(bank), birth_w, idx0)


def run_remap(problem: ProblemSpec, leg: McLegResult, sn_flux, stream: SampleStream,
              *, t0: float, dt: float, census_in: ParticleBank | None = None,
              threads: int = 1, block_size: int = 8192,
              w_min_frac: float = DEFAULT_WEIGHT_CUTOFF_FRACTION) -> RemapResult:
    """Zero-scatter resampling of the full step solution.

    Emits from Q plus the isotropic reemission of sigma_s times the step's
    pre/post MC fluxes and the deterministic collided flux, re-streams the
    step's initial and boundary particles, and returns the census that
    becomes the next step's initial data.  Source-born particles reuse the
    step-1 birth samples; only reemission particles are newly drawn.
    """
    emission = _reemission_weights(problem, leg, sn_flux, dt, include_pre=True)
    reuse_src = ((leg.counts["source_base"], leg.counts["n_source"])
                 if leg.counts["n_source"] else None)
    reuse_bnd = ((leg.counts["boundary_base"], leg.counts["n_boundary"])
                 if leg.counts["n_boundary"] else None)
    return _emit_and_stream(problem, emission, None, leg.next_index, stream,
                            census_in, reuse_src, reuse_bnd,
                            t0, dt, leg.tally.time_bins, leg.w_nominal,
                            threads, block_size, w_min_frac)


def run_legacy_combine(problem: ProblemSpec, leg: McLegResult, sn_flux,
                       stream: SampleStream, N_p: int, *, t0: float, dt: float,
                       threads: int = 1, block_size: int = 8192,
                       w_min_frac: float = DEFAULT_WEIGHT_CUTOFF_FRACTION):
    """Older remap: a fresh zero-scatter MC solve of the collided equation.

    Emits N_p brand-new particles from sigma_s times the post tally plus the
    deterministic collided flux, with zero initial and boundary data.  The
    step's final state is the union of the step-1 census and this leg's
    census, and the step flux estimate is pre + post + this leg's tally.

    Returns (remap_result, combined_census_bank, combined_flux).
    """
    emission = _reemission_weights(problem, leg, sn_flux, dt, include_pre=False)
    res = _emit_and_stream(problem, emission, N_p if emission.sum() > 0 else 0,
                           leg.next_index, stream, None, 0, None, t0, dt,
                           leg.tally.time_bins, leg.w_nominal, threads,
                           block_size, w_min_frac)
    combined = ParticleBank.concat([leg.census.bank, res.census.bank])
    flux = leg.pre + leg.post + res.flux
    return res, combined, flux
