"""Discrete-ordinates solver: upwind piecewise-constant sweeps + source iteration.

The collided equation is solved with total removal sigma_t, isotropic
in-scatter (sigma_s/4pi)*phi, and a fixed isotropic source supplied per cell.
Quadrature weights sum to 4pi so the scalar flux is the plain weighted sum of
the ordinate fluxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import ProblemSpec

__all__ = [
    "QuadratureSet",
    "SnSolution",
    "SnNonConvergence",
    "gauss_legendre_quadrature",
    "product_quadrature_2d",
    "default_quadrature",
    "sweep",
    "source_iteration",
]

FOUR_PI = 4.0 * math.pi


class SnNonConvergence(RuntimeError):
    """Source iteration exceeded max_iter; carries the last iterate."""

    def __init__(self, message, solution):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class QuadratureSet:
    """Angular quadrature: unit direction vectors and weights summing to 4pi."""

    directions: np.ndarray   # (M, 3)
    weights: np.ndarray      # (M,)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)
        if d.shape[0] != w.size or d.shape[1] != 3:
            raise ValueError("directions must be (M,3) matching weights")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return self.weights.size


def gauss_legendre_quadrature(order: int) -> QuadratureSet:
    """1D slab quadrature: Gauss-Legendre nodes in the polar cosine.

    The mu weights sum to 2; the returned weights carry the 2pi azimuthal
    factor so the full set sums to 4pi.  Directions are unit 3-vectors with
    the polar cosine in the z component (the 1D streaming axis).
    """
    if order < 2 or order % 2 != 0:
        raise ValueError("order must be even and >= 2")
    mu, wmu = np.polynomial.legendre.leggauss(order)
    s = np.sqrt(1.0 - mu**2)
    directions = np.column_stack([s, np.zeros_like(mu), mu])
    return QuadratureSet(directions, 2.0 * math.pi * wmu)


def product_quadrature_2d(polar_order: int, azimuthal_count: int) -> QuadratureSet:
    """Tensor quadrature for XY geometry: GL in the polar cosine times
    equally weighted azimuths (midpoint angles, quadrant symmetric)."""
    if polar_order < 2 or polar_order % 2 != 0:
        raise ValueError("polar_order must be even and >= 2")
    if azimuthal_count < 4 or azimuthal_count % 4 != 0:
        raise ValueError("azimuthal_count must be a positive multiple of 4")
    xi, wxi = np.polynomial.legendre.leggauss(polar_order)
    phi = (np.arange(azimuthal_count) + 0.5) * (2.0 * math.pi / azimuthal_count)
    s = np.sqrt(1.0 - xi**2)
    dirs = []
    wts = []
    for j in range(polar_order):
        for k in range(azimuthal_count):
            dirs.append((s[j] * math.cos(phi[k]), s[j] * math.sin(phi[k]), xi[j]))
            wts.append(wxi[j] * 2.0 * math.pi / azimuthal_count)
    return QuadratureSet(np.array(dirs), np.array(wts))


def default_quadrature(problem: ProblemSpec, order: int = 4) -> QuadratureSet:
    if problem.mesh.dimension == 1:
        return gauss_legendre_quadrature(order)
    return product_quadrature_2d(order, 2 * order)


@dataclass
class SnSolution:
    psi: np.ndarray          # (M, ncells) angular flux
    phi: np.ndarray          # (ncells,) scalar flux
    iterations: int
    quadrature: QuadratureSet
    phi_source: np.ndarray = None   # iterate that fed the final in-scatter

    def balance_residual(self, problem: ProblemSpec, fixed_source) -> float:
        """Relative defect of absorption + leakage vs fixed source plus
        in-scatter minus self-scatter (the exact discrete identity)."""
        p = problem.packed()
        absorption = float(np.sum(p.sig_a * self.phi * p.vol))
        leak = _leakage(problem, self)
        src = float(np.sum(FOUR_PI * np.asarray(fixed_source) * p.vol))
        phi_src = self.phi_source if self.phi_source is not None else self.phi
        net_scatter = float(np.sum(p.sig_s * (phi_src - self.phi) * p.vol))
        if src == 0.0:
            return abs(absorption + leak - net_scatter)
        return abs(absorption + leak - src - net_scatter) / src


def _leakage(problem: ProblemSpec, sol: SnSolution) -> float:
    """Outgoing current through the domain boundary for the step scheme
    (the upwind face value equals the boundary cell average)."""
    p = problem.packed()
    out = 0.0
    dirs, wts = sol.quadrature.directions, sol.quadrature.weights
    if p.ndim == 1:
        psi = sol.psi.reshape(len(dirs), p.nx)
        for m in range(len(dirs)):
            mu = dirs[m, 2]
            if mu > 0:
                out += wts[m] * mu * psi[m, -1]
            elif mu < 0:
                out += wts[m] * (-mu) * psi[m, 0]
        return out
    hx = np.diff(p.ex)
    hy = np.diff(p.ey)
    psi = sol.psi.reshape(len(dirs), p.ny, p.nx)
    for m in range(len(dirs)):
        wx, wy = dirs[m, 0], dirs[m, 1]
        if wx > 0:
            out += wts[m] * wx * float(psi[m, :, -1] @ hy)
        elif wx < 0:
            out += wts[m] * (-wx) * float(psi[m, :, 0] @ hy)
        if wy > 0:
            out += wts[m] * wy * float(psi[m, -1, :] @ hx)
        elif wy < 0:
            out += wts[m] * (-wy) * float(psi[m, 0, :] @ hx)
    return out


@njit(cache=True, nogil=True)
def _sweep_1d(mu, h, sig_t, src, psi):
    nx = h.size
    if mu > 0.0:
        inflow = 0.0
        for i in range(nx):
            val = (src[i] * h[i] + mu * inflow) / (mu + sig_t[i] * h[i])
            psi[i] = val
            inflow = val
    else:
        am = -mu
        inflow = 0.0
        for i in range(nx - 1, -1, -1):
            val = (src[i] * h[i] + am * inflow) / (am + sig_t[i] * h[i])
            psi[i] = val
            inflow = val


@njit(cache=True, nogil=True)
def _sweep_2d(wx, wy, hx, hy, sig_t, src, psi, inflow_x):
    # psi, src, sig_t are flat (ny*nx); inflow_x is scratch of size nx
    nx = hx.size
    ny = hy.size
    ax = abs(wx)
    ay = abs(wy)
    x0, x1, dxi = (0, nx, 1) if wx >= 0.0 else (nx - 1, -1, -1)
    y0, y1, dyi = (0, ny, 1) if wy >= 0.0 else (ny - 1, -1, -1)
    for i in range(nx):
        inflow_x[i] = 0.0
    iy = y0
    while iy != y1:
        inflow_y = 0.0
        ix = x0
        while ix != x1:
            c = iy * nx + ix
            vol = hx[ix] * hy[iy]
            denom = ax * hy[iy] + ay * hx[ix] + sig_t[c] * vol
            val = (src[c] * vol + ax * hy[iy] * inflow_y + ay * hx[ix] * inflow_x[ix]) / denom
            psi[c] = val
            inflow_y = val
            inflow_x[ix] = val
            ix += dxi
        iy += dyi


def sweep(ordinate, source, problem: ProblemSpec) -> np.ndarray:
    """Angular flux of one ordinate given a per-cell isotropic source density.

    `ordinate` is a unit 3-vector; `source` is the angular source (per
    steradian), constant per cell.  Incoming boundary flux is zero.
    """
    p = problem.packed()
    src = np.asarray(source, dtype=np.float64).reshape(-1)
    psi = np.zeros(p.nx * p.ny)
    if p.ndim == 1:
        _sweep_1d(float(ordinate[2]), np.diff(p.ex), p.sig_t, src, psi)
    else:
        scratch = np.empty(p.nx)
        _sweep_2d(float(ordinate[0]), float(ordinate[1]), np.diff(p.ex),
                  np.diff(p.ey), p.sig_t, src, psi, scratch)
    return psi


@njit(cache=True, nogil=True)
def _sweep_all_1d(mus, wts, h, sig_t, src, psi_all, phi):
    phi[:] = 0.0
    for m in range(mus.size):
        _sweep_1d(mus[m], h, sig_t, src, psi_all[m])
        for i in range(h.size):
            phi[i] += wts[m] * psi_all[m, i]


@njit(cache=True, nogil=True)
def _sweep_all_2d(wxs, wys, wts, hx, hy, sig_t, src, psi_all, phi, scratch):
    phi[:] = 0.0
    for m in range(wxs.size):
        _sweep_2d(wxs[m], wys[m], hx, hy, sig_t, src, psi_all[m], scratch)
        for c in range(phi.size):
            phi[c] += wts[m] * psi_all[m, c]


def source_iteration(fixed_source, problem: ProblemSpec,
                     quadrature: QuadratureSet | None = None,
                     tol: float = 1e-4, max_iter: int = 1000) -> SnSolution:
    """Solve the scattering-coupled transport system by source iteration.

    `fixed_source` is the per-cell isotropic angular source density (for the
    collided solve this is sigma_s/4pi times the at-cap MC flux).  Each
    iteration sweeps every ordinate with source f + (sigma_s/4pi)*phi.
    Converged when the max-norm change of phi drops below tol times
    max(1, max phi), so small sources converge in few sweeps; an all-zero
    fixed source short-circuits at 0 iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if quadrature is None:
        quadrature = default_quadrature(problem)
    p = problem.packed()
    ncells = p.nx * p.ny
    f = np.asarray(fixed_source, dtype=np.float64).reshape(-1)
    if f.size != ncells:
        raise ValueError("fixed source does not match the mesh")
    psi = np.zeros((len(quadrature), ncells))
    if not np.any(f):
        zero = np.zeros(ncells)
        return SnSolution(psi, zero, 0, quadrature, zero.copy())

    dirs = quadrature.directions
    wts = quadrature.weights
    hx = np.diff(p.ex)
    hy = np.diff(p.ey)
    phi = np.zeros(ncells)
    phi_new = np.zeros(ncells)
    scratch = np.empty(p.nx)
    scat = p.sig_s / FOUR_PI
    for it in range(1, max_iter + 1):
        src = f + scat * phi
        if p.ndim == 1:
            _sweep_all_1d(dirs[:, 2].copy(), wts, hx, p.sig_t, src, psi, phi_new)
        else:
            _sweep_all_2d(dirs[:, 0].copy(), dirs[:, 1].copy(), wts, hx, hy,
                          p.sig_t, src, psi, phi_new, scratch)
        delta = float(np.max(np.abs(phi_new - phi)))
        phi, phi_new = phi_new.copy(), phi
        # phi_new now holds the iterate whose in-scatter fed this sweep
        if not np.any(p.sig_s * np.abs(phi - phi_new) > 0.0):
            return SnSolution(psi, phi, it, quadrature, phi_new)
        if delta <= tol * max(1.0, float(np.max(np.abs(phi)))):
            return SnSolution(psi, phi, it, quadrature, phi_new)
    raise SnNonConvergence(
        f"source iteration did not reach tol={tol} in {max_iter} sweeps",
        SnSolution(psi, phi, max_iter, quadrature, phi_new))
