#!/usr/bin/env python3
"""How fast particles outrun a scatter cap.

In a homogeneous scatterer the time of the (N+1)-th collision is a sum of
exponentials, so the fraction of particles still below a cap N after a time
step has the closed form exp(-s*t) * sum_{j<=N} (s*t)^j / j!.  This script
measures that survival with the transport kernel (particles banked at t=0,
one census step) and overlays the formula and its two-sided bounds.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mcsn import SampleStream, erlang_sandwich_bounds, erlang_tail
from mcsn.geometry import Mesh, ProblemSpec, RegionSpec
from mcsn.mc import ParticleBank, run_mc_leg

sigma_s, n = 2.0, 50000
problem = ProblemSpec(Mesh.uniform_1d(-100, 100, 100),
                      [RegionSpec((-100.0,), (100.0,), 0.0, sigma_s, 0.0)])
rng = np.random.default_rng(1)

fig, ax = plt.subplots(figsize=(6, 4))
times = np.linspace(0.05, 3.0, 12)
for cap, color in ((0, "tab:blue"), (1, "tab:green"), (3, "tab:red")):
    measured = []
    for dt in times:
        bank = ParticleBank.empty(n)
        bank.w[:] = 1.0
        mu = 2 * rng.random(n) - 1
        phi = 2 * np.pi * rng.random(n)
        s = np.sqrt(1 - mu**2)
        bank.ox[:], bank.oy[:], bank.oz[:] = s * np.cos(phi), s * np.sin(phi), mu
        leg = run_mc_leg(problem, cap + 1, 1, SampleStream("mc", seed=cap),
                         census_in=bank, t0=0.0, dt=float(dt))
        measured.append(np.sum(leg.census.bank.n <= cap) / n)
    exact = [erlang_tail(cap, sigma_s, t) for t in times]
    hi = [erlang_sandwich_bounds(cap, sigma_s, sigma_s, 1.0, t)[1] for t in times]
    ax.plot(times, measured, "o", ms=4, color=color, label=f"simulated, cap {cap}")
    ax.plot(times, exact, "-", color=color, lw=1)
    ax.plot(times, np.minimum(hi, 1.2), ":", color=color, lw=0.8)
lo = [erlang_sandwich_bounds(0, sigma_s, sigma_s, 1.0, t)[0] for t in times]
ax.plot(times, lo, "k--", lw=0.8, label="lower bound exp(-s t)")
ax.set_xlabel("elapsed time")
ax.set_ylabel("fraction still at or below the cap")
ax.set_ylim(0, 1.15)
ax.grid(alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("scatter_count_tails.png", dpi=150)
print("wrote scatter_count_tails.png")
