"""mcsn: hybrid scatter-capped Monte Carlo / discrete-ordinates transport.

The MC leg advances particles through at most a fixed number of material
scatterings per step; particles past the cap feed a discrete-ordinates solve
of the remaining collisions.  A stepwise remap resamples the combined
solution back into fresh zero-scatter particles, which keeps the
low-scatter population from depleting in time-dependent runs and keeps the
sampling dimension low enough that swapping the pseudorandom stream for a
Halton sequence buys a better convergence rate.
"""

from .analysis import (
    ConvergencePoint,
    deterministic_reference,
    reference_by_cap,
    erlang_sandwich_bounds,
    erlang_tail,
    fit_convergence_rate,
    l2_error,
    run_sweep,
)
from .benchmarks import dogleg_problem, homogeneous_slab, reed_problem
from .driver import (
    HybridConfig,
    StepState,
    hybrid_step,
    n_collision_reference,
    steady_state_solve,
)
from .geometry import (
    BoundarySource,
    Mesh,
    OutOfDomainError,
    ProblemSpec,
    RegionSpec,
    distance_to_cell_exit,
    locate,
    material_at,
)
from .mc import (
    Census,
    McLegResult,
    Particle,
    ParticleBank,
    TallyField,
    advance_history,
    run_legacy_combine,
    run_mc_leg,
    run_remap,
    score_segment,
)
from .sampling import (
    SampleStream,
    draw,
    radical_inverse,
    sample_exponential_distance,
    sample_isotropic_direction,
    sample_source_birth,
)
from .sn import (
    QuadratureSet,
    SnSolution,
    gauss_legendre_quadrature,
    product_quadrature_2d,
    source_iteration,
    sweep,
)

__version__ = "0.1.0"
