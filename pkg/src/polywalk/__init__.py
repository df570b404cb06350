"""Hit-&-Run family samplers for densities on polytopes ``{x : A x <= b}``.

The core modules are usable on their own::

    from polywalk import (ChainConfig, default_x0, make_cone, make_kernel,
                          place_target, run_chain)

    P = make_cone(4, 19.0)
    target = place_target("funnel", 4, 0.3, P)
    kernel = make_kernel("smlhr_delta", target, P, step=1.0, metric="sc_sq_hessian")
    samples, stats = run_chain(kernel, target, P, default_x0(P), ChainConfig(n_kept=1000))
"""

from polywalk.chain import (
    ChainConfig,
    ChainState,
    ChainStats,
    default_x0,
    log_acceptance,
    mh_step,
    run_chain,
    run_ensemble,
)
from polywalk.diagnostics import (
    Histogram2D,
    ess,
    hist2d,
    l1_error,
    min_marginal_ess,
    relative_performance,
    split_rhat,
)
from polywalk.geometry import (
    DomainError,
    Polytope,
    diagonal_exit,
    interior_point,
    make_box,
    make_cone,
    make_diamond,
    make_simplex,
)
from polywalk.metrics import FactorizedCovariance, MetricError, MetricTensor, factorize
from polywalk.proposals import ProposalKernel, make_kernel, parse_sampler
from polywalk.steps import Chi, HalfNormal, make_chi, make_half_normal_matched
from polywalk.targets import (
    AffineTransform,
    TargetDensity,
    make_bowtie,
    make_funnel,
    make_gaussian,
    place_target,
    transform_target,
)

__version__ = "0.1.0"
