"""Finite-blocklength strong-coordination toolkit.

Exact probability tables, information measures with third-moment
normal-approximation budgets, inner/outer rate-region bounds, an exact
random-binning scheme simulator, optimal binary hypothesis tests with
assembled converse witnesses, and a deterministic batch CLI.
"""

from .binning import (
    BinningRealization,
    EntropyReport,
    OneShotReport,
    SchemeConfig,
    SimReport,
    TrialMetrics,
    draw_binning,
    entropy_diagnostics,
    epsilon_terms,
    monte_carlo,
    osrb_monte_carlo,
    osrb_uniformity_bound,
    rb_joint,
    rc_joint,
    select_f,
    slc_error_bound,
    slc_posterior,
    trial_metrics,
)
from .cltverify import AtomLaw, BEGapResult, be_gap, convolve_n, density_law, law_stats
from .errors import (
    CoordsimError,
    DomainError,
    ResourceLimitError,
    SearchError,
    ShapeError,
)
from .measures import (
    BEStats,
    be_stats,
    conditional_dispersion,
    dispersion_of_channel,
    gaussian_q,
    gaussian_q_inv,
    mutual_information,
)
from .nptest import (
    BinaryTest,
    CandidateCheck,
    NPResult,
    SandwichReport,
    WitnessReport,
    beta_sandwich,
    converse_witness,
    np_beta,
    np_test,
    rr0_converse_witness,
)
from .optimize import optimize_decomposition
from .probability import (
    ConditionalPmf,
    DensityTable,
    JointPmf,
    Pmf,
    compose_chain,
    conditional,
    entropy_density,
    iid_extension,
    info_density,
    kl_divergence,
    l1_distance,
    marginalize,
    memory_cap,
    regroup_pair,
    sequence_digits,
    sequence_index,
)
from .region import (
    Decomposition,
    GammaTriple,
    RegionPoint,
    asymptotic_region,
    closed_result_check,
    gamma_tradeoff,
    inner_bound,
    outer_bound,
    parse_gamma_rule,
    stats_wu,
    stats_wuv,
)

__version__ = "0.1.0"
