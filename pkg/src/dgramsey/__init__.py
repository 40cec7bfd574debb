"""Distance graphs, sphere folding and density experiments on grid sets."""

from .counting import (
    CountingEstimate,
    CutoffProfile,
    corollary_lower_bound_check,
    default_cutoffs,
    estimate_c0,
    estimate_I,
    estimate_T,
    gvn_check,
)
from .errors import *  # noqa: F401,F403
from .geometry import (
    Embedding,
    SphereSection,
    distance_to_affine_span,
    fold_graph,
    radius_gram,
    sample_sphere,
    solution_sphere,
    verify_isometric,
)
from .graphs import (
    DegeneracyOrdering,
    DistanceGraph,
    attach,
    build_family,
    combinatorial_degeneracy,
    complete_graph,
    cycle_graph,
    degeneracy_ordering,
    grid_graph,
    is_proper,
    load_graph,
    path_graph,
    sharpness_graph,
    single_edge,
)
from .gridset import (
    GridFunction,
    GridSet,
    generate,
    read_gridset,
    smooth_bandlimited,
    spectrum_annulus_mass,
    u1_norm,
    windowed_density_extremes,
    write_gridset,
)
from .kernels import BACKEND
from .localization import (
    LocalizationResult,
    ScaleChain,
    aggregate_counts,
    conditional_expectation,
    energy,
    find_uniform_scale,
    holder_chain,
)
from .search import CopyQuery, ScanReport, find_copy, scan_lambda, threshold_estimate

__version__ = "0.1.0"
