"""Batched single-index contextual bandits: BIDS, SADE, environments and replay."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import (  # noqa: F401
    BinId,
    ProjectedInterval,
    Schedule,
    bin_of,
    children_of,
    compute_grid,
    compute_split_factors,
    compute_widths,
    interval_from_pilot,
    make_schedule,
    parent_of,
)
from .policy import BidsPolicy, EliminationPolicy, EstimateThenBids, play, threshold_U  # noqa: F401
from .sir import (  # noqa: F401
    GaussianScore,
    combine_directions,
    initial_phase,
    perturb_direction,
    sade_estimate,
    sin_angle,
)
