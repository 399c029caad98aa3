"""swaynet: retweet-network backbones, aligned-user follower dynamics, and
cascade-driven growth-rate fitting."""

from .alignment import (
    AlignmentLabel,
    InvolvementProfile,
    classify_alignment,
    classify_all,
    coverage_curve,
    involvement_profiles,
    ternary_histogram,
)
from .backbone import (
    EdgeSignificance,
    HeterogeneityReport,
    TopologyReport,
    backbone_overlap,
    backbone_size_curve,
    disparity_filter,
    edge_alpha,
    edge_significance,
    global_threshold_backbone,
    local_heterogeneity,
    null_heterogeneity_moments,
    strong_disorder_test,
    topology_report,
)
from .events import (
    CONTENT_CLASSES,
    FollowerLog,
    ParseError,
    RetweetEvent,
    UserFlagRates,
    build_follower_logs,
    classify_category,
    parse_events,
    user_flag_rates,
)
from .graph import (
    PartitionReport,
    WeightedDigraph,
    build_network,
    creator_consumer_partition,
    node_degrees,
    reachable_set,
    strongly_connected_components,
)
from .growth import (
    GrowthPoint,
    TimeWindow,
    active_users,
    daily_counts,
    sliding_windows,
    trend_line,
    window_growth_rate,
)
from .sir import (
    CascadeSetup,
    FitConfig,
    FitResult,
    cascade_populations,
    final_size,
    fit_parameters,
    simulate_growth_rate,
    swayable_recovered_count,
    temporal_network,
    window_loss,
)
from .synth import SynthConfig, generate_synthetic, synthesize

__version__ = "0.1.0"
