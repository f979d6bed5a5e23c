"""Rule-based and clustering blocking baselines."""

from rlblock.baselines.clustering import (
    CanopyCover,
    canopies,
    canopy_cover,
    canopy_to_blocks,
    knn_block,
    knn_clusters,
    tfidf_matrix,
    tnn_block,
    tnn_clusters,
)
from rlblock.baselines.rules import (
    NOISY_CRITERIA,
    RLDATA_CRITERIA,
    RULE_PRESETS,
    And,
    Disagree,
    DisagreeCount,
    InitialDisagree,
    LevenshteinAtLeast,
    Or,
    PrefixDisagree,
    brute_force_block,
    evaluate_rule,
    parse_rule,
    preset_rule,
    rule_block,
)
