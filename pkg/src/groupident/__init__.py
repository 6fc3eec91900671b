"""Decision-tree policies for group identification, with exact stop-node auditing.

Everything numeric is an exact ``fractions.Fraction``; the only float in the
package is the logarithm inside the bound audit.
"""

from .audit import (
    AuditReport,
    BoundReport,
    StopCover,
    StopEntry,
    ThresholdError,
    bound_audit,
    overcount_audit,
    stop_cover,
    stop_node,
)
from .counterexample import COUNTEREXAMPLE_JSON, counterexample_instance, letter_names
from .instances import (
    Instance,
    InstanceError,
    Item,
    PartialRealization,
    Realization,
    ValidationReport,
    canonical_set,
    class_masses,
    format_rational,
    instance_digest,
    node_mass,
    parse_instance,
    parse_rational,
    serialize_instance,
    split_by_outcome,
    validate_instance,
)
from .objective import (
    GROUP_ID,
    ExplicitTable,
    GroupId,
    PropertyViolation,
    check_adaptive_submodularity,
    check_strong_adaptive_monotonicity,
    compute_eta,
    coverage_value,
    expected_reward,
    marginal_gain,
    reward,
)
from .policy import (
    HIGHEST_INDEX,
    LOWEST_INDEX,
    CostProfile,
    DecisionTree,
    TieBreak,
    TreeNode,
    evaluate_cost,
    greedy_policy,
    optimal_policy,
    seeded_random,
    to_dot,
    trace,
)
from .search import (
    Finding,
    SearchConfig,
    default_threshold_grid,
    find_partition_violations,
    finding_to_document,
    findings_to_json,
    generate_instances,
    write_findings,
)

__version__ = "0.1.0"
