"""Random instance generation and mining for stop-node partition violations.

The miner draws small valid instances from a seeded generator, builds the
greedy tree for each, sweeps a threshold grid, and records every threshold
whose stop cover fails to partition the realizations.  Identical configs
yield byte-for-byte identical finding lists.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from random import Random

from .audit import AuditReport, StopCover, overcount_audit, stop_cover
from .instances import Instance, format_rational, validate_instance
from .policy import LOWEST_INDEX, DecisionTree, TieBreak, greedy_policy, optimal_policy

__all__ = [
    "SearchConfig",
    "Finding",
    "generate_instances",
    "find_partition_violations",
    "default_threshold_grid",
    "finding_to_document",
    "findings_to_json",
    "write_findings",
]


@dataclass(frozen=True)
class SearchConfig:
    """Reproducible recipe for drawing instances and sweeping thresholds.

    ``thresholds`` of None means the per-tree automatic grid (midpoints
    between consecutive distinct expected rewards in the greedy tree, plus
    points just above each value); a tuple fixes the list instead, and
    entries outside a tree's valid range are skipped for that tree.
    ``class_mode`` "distinct" gives every realization its own class (so draws
    with identical observation rows are discarded as invalid); "random" draws
    classes with possible sharing.
    """

    realizations: tuple = (2, 5)
    items: tuple = (1, 4)
    outcome_arity: int = 2
    cost_mode: str = "unit"           # "unit" | "random"
    max_cost: int = 9
    prior_mode: str = "uniform"       # "uniform" | "rational"
    max_denominator: int = 60
    class_mode: str = "distinct"      # "distinct" | "random"
    thresholds: "tuple | None" = None
    seed: int = 0
    max_instances: int = 100
    stop_after_first: bool = False
    max_attempts_per_instance: int = 200

    def __post_init__(self):
        for name, (lo, hi) in (("realizations", self.realizations), ("items", self.items)):
            if lo > hi or lo < 0:
                raise ValueError(f"empty {name} range: ({lo}, {hi})")
        if self.realizations[0] < 1:
            raise ValueError("need at least one realization")
        if self.outcome_arity < 2:
            raise ValueError("outcome arity must be at least 2")
        if self.cost_mode not in ("unit", "random"):
            raise ValueError(f"unknown cost mode {self.cost_mode!r}")
        if self.prior_mode not in ("uniform", "rational"):
            raise ValueError(f"unknown prior mode {self.prior_mode!r}")
        if self.class_mode not in ("distinct", "random"):
            raise ValueError(f"unknown class mode {self.class_mode!r}")
        if self.max_instances < 0:
            raise ValueError("max_instances must be non-negative")

    def to_document(self) -> dict:
        return {
            "realizations": list(self.realizations),
            "items": list(self.items),
            "outcome_arity": self.outcome_arity,
            "cost_mode": self.cost_mode,
            "max_cost": self.max_cost,
            "prior_mode": self.prior_mode,
            "max_denominator": self.max_denominator,
            "class_mode": self.class_mode,
            "thresholds": None
            if self.thresholds is None
            else [format_rational(x) for x in self.thresholds],
            "seed": self.seed,
            "max_instances": self.max_instances,
            "stop_after_first": self.stop_after_first,
        }


def _draw_instance(cfg: SearchConfig, rng: Random) -> Instance:
    n_real = rng.randint(*cfg.realizations)
    n_items = rng.randint(*cfg.items)
    rows = [
        tuple(rng.randrange(cfg.outcome_arity) for _ in range(n_items))
        for _ in range(n_real)
    ]
    if cfg.class_mode == "distinct":
        classes = [f"k{i + 1}" for i in range(n_real)]
    else:
        classes = [f"k{rng.randint(1, n_real)}" for _ in range(n_real)]
    if cfg.prior_mode == "uniform":
        priors = [Fraction(1, n_real)] * n_real
    else:
        weights = []
        for _ in range(n_real):
            den = rng.randint(1, cfg.max_denominator)
            weights.append(Fraction(rng.randint(1, den), den))
        total = sum(weights)
        priors = [w / total for w in weights]
    if cfg.cost_mode == "unit":
        costs = [Fraction(1)] * n_items
    else:
        costs = [Fraction(rng.randint(1, cfg.max_cost)) for _ in range(n_items)]
    return Instance.build(
        items=[(f"e{i + 1}", costs[i]) for i in range(n_items)],
        realizations=[
            (f"phi{i + 1}", priors[i], classes[i], rows[i]) for i in range(n_real)
        ],
    )


def generate_instances(cfg: SearchConfig):
    """Yield up to ``max_instances`` valid instances, deterministically per seed.

    Invalid draws are discarded and redrawn; if a single slot exhausts its
    attempt budget the stream ends early with a diagnostic warning.
    """
    rng = Random(cfg.seed)
    for _ in range(cfg.max_instances):
        for _ in range(cfg.max_attempts_per_instance):
            candidate = _draw_instance(cfg, rng)
            if validate_instance(candidate).ok:
                yield candidate
                break
        else:
            warnings.warn(
                f"search: discarded {cfg.max_attempts_per_instance} consecutive invalid draws; "
                "stopping the stream (constraints may be unsatisfiable)",
                stacklevel=2,
            )
            return


def default_threshold_grid(tree: DecisionTree) -> tuple:
    """Thresholds covering every distinct stop cover of the tree.

    Stop covers are piecewise constant in x, changing only at the tree's
    distinct expected-reward values; midpoints of consecutive values hit
    every piece.  Points just above each value are added as well, mirroring
    how thresholds are usually quoted.
    """
    values = sorted({node.f_e for node in tree.nodes})
    grid = set()
    for lower, upper in zip(values, values[1:]):
        gap = upper - lower
        grid.add(lower + gap / 2)
        grid.add(lower + gap / 5)
    return tuple(sorted(grid))


@dataclass(frozen=True)
class Finding:
    """One mined partition violation, re-verifiable from its own fields."""

    instance: Instance
    tie_break: TieBreak
    threshold: Fraction
    cover: StopCover
    audit: AuditReport


def find_partition_violations(cfg: SearchConfig, extra_instances=()) -> list:
    """Mine findings from ``extra_instances`` followed by the generated stream.

    Every finding is re-verified (its stop cover recomputed) before emission.
    The greedy tree uses the default lowest-index tie-break.
    """
    tie = LOWEST_INDEX
    findings = []
    for inst in list(extra_instances) + list(generate_instances(cfg)):
        tree = greedy_policy(inst, tie)
        if cfg.thresholds is None:
            grid = default_threshold_grid(tree)
        else:
            grid = tuple(
                x for x in cfg.thresholds if tree.root.f_e < Fraction(x) <= 1
            )
        opt_profile = None
        for x in grid:
            cover = stop_cover(tree, x)
            if cover.verdict != "overlap":
                continue
            recheck = stop_cover(tree, x)
            if recheck.verdict != "overlap":
                continue
            if opt_profile is None:
                _, opt_profile = optimal_policy(inst)
            findings.append(
                Finding(
                    instance=inst,
                    tie_break=tie,
                    threshold=Fraction(x),
                    cover=cover,
                    audit=overcount_audit(tree, opt_profile, x),
                )
            )
            if cfg.stop_after_first:
                return findings
    return findings


def finding_to_document(finding: Finding) -> dict:
    inst = finding.instance
    return {
        "instance": inst.to_document(),
        "tie_break": finding.tie_break.label(),
        "x": format_rational(finding.threshold),
        "verdict": finding.cover.verdict,
        "witness": [
            {
                "node": entry.node.name,
                "members": list(entry.node.member_ids(inst)),
            }
            for entry in (finding.cover.witness or ())
        ],
        "stop_nodes": [
            {
                "node": entry.node.name,
                "members": list(entry.node.member_ids(inst)),
                "stoppers": [inst.realizations[i].id for i in entry.stoppers],
                "f_e": format_rational(entry.f_e),
            }
            for entry in finding.cover.entries
        ],
        "audit": {
            "overlap_weighted_sum": format_rational(finding.audit.overlap_weighted_sum),
            "true_expectation": format_rational(finding.audit.true_expectation),
            "reference_c_avg": format_rational(finding.audit.reference_c_avg),
            "gap": format_rational(finding.audit.gap),
            "total_stop_mass": format_rational(finding.audit.total_stop_mass),
        },
    }


def findings_to_json(findings) -> str:
    return json.dumps([finding_to_document(f) for f in findings], indent=2) + "\n"


def write_findings(findings, out_dir) -> list:
    """Write one NNNN.json per finding into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, finding in enumerate(findings):
        path = out / f"{i:04d}.json"
        path.write_text(json.dumps(finding_to_document(finding), indent=2) + "\n")
        paths.append(path)
    return paths
