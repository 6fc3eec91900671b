"""Stop-node computation, the partition verdict, and the overcounting/bound audits.

Fix a threshold x strictly above the root's expected reward and at most the
coverage value 1.  A realization's stop node is the deepest node on its
root-to-leaf path whose expected reward is still below x.  The audited claim
is that the distinct stop nodes' surviving sets partition the realizations;
``stop_cover`` renders the verdict, and ``overcount_audit`` quantifies by how
much a node-mass-weighted cost expectation overshoots the true average cost
whenever they do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .instances import Instance, node_mass
from .objective import compute_eta, coverage_value
from .policy import CostProfile, DecisionTree, TreeNode, trace

__all__ = [
    "ThresholdError",
    "StopEntry",
    "StopCover",
    "AuditReport",
    "BoundReport",
    "stop_node",
    "stop_cover",
    "overcount_audit",
    "bound_audit",
]

# Comparison slack for the single float operation in the bound audit (the log).
LOG_TOLERANCE = 1e-12


class ThresholdError(ValueError):
    """Threshold outside the valid half-open range (f_E(root), 1]."""


def _check_threshold(tree: DecisionTree, x: Fraction) -> Fraction:
    x = Fraction(x)
    if x > 1:
        raise ThresholdError(f"threshold out of range: x = {x} exceeds the coverage value 1")
    if x <= tree.root.f_e:
        raise ThresholdError(f"no stop node: x = {x} <= f_E(root) = {tree.root.f_e}")
    return x


def stop_node(tree: DecisionTree, phi_id: str, x) -> TreeNode:
    """Deepest node on the realization's path with expected reward below x.

    Expected reward is non-decreasing along any root-to-leaf path, so this is
    the last qualifying node on the trace.
    """
    x = _check_threshold(tree, x)
    found = None
    for node in trace(tree, phi_id):
        if node.f_e < x:
            found = node
    return found


@dataclass(frozen=True)
class StopEntry:
    """One distinct stop node: its surviving set and who actually stops there."""

    node: TreeNode
    members: tuple
    stoppers: tuple
    f_e: Fraction


@dataclass(frozen=True)
class StopCover:
    """All distinct stop nodes at a threshold, with the partition verdict.

    ``verdict`` is "partition" when the surviving sets are pairwise disjoint
    and cover every realization, "overlap" with a witness pair of entries
    otherwise, and "gap" with an uncovered realization index in the (here
    unreachable) case of disjoint sets that miss someone.
    """

    x: Fraction
    entries: tuple
    verdict: str
    witness: "tuple | None"
    uncovered: "int | None"


def stop_cover(tree: DecisionTree, x) -> StopCover:
    """Group realizations by stop node and judge the partition claim."""
    x = _check_threshold(tree, x)
    inst = tree.instance
    stops = {}
    for phi in inst.realizations:
        node = stop_node(tree, phi.id, x)
        stops.setdefault(node, []).append(inst.realization_index(phi.id))
    bfs_rank = {node: i for i, node in enumerate(tree.nodes)}
    ordered = sorted(stops, key=bfs_rank.get)
    entries = tuple(
        StopEntry(node=node, members=node.members, stoppers=tuple(stops[node]), f_e=node.f_e)
        for node in ordered
    )
    witness = None
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            if set(entries[i].members) & set(entries[j].members):
                witness = (entries[i], entries[j])
                break
        if witness:
            break
    if witness is not None:
        return StopCover(x=x, entries=entries, verdict="overlap", witness=witness, uncovered=None)
    covered = set()
    for entry in entries:
        covered.update(entry.members)
    missing = [i for i in range(inst.n_realizations) if i not in covered]
    if missing:
        return StopCover(x=x, entries=entries, verdict="gap", witness=None, uncovered=missing[0])
    return StopCover(x=x, entries=entries, verdict="partition", witness=None, uncovered=None)


@dataclass(frozen=True)
class AuditReport:
    """Exact comparison of the two readings of the stop-node cost expectation.

    ``overlap_weighted_sum`` weights each distinct stop node by its full
    surviving mass; ``true_expectation`` weights it by the mass of the
    realizations that actually stop there.  The two agree exactly when the
    surviving sets partition the realizations; ``gap`` measures the overshoot
    of the first against the reference average cost.
    """

    overlap_weighted_sum: Fraction
    true_expectation: Fraction
    reference_c_avg: Fraction
    gap: Fraction
    total_stop_mass: Fraction


def overcount_audit(tree: DecisionTree, ref: CostProfile, x) -> AuditReport:
    """Audit the stop-node cost expectation against a reference cost profile."""
    cover = stop_cover(tree, x)
    inst = tree.instance
    overlap_weighted = Fraction(0)
    true_expectation = Fraction(0)
    total_mass = Fraction(0)
    for entry in cover.entries:
        mass = node_mass(inst, entry.members)
        node_cost = sum(
            (inst.realizations[i].prior * ref.costs[i] for i in entry.members), Fraction(0)
        )
        stopper_mass = sum(
            (inst.realizations[i].prior for i in entry.stoppers), Fraction(0)
        )
        overlap_weighted += node_cost
        true_expectation += stopper_mass * (node_cost / mass)
        total_mass += mass
    return AuditReport(
        overlap_weighted_sum=overlap_weighted,
        true_expectation=true_expectation,
        reference_c_avg=ref.average,
        gap=overlap_weighted - ref.average,
        total_stop_mass=total_mass,
    )


@dataclass(frozen=True)
class BoundReport:
    """Components of the logarithmic cost bound for the greedy policy.

    ``coverage`` is the uniform full-observation reward, ``eta`` the largest
    slack below it that already implies full coverage, ``min_prior`` the
    smallest realization probability.  ``bound_factor`` is the only float in
    the package: ln(coverage / (min_prior * eta)) + 1.
    """

    coverage: Fraction
    eta: Fraction
    min_prior: Fraction
    bound_factor: float
    greedy_c_avg: Fraction
    optimal_c_avg: Fraction
    ratio: "Fraction | None"
    degenerate: bool
    satisfied: bool


def bound_audit(inst: Instance, greedy: CostProfile, opt: CostProfile) -> BoundReport:
    """Assemble the bound components and check greedy cost against the bound."""
    coverage = coverage_value(inst)
    eta = compute_eta(inst)
    min_prior = min(phi.prior for phi in inst.realizations)
    factor = math.log(float(coverage / (min_prior * eta))) + 1.0
    if opt.average == 0:
        # A zero-cost optimum admits no finite ratio; the bound then holds
        # only if greedy is also free.
        return BoundReport(
            coverage=coverage,
            eta=eta,
            min_prior=min_prior,
            bound_factor=factor,
            greedy_c_avg=greedy.average,
            optimal_c_avg=opt.average,
            ratio=None,
            degenerate=True,
            satisfied=greedy.average == 0,
        )
    ratio = greedy.average / opt.average
    return BoundReport(
        coverage=coverage,
        eta=eta,
        min_prior=min_prior,
        bound_factor=factor,
        greedy_c_avg=greedy.average,
        optimal_c_avg=opt.average,
        ratio=ratio,
        degenerate=False,
        satisfied=float(ratio) <= factor + LOG_TOLERANCE,
    )
