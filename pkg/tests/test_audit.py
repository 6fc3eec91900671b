import math
from fractions import Fraction
from random import Random

import pytest

from groupident import (
    CostProfile,
    Instance,
    ThresholdError,
    bound_audit,
    evaluate_cost,
    greedy_policy,
    optimal_policy,
    overcount_audit,
    stop_cover,
    stop_node,
    trace,
)
from groupident.search import SearchConfig, default_threshold_grid, generate_instances

from conftest import random_positive_profile

X = Fraction(23, 25)


# --- stop_node -----------------------------------------------------------------

def test_stop_node_examples(ce_instance, ce_tree, ce_letters):
    assert stop_node(ce_tree, "phi2", X) is ce_letters["b"]
    assert stop_node(ce_tree, "phi1", X) is ce_letters["c"]
    assert stop_node(ce_tree, "phi3", X) is ce_letters["c"]
    assert stop_node(ce_tree, "phi4", X) is ce_letters["g"]
    assert stop_node(ce_tree, "phi5", X) is ce_letters["g"]


def test_stop_node_threshold_range(ce_tree):
    with pytest.raises(ThresholdError, match="no stop node"):
        stop_node(ce_tree, "phi1", Fraction(1, 25))
    with pytest.raises(ThresholdError, match="no stop node"):
        stop_node(ce_tree, "phi1", Fraction(1, 100))
    with pytest.raises(ThresholdError, match="out of range"):
        stop_node(ce_tree, "phi1", Fraction(26, 25))
    # x = 1 is the top of the valid half-open range
    assert stop_node(ce_tree, "phi1", Fraction(1)) is not None


def test_stop_node_lies_on_trace_with_blocked_child(ce_instance, ce_tree):
    for phi in ce_instance.realizations:
        path = trace(ce_tree, phi.id)
        node = stop_node(ce_tree, phi.id, X)
        assert node in path
        position = path.index(node)
        if position + 1 < len(path):
            assert path[position + 1].f_e >= X


def test_stop_node_monotone_in_threshold():
    cfg = SearchConfig(realizations=(2, 5), items=(1, 4), seed=77, max_instances=15)
    for inst in generate_instances(cfg):
        tree = greedy_policy(inst)
        grid = default_threshold_grid(tree)
        for phi in inst.realizations:
            path = trace(tree, phi.id)
            depth = {node: i for i, node in enumerate(path)}
            previous = None
            for x in grid:  # ascending
                node = stop_node(tree, phi.id, x)
                if previous is not None:
                    assert depth[previous] <= depth[node]
                previous = node


# --- stop_cover ------------------------------------------------------------------

def test_stop_cover_counterexample(ce_instance, ce_tree, ce_letters):
    cover = stop_cover(ce_tree, X)
    assert cover.verdict == "overlap"
    assert {e.node for e in cover.entries} == {ce_letters["b"], ce_letters["c"], ce_letters["g"]}
    witness_nodes = (cover.witness[0].node, cover.witness[1].node)
    assert witness_nodes == (ce_letters["b"], ce_letters["c"])
    by_node = {e.node: e for e in cover.entries}
    assert by_node[ce_letters["b"]].stoppers == (1,)
    assert by_node[ce_letters["c"]].stoppers == (0, 2)
    assert by_node[ce_letters["g"]].stoppers == (3, 4)
    # every realization appears in exactly one stoppers set
    all_stoppers = sorted(i for e in cover.entries for i in e.stoppers)
    assert all_stoppers == list(ce_instance.all_realizations())


def test_stop_cover_partition_at_low_threshold(ce_tree, ce_letters):
    cover = stop_cover(ce_tree, Fraction(1, 2))
    assert cover.verdict == "partition"
    assert len(cover.entries) == 1
    assert cover.entries[0].node is ce_letters["r"]


def test_stop_cover_two_realization_partition():
    inst = Instance.build(
        items=[("e1", "1")],
        realizations=[("phi1", "1/2", "k1", (0,)), ("phi2", "1/2", "k2", (1,))],
    )
    tree = greedy_policy(inst)
    cover = stop_cover(tree, Fraction(99, 100))
    assert cover.verdict == "partition"
    assert [e.node for e in cover.entries] == [tree.root]


# --- overcount audit ---------------------------------------------------------------

def test_overcount_audit_against_optimal(ce_instance, ce_tree):
    _, opt_profile = optimal_policy(ce_instance)
    report = overcount_audit(ce_tree, opt_profile, X)
    assert report.overlap_weighted_sum == Fraction(18, 5)
    assert report.reference_c_avg == Fraction(12, 5)
    assert report.gap == Fraction(6, 5)
    assert report.total_stop_mass == Fraction(7, 5)
    assert report.true_expectation == Fraction(38, 15)
    # the gap equals the double-counted phi1/phi3 share: (1/5)(c1 + c3)
    c = opt_profile.costs
    assert report.gap == Fraction(1, 5) * (c[0] + c[2])


def test_overcount_audit_unit_reference(ce_instance, ce_tree):
    ones = CostProfile.from_costs(ce_instance, [1] * 5)
    report = overcount_audit(ce_tree, ones, X)
    assert report.overlap_weighted_sum == Fraction(7, 5)
    assert report.total_stop_mass == Fraction(7, 5)
    assert report.reference_c_avg == 1
    assert report.gap == Fraction(2, 5)


def test_overcount_partition_structure(ce_instance, ce_tree):
    rng = Random(3)
    profile = random_positive_profile(ce_instance, rng)
    report = overcount_audit(ce_tree, profile, Fraction(1, 2))
    assert report.total_stop_mass == 1
    assert report.overlap_weighted_sum == report.true_expectation
    assert report.gap == report.overlap_weighted_sum - profile.average


def test_counterexample_gap_positive_for_any_positive_costs(ce_instance, ce_tree):
    rng = Random(9)
    for _ in range(25):
        profile = random_positive_profile(ce_instance, rng)
        report = overcount_audit(ce_tree, profile, X)
        # gap = (1/5)(c1 + c3) > 0 whenever costs are positive
        assert report.gap == Fraction(1, 5) * (profile.costs[0] + profile.costs[2])
        assert report.gap > 0
        assert report.overlap_weighted_sum > report.reference_c_avg


def _stop_multiplicities(inst, cover):
    counts = {i: 0 for i in range(inst.n_realizations)}
    for entry in cover.entries:
        for i in entry.members:
            counts[i] += 1
    return counts


def test_partition_mass_expectation_equivalence_on_random_suite():
    rng = Random(31)
    cfg = SearchConfig(
        realizations=(2, 5),
        items=(1, 4),
        outcome_arity=2,
        prior_mode="rational",
        seed=31,
        max_instances=25,
    )
    for inst in generate_instances(cfg):
        tree = greedy_policy(inst)
        for x in default_threshold_grid(tree):
            cover = stop_cover(tree, x)
            profiles = [random_positive_profile(inst, rng) for _ in range(3)]
            reports = [overcount_audit(tree, p, x) for p in profiles]
            is_partition = cover.verdict == "partition"
            for report in reports:
                assert (report.total_stop_mass == 1) == is_partition
                assert (report.overlap_weighted_sum == report.true_expectation) == is_partition
            # gap equals the multiset overcount: sum of (multiplicity-1) * p * c
            counts = _stop_multiplicities(inst, cover)
            for profile, report in zip(profiles, reports):
                direct = sum(
                    (counts[i] - 1) * inst.realizations[i].prior * profile.costs[i]
                    for i in range(inst.n_realizations)
                )
                assert report.gap == direct


# --- bound audit -------------------------------------------------------------------

def test_bound_audit_counterexample(ce_instance, ce_tree):
    greedy_profile = evaluate_cost(ce_instance, ce_tree)
    _, opt_profile = optimal_policy(ce_instance)
    bound = bound_audit(ce_instance, greedy_profile, opt_profile)
    assert bound.coverage == 1
    assert bound.eta == Fraction(3, 25)
    assert bound.min_prior == Fraction(1, 5)
    assert bound.ratio == 1
    assert not bound.degenerate
    assert abs(bound.bound_factor - (math.log(125 / 3) + 1)) <= 1e-12
    assert bound.satisfied


def test_bound_audit_degenerate_single_leaf():
    inst = Instance.build(items=[("e1", "1")], realizations=[("phi1", "1", "k", (0,))])
    tree = greedy_policy(inst)
    profile = evaluate_cost(inst, tree)
    bound = bound_audit(inst, profile, profile)
    assert bound.degenerate
    assert bound.ratio is None
    assert bound.satisfied  # zero greedy cost against a zero optimum


def test_bound_audit_two_realizations():
    inst = Instance.build(
        items=[("e1", "1")],
        realizations=[("phi1", "1/2", "k1", (0,)), ("phi2", "1/2", "k2", (1,))],
    )
    tree = greedy_policy(inst)
    profile = evaluate_cost(inst, tree)
    _, opt_profile = optimal_policy(inst)
    bound = bound_audit(inst, profile, opt_profile)
    assert bound.coverage == 1
    assert bound.min_prior == Fraction(1, 2)
    assert bound.eta == Fraction(3, 4)
    assert bound.ratio == 1
    assert abs(bound.bound_factor - (math.log(8 / 3) + 1)) <= 1e-12
    assert bound.satisfied


def test_bound_holds_across_random_suite():
    cfg = SearchConfig(
        realizations=(2, 5),
        items=(1, 4),
        cost_mode="random",
        prior_mode="rational",
        seed=47,
        max_instances=20,
    )
    for inst in generate_instances(cfg):
        greedy_profile = evaluate_cost(inst, greedy_policy(inst))
        _, opt_profile = optimal_policy(inst)
        bound = bound_audit(inst, greedy_profile, opt_profile)
        assert bound.satisfied
