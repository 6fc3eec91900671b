from fractions import Fraction
from random import Random

import pytest

from groupident import (
    ExplicitTable,
    Instance,
    check_adaptive_submodularity,
    check_strong_adaptive_monotonicity,
    class_masses,
    compute_eta,
    coverage_value,
    expected_reward,
    greedy_policy,
    marginal_gain,
    node_mass,
    reward,
    split_by_outcome,
)
from groupident.search import SearchConfig, generate_instances

from conftest import three_realization_instance, two_item_instance


# --- reward ------------------------------------------------------------------

def test_reward_examples(ce_instance):
    assert reward(ce_instance, (0, 1, 2), "phi1") == Fraction(17, 25)
    assert reward(ce_instance, (1,), "phi2") == Fraction(1)
    assert reward(ce_instance, ce_instance.all_realizations(), "phi1") == Fraction(1, 25)


def test_reward_requires_membership(ce_instance):
    with pytest.raises(ValueError, match="not in the node"):
        reward(ce_instance, (0, 1, 2), "phi4")


# --- expected reward ----------------------------------------------------------

def test_expected_reward_examples(ce_instance):
    assert expected_reward(ce_instance, (0, 1, 2)) == Fraction(17, 25)
    assert expected_reward(ce_instance, (0, 2)) == Fraction(22, 25)
    assert expected_reward(ce_instance, (3, 4)) == Fraction(22, 25)
    with pytest.raises(ValueError, match="empty"):
        expected_reward(ce_instance, ())


def test_expected_reward_pure_node_is_one():
    inst = Instance.build(
        items=[("e1", "1")],
        realizations=[
            ("phi1", "1/4", "k", (0,)),
            ("phi2", "1/4", "k", (1,)),
            ("phi3", "1/2", "k2", (0,)),
        ],
    )
    assert expected_reward(inst, (0, 1)) == 1


def _closed_form(inst, members):
    # 1 - mass^2 + sum_k mass_k^3 / mass
    mass = node_mass(inst, members)
    cubes = sum(m**3 for m in class_masses(inst, members).values())
    return 1 - mass * mass + cubes / mass


def test_expected_reward_matches_closed_form_on_random_sets():
    rng = Random(17)
    cfg = SearchConfig(
        realizations=(2, 6),
        items=(1, 3),
        prior_mode="rational",
        class_mode="random",
        seed=17,
        max_instances=25,
    )
    for inst in generate_instances(cfg):
        n = inst.n_realizations
        members = tuple(sorted(rng.sample(range(n), rng.randint(1, n))))
        per_member = sum(
            inst.realizations[i].prior * reward(inst, members, inst.realizations[i].id)
            for i in members
        ) / node_mass(inst, members)
        assert expected_reward(inst, members) == per_member == _closed_form(inst, members)


# --- marginal gain -------------------------------------------------------------

def test_marginal_gain_examples(ce_instance):
    everyone = ce_instance.all_realizations()
    # brute-force both branches of e1 at the root
    children = split_by_outcome(ce_instance, everyone, "e1")
    brute = sum(
        (node_mass(ce_instance, child) * expected_reward(ce_instance, child) for child in children.values()),
        Fraction(0),
    ) - expected_reward(ce_instance, everyone)
    assert brute == Fraction(18, 25)
    assert marginal_gain(ce_instance, everyone, set(), "e1") == Fraction(18, 25)
    assert marginal_gain(ce_instance, (0, 1, 2), {"e1"}, "e2") == Fraction(6, 25)


def test_marginal_gain_pure_node_zero(ce_instance):
    assert marginal_gain(ce_instance, (1,), {"e1", "e2"}, "e3") == 0


def test_marginal_gain_rejects_chosen_item(ce_instance):
    with pytest.raises(ValueError, match="already chosen"):
        marginal_gain(ce_instance, (0, 1, 2), {"e1"}, "e1")


def test_marginal_gain_zero_when_item_does_not_split():
    inst = Instance.build(
        items=[("e1", "1"), ("e2", "1")],
        realizations=[("phi1", "1/2", "k1", (0, 0)), ("phi2", "1/2", "k2", (0, 1))],
    )
    assert marginal_gain(inst, (0, 1), set(), "e1") == 0


# --- coverage value and eta -----------------------------------------------------

def test_coverage_value_counterexample(ce_instance):
    assert coverage_value(ce_instance) == 1


def test_coverage_value_with_shared_classes():
    inst = Instance.build(
        items=[("e1", "1")],
        realizations=[
            ("phi1", "1/3", "k", (0,)),
            ("phi2", "1/3", "k", (0,)),
            ("phi3", "1/3", "k2", (1,)),
        ],
    )
    assert coverage_value(inst) == 1


def test_coverage_value_non_uniform_table():
    inst = two_item_instance()
    table = ExplicitTable.from_function(
        inst, lambda dom, phi: 1 if phi == "phi1" else 2
    )
    with pytest.raises(ValueError, match="no uniform"):
        coverage_value(inst, table)


def test_compute_eta_counterexample(ce_instance):
    # exhaustive oracle over all 8 item subsets x 5 realizations
    from itertools import combinations

    q = Fraction(1)
    gaps = []
    for size in range(4):
        for combo in combinations(range(3), size):
            for phi in ce_instance.realizations:
                members = [
                    j
                    for j, other in enumerate(ce_instance.realizations)
                    if all(other.outcomes[i] == phi.outcomes[i] for i in combo)
                ]
                mass = node_mass(ce_instance, members)
                mk = class_masses(ce_instance, members)[phi.class_id]
                value = 1 - mass * mass + mk * mk
                if value < q:
                    gaps.append(q - value)
    assert min(gaps) == Fraction(3, 25)
    assert compute_eta(ce_instance) == Fraction(3, 25)


def test_compute_eta_singleton():
    inst = Instance.build(items=[("e1", "1")], realizations=[("phi1", "1", "k1", (0,))])
    assert compute_eta(inst) == coverage_value(inst) == 1


def test_compute_eta_two_realizations():
    inst = two_item_instance()
    one_item = Instance.build(
        items=[("e1", "1")],
        realizations=[("phi1", "1/2", "k1", (0,)), ("phi2", "1/2", "k2", (1,))],
    )
    # f(empty, phi) = 1 - 1 + 1/4 = 1/4, every other subset separates fully
    assert compute_eta(one_item) == Fraction(3, 4)


# --- property checkers ------------------------------------------------------------

def test_checkers_clean_on_counterexample(ce_instance):
    assert check_adaptive_submodularity(ce_instance) == []
    assert check_strong_adaptive_monotonicity(ce_instance) == []


def test_checkers_trivial_single_item():
    inst = Instance.build(
        items=[("e1", "1")],
        realizations=[("phi1", "1/2", "k1", (0,)), ("phi2", "1/2", "k2", (1,))],
    )
    assert check_adaptive_submodularity(inst) == []
    assert check_strong_adaptive_monotonicity(inst) == []


def test_checkers_clean_on_singleton():
    inst = Instance.build(items=[("e1", "1")], realizations=[("phi1", "1", "k1", (0,))])
    assert check_adaptive_submodularity(inst) == []
    assert check_strong_adaptive_monotonicity(inst) == []


def test_submodularity_violation_by_construction():
    inst = two_item_instance()
    values = {}
    for dom in (frozenset(), frozenset({"e1"}), frozenset({"e2"}), frozenset({"e1", "e2"})):
        for phi in ("phi1", "phi2"):
            values[(dom, phi)] = Fraction(0)
    values[(frozenset({"e1", "e2"}), "phi1")] = Fraction(1)
    table = ExplicitTable(values=values)
    violations = check_adaptive_submodularity(inst, table)
    assert any(
        v.kind == "submodularity"
        and v.item == "e2"
        and v.psi.pairs == ()
        and v.psi_prime.pairs == (("e1", 0),)
        and v.lhs == 0
        and v.rhs == 1
        for v in violations
    )


def test_monotonicity_violation_by_construction():
    inst = two_item_instance()
    table = ExplicitTable.from_function(
        inst,
        lambda dom, phi: 0 if (set(dom) == {"e1"} and phi == "phi1") else Fraction(1, 2),
    )
    violations = check_strong_adaptive_monotonicity(inst, table)
    assert any(
        v.kind == "monotonicity"
        and v.observed == ("e1", 0)
        and v.lhs == Fraction(1, 2)
        and v.rhs == 0
        for v in violations
    )


def test_checker_limit_caps_output():
    inst = three_realization_instance()
    # constant-decreasing table: every added observation lowers the value
    table = ExplicitTable.from_function(inst, lambda dom, phi: Fraction(1, 1 + len(dom)))
    violations = check_strong_adaptive_monotonicity(inst, table, limit=3)
    assert len(violations) == 3


def test_checker_requires_total_table():
    inst = two_item_instance()
    table = ExplicitTable(values={(frozenset(), "phi1"): Fraction(1)})
    with pytest.raises(ValueError, match="not total"):
        check_adaptive_submodularity(inst, table)
    with pytest.raises(ValueError, match="missing entry"):
        table.value(frozenset({"e1"}), "phi2")


def test_checkers_empty_on_random_suite():
    # small version of the acceptance sweep: valid instances never violate
    cfg = SearchConfig(
        realizations=(1, 5),
        items=(1, 4),
        outcome_arity=2,
        prior_mode="rational",
        class_mode="random",
        seed=23,
        max_instances=25,
    )
    for inst in generate_instances(cfg):
        assert check_adaptive_submodularity(inst) == []
        assert check_strong_adaptive_monotonicity(inst) == []


def test_expected_reward_nondecreasing_along_tree_paths():
    cfg = SearchConfig(
        realizations=(2, 5),
        items=(1, 4),
        outcome_arity=3,
        prior_mode="rational",
        seed=29,
        max_instances=25,
    )
    for inst in generate_instances(cfg):
        tree = greedy_policy(inst)
        for node in tree.nodes:
            for child in node.children.values():
                assert child.f_e >= node.f_e
