from fractions import Fraction
from random import Random

import pytest

from groupident import (
    Instance,
    counterexample_instance,
    greedy_policy,
    letter_names,
)


@pytest.fixture(scope="session")
def ce_instance():
    return counterexample_instance()


@pytest.fixture(scope="session")
def ce_tree(ce_instance):
    return greedy_policy(ce_instance)


@pytest.fixture(scope="session")
def ce_letters(ce_tree):
    """letter -> node for the built-in counterexample's greedy tree."""
    return {letter: node for node, letter in letter_names(ce_tree).items()}


def node_by_members(tree, ids):
    """Find the tree node whose surviving realization ids equal ``ids``."""
    wanted = frozenset(ids)
    for node in tree.nodes:
        if frozenset(node.member_ids(tree.instance)) == wanted:
            return node
    raise AssertionError(f"no node with members {sorted(wanted)}")


def random_positive_profile(inst, rng: Random):
    """A reference cost profile with strictly positive random rational costs."""
    from groupident import CostProfile

    costs = [Fraction(rng.randint(1, 9), rng.randint(1, 9)) for _ in inst.realizations]
    return CostProfile.from_costs(inst, costs)


def two_item_instance():
    """phi1=(0,0) k1, phi2=(1,1) k2, unit costs, equal priors."""
    return Instance.build(
        items=[("e1", "1"), ("e2", "1")],
        realizations=[
            ("phi1", "1/2", "k1", (0, 0)),
            ("phi2", "1/2", "k2", (1, 1)),
        ],
    )


def three_realization_instance():
    """phi1=(0,0) k1, phi2=(1,0) k2, phi3=(1,1) k3, unit costs, equal priors."""
    return Instance.build(
        items=[("e1", "1"), ("e2", "1")],
        realizations=[
            ("phi1", "1/3", "k1", (0, 0)),
            ("phi2", "1/3", "k2", (1, 0)),
            ("phi3", "1/3", "k3", (1, 1)),
        ],
    )
