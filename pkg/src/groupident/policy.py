"""Decision-tree policies: greedy construction, exact costs, optimal DP, DOT export.

A policy is a rooted tree.  Each internal node picks an item; children are
keyed by outcome and partition the parent's surviving realizations.  Leaves
are pure: every surviving realization shares one class.

Tie-breaking note: when several items achieve the same gain-per-cost ratio,
the default rule picks the lowest item index in document order.  This is the
rule that makes the builder's output on the built-in counterexample match its
published tree (all three root ratios tie there), and it is an inference, not
a stated rule; ``highest`` and ``random:SEED`` are available as alternatives.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .instances import Instance, node_mass, split_by_outcome
from .objective import expected_reward

__all__ = [
    "TieBreak",
    "LOWEST_INDEX",
    "HIGHEST_INDEX",
    "seeded_random",
    "TreeNode",
    "DecisionTree",
    "CostProfile",
    "greedy_policy",
    "evaluate_cost",
    "optimal_policy",
    "trace",
    "to_dot",
]


@dataclass(frozen=True)
class TieBreak:
    """Deterministic rule for breaking equal gain-per-cost ratios."""

    rule: str
    seed: "int | None" = None

    def __post_init__(self):
        if self.rule not in ("lowest", "highest", "random"):
            raise ValueError(f"unknown tie-break rule {self.rule!r}")
        if self.rule == "random" and self.seed is None:
            raise ValueError("random tie-break needs a seed")

    def pick(self, candidates) -> int:
        """Choose one item index; a pure function of (rule, candidate set)."""
        ordered = sorted(candidates)
        if not ordered:
            raise ValueError("no candidates to pick from")
        if self.rule == "lowest":
            return ordered[0]
        if self.rule == "highest":
            return ordered[-1]
        rng = random.Random(f"{self.seed}|{','.join(map(str, ordered))}")
        return rng.choice(ordered)

    def label(self) -> str:
        return self.rule if self.rule != "random" else f"random:{self.seed}"

    @classmethod
    def from_label(cls, label: str) -> "TieBreak":
        if label in ("lowest", "highest"):
            return cls(label)
        if label.startswith("random:"):
            return cls("random", int(label.split(":", 1)[1]))
        raise ValueError(f"unknown tie-break label {label!r}")


LOWEST_INDEX = TieBreak("lowest")
HIGHEST_INDEX = TieBreak("highest")


def seeded_random(seed: int) -> TieBreak:
    return TieBreak("random", seed)


class TreeNode:
    """One policy node; treat as immutable once its tree is built."""

    __slots__ = ("members", "item", "children", "f_e", "path_cost", "parent", "name")

    def __init__(self, members, f_e, path_cost, parent):
        self.members = members
        self.item = None          # item id at internal nodes, None at leaves
        self.children = {}        # outcome -> TreeNode, insertion in outcome order
        self.f_e = f_e
        self.path_cost = path_cost
        self.parent = parent
        self.name = ""

    @property
    def is_leaf(self) -> bool:
        return self.item is None

    def member_ids(self, inst: Instance) -> tuple:
        return tuple(inst.realizations[i].id for i in self.members)

    def __repr__(self):
        kind = "leaf" if self.is_leaf else f"item={self.item}"
        return f"TreeNode({self.name or '?'}, members={self.members}, {kind}, f_e={self.f_e})"


class DecisionTree:
    """Rooted policy tree over an instance.

    ``nodes`` lists every node in breadth-first order (children visited in
    ascending outcome order); node names n0, n1, ... follow that order.
    Trees are immutable after construction and safe to share across threads.
    """

    def __init__(self, instance: Instance, root: TreeNode):
        self.instance = instance
        self.root = root
        nodes = []
        queue = [root]
        while queue:
            node = queue.pop(0)
            node.name = f"n{len(nodes)}"
            nodes.append(node)
            for outcome in sorted(node.children):
                queue.append(node.children[outcome])
        self.nodes = tuple(nodes)

    def node_named(self, name: str) -> TreeNode:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)


@dataclass(frozen=True)
class CostProfile:
    """Per-realization path costs (by realization index) and their prior-weighted average."""

    costs: tuple
    average: Fraction

    @classmethod
    def from_costs(cls, inst: Instance, costs) -> "CostProfile":
        costs = tuple(Fraction(c) for c in costs)
        if len(costs) != inst.n_realizations:
            raise ValueError(f"expected {inst.n_realizations} costs, got {len(costs)}")
        average = sum(
            (phi.prior * c for phi, c in zip(inst.realizations, costs)), Fraction(0)
        )
        return cls(costs=costs, average=average)


def _is_pure(inst: Instance, members) -> bool:
    classes = {inst.realizations[i].class_id for i in members}
    return len(classes) <= 1


def greedy_policy(inst: Instance, tie: TieBreak = LOWEST_INDEX) -> DecisionTree:
    """Build the greedy tree: maximize marginal gain per unit cost at each node.

    Items that do not split the node are never chosen (their gain is zero);
    on a valid instance every impure node has a positive-gain item.
    """
    if inst.n_realizations == 0:
        raise ValueError("instance has no realizations")

    def build(members, used, path_cost, parent):
        node = TreeNode(members, expected_reward(inst, members), path_cost, parent)
        if _is_pure(inst, members):
            return node
        mass = node_mass(inst, members)
        base = node.f_e
        best_ratio = None
        best_items = []
        best_groups = {}
        for e in range(inst.n_items):
            if e in used:
                continue
            groups = split_by_outcome(inst, members, e)
            if len(groups) < 2:
                continue
            total = Fraction(0)
            for child in groups.values():
                total += (node_mass(inst, child) / mass) * expected_reward(inst, child)
            gain = total - base
            if gain <= 0:
                continue
            ratio = gain / inst.items[e].cost
            if best_ratio is None or ratio > best_ratio:
                best_ratio = ratio
                best_items = [e]
                best_groups = {e: groups}
            elif ratio == best_ratio:
                best_items.append(e)
                best_groups[e] = groups
        if not best_items:
            raise ValueError(
                f"no positive-gain item at impure node {members}; classes are not determinable"
            )
        choice = tie.pick(best_items)
        node.item = inst.items[choice].id
        child_used = used | {choice}
        child_cost = path_cost + inst.items[choice].cost
        for outcome in sorted(best_groups[choice]):
            node.children[outcome] = build(
                best_groups[choice][outcome], child_used, child_cost, node
            )
        return node

    root = build(inst.all_realizations(), frozenset(), Fraction(0), None)
    return DecisionTree(inst, root)


def evaluate_cost(inst: Instance, tree: DecisionTree) -> CostProfile:
    """Exact per-realization cost of following the tree, plus its average."""
    costs = []
    for phi in inst.realizations:
        node = tree.root
        total = Fraction(0)
        while not node.is_leaf:
            index = inst.item_index(node.item)
            total += inst.items[index].cost
            node = node.children[phi.outcomes[index]]
        costs.append(total)
    return CostProfile.from_costs(inst, costs)


def optimal_policy(inst: Instance, max_states: int = 200_000):
    """Exact minimum-expected-cost tree via memoized recursion over realization sets.

    The memo key is the surviving set alone: purity and rewards depend only on
    it, and an item that splits a set can never already sit on the path to it.
    Ties are broken toward the lowest item index.  Intended for desk scale;
    raises once the number of memoized states exceeds ``max_states``.
    """
    if inst.n_realizations == 0:
        raise ValueError("instance has no realizations")
    memo = {}

    def solve(members):
        cached = memo.get(members)
        if cached is not None:
            return cached
        if _is_pure(inst, members):
            result = (Fraction(0), None)
        else:
            mass = node_mass(inst, members)
            best_cost = None
            best_item = None
            for e in range(inst.n_items):
                groups = split_by_outcome(inst, members, e)
                if len(groups) < 2:
                    continue
                total = inst.items[e].cost
                for child in groups.values():
                    total += (node_mass(inst, child) / mass) * solve(child)[0]
                if best_cost is None or total < best_cost:
                    best_cost = total
                    best_item = e
            if best_item is None:
                raise ValueError(
                    f"no splitting item at impure node {members}; classes are not determinable"
                )
            result = (best_cost, best_item)
        memo[members] = result
        if len(memo) > max_states:
            raise ValueError(f"instance too large: more than {max_states} memo states")
        return result

    def rebuild(members, path_cost, parent):
        node = TreeNode(members, expected_reward(inst, members), path_cost, parent)
        _, item = memo[members]
        if item is None:
            return node
        node.item = inst.items[item].id
        child_cost = path_cost + inst.items[item].cost
        groups = split_by_outcome(inst, members, item)
        for outcome in sorted(groups):
            node.children[outcome] = rebuild(groups[outcome], child_cost, node)
        return node

    all_members = inst.all_realizations()
    solve(all_members)
    tree = DecisionTree(inst, rebuild(all_members, Fraction(0), None))
    return tree, evaluate_cost(inst, tree)


def trace(tree: DecisionTree, phi_id: str) -> list:
    """Nodes from the root to the leaf reached by one realization, inclusive."""
    inst = tree.instance
    index = inst.realization_index(phi_id)
    node = tree.root
    path = [node]
    while not node.is_leaf:
        item_index = inst.item_index(node.item)
        node = node.children[inst.outcome(index, item_index)]
        path.append(node)
    return path


def to_dot(tree: DecisionTree, names=None) -> str:
    """Render the tree as a DOT digraph with deterministic BFS node order.

    ``names`` optionally overrides displayed node names (TreeNode -> str).
    """
    inst = tree.instance
    display = {}
    for node in tree.nodes:
        display[node] = names.get(node, node.name) if names else node.name
    lines = ["digraph policy {"]
    for node in tree.nodes:
        ids = ",".join(node.member_ids(inst))
        label = f"{display[node]}: {{{ids}}}, f_E = {node.f_e}"
        lines.append(f'  "{node.name}" [label="{label}"];')
    for node in tree.nodes:
        for outcome in sorted(node.children):
            child = node.children[outcome]
            lines.append(f'  "{node.name}" -> "{child.name}" [label="{node.item} = {outcome}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
