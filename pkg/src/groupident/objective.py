"""Group-identification reward, node expectations, and brute-force property checkers.

The built-in objective scores a surviving realization set so that the score is
exactly 1 precisely when one class remains.  The checkers verify, by full
enumeration over partial realizations, that an objective's expected marginal
gains shrink as observations accumulate (adaptive submodularity) and that
observing more never lowers the conditional expected reward (strong adaptive
monotonicity).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .instances import (
    Instance,
    PartialRealization,
    canonical_set,
    class_masses,
    node_mass,
    split_by_outcome,
)

__all__ = [
    "GroupId",
    "GROUP_ID",
    "ExplicitTable",
    "PropertyViolation",
    "reward",
    "expected_reward",
    "marginal_gain",
    "coverage_value",
    "compute_eta",
    "check_adaptive_submodularity",
    "check_strong_adaptive_monotonicity",
]

ONE = Fraction(1)


@dataclass(frozen=True)
class GroupId:
    """Built-in objective; needs no data.

    A realization of class k surviving in a node of mass m with class-k mass
    m_k scores 1 - m**2 + m_k**2.
    """


GROUP_ID = GroupId()


@dataclass(frozen=True, eq=False)
class ExplicitTable:
    """Objective given by a full table (frozenset of item ids, realization id) -> value.

    Exists so the property checkers have falsifiable inputs; the policy and
    audit layers only ever use the built-in objective.
    """

    values: dict

    def value(self, dom, phi_id: str) -> Fraction:
        key = (frozenset(dom), phi_id)
        try:
            return self.values[key]
        except KeyError:
            raise ValueError(
                f"explicit table missing entry for items {sorted(key[0])} and {phi_id!r}"
            ) from None

    def missing_entries(self, inst: Instance) -> list:
        ids = [it.id for it in inst.items]
        missing = []
        for size in range(len(ids) + 1):
            for combo in combinations(ids, size):
                for phi in inst.realizations:
                    if (frozenset(combo), phi.id) not in self.values:
                        missing.append((combo, phi.id))
        return missing

    @classmethod
    def from_function(cls, inst: Instance, fn) -> "ExplicitTable":
        """Tabulate fn(item-id tuple, realization id) over every pair."""
        ids = [it.id for it in inst.items]
        values = {}
        for size in range(len(ids) + 1):
            for combo in combinations(ids, size):
                for phi in inst.realizations:
                    values[(frozenset(combo), phi.id)] = Fraction(fn(combo, phi.id))
        return cls(values=values)


@dataclass(frozen=True)
class PropertyViolation:
    """A witnessed failure of one of the two checked properties.

    For submodularity the violated inequality reads lhs < rhs, where lhs is
    the gain at ``psi`` and rhs at the larger ``psi_prime``.  For monotonicity
    it reads lhs > rhs, where lhs is the expected reward at ``psi`` and rhs
    the expected reward after also observing ``observed``.
    """

    kind: str
    psi: PartialRealization
    psi_prime: "PartialRealization | None"
    observed: "tuple | None"
    item: str
    lhs: Fraction
    rhs: Fraction


def reward(inst: Instance, members, phi_id: str) -> Fraction:
    """Score of one realization surviving in the node ``members``."""
    members = canonical_set(inst, members)
    index = inst.realization_index(phi_id)
    if index not in members:
        raise ValueError(f"{phi_id!r} is not in the node {members}")
    mass = node_mass(inst, members)
    per_class = class_masses(inst, members)
    class_mass = per_class[inst.realizations[index].class_id]
    return ONE - mass * mass + class_mass * class_mass


def expected_reward(inst: Instance, members) -> Fraction:
    """Prior-weighted conditional average of the reward over a non-empty node."""
    members = canonical_set(inst, members)
    if not members:
        raise ValueError("empty realization set has no expected reward")
    mass = node_mass(inst, members)
    per_class = class_masses(inst, members)
    total = Fraction(0)
    for i in members:
        phi = inst.realizations[i]
        class_mass = per_class[phi.class_id]
        total += phi.prior * (ONE - mass * mass + class_mass * class_mass)
    return total / mass


def marginal_gain(inst: Instance, members, dom, e: str) -> Fraction:
    """Expected increase in node reward from observing item ``e``.

    ``dom`` is the set of item ids already chosen on the path; ``e`` must not
    be among them.  The gain depends only on how ``e`` splits ``members``.
    """
    if e in set(dom):
        raise ValueError(f"item {e!r} is already chosen")
    members = canonical_set(inst, members)
    base = expected_reward(inst, members)
    mass = node_mass(inst, members)
    total = Fraction(0)
    for child in split_by_outcome(inst, members, e).values():
        total += (node_mass(inst, child) / mass) * expected_reward(inst, child)
    return total - base


def _groupid_value(inst: Instance, dom_indices, phi_index: int) -> Fraction:
    """Built-in f(S, phi): score of phi in its consistent node under items S."""
    phi = inst.realizations[phi_index]
    members = [
        i
        for i, other in enumerate(inst.realizations)
        if all(other.outcomes[j] == phi.outcomes[j] for j in dom_indices)
    ]
    mass = node_mass(inst, members)
    class_mass = class_masses(inst, members)[phi.class_id]
    return ONE - mass * mass + class_mass * class_mass


def coverage_value(inst: Instance, obj=GROUP_ID) -> Fraction:
    """The common value of f(all items, phi); raises if it is not uniform."""
    full = tuple(range(inst.n_items))
    full_ids = frozenset(it.id for it in inst.items)
    value = None
    for i, phi in enumerate(inst.realizations):
        if isinstance(obj, ExplicitTable):
            v = obj.value(full_ids, phi.id)
        else:
            v = _groupid_value(inst, full, i)
        if value is None:
            value = v
        elif v != value:
            raise ValueError(
                f"no uniform coverage value: f(E, {phi.id}) = {v} differs from {value}"
            )
    if value is None:
        raise ValueError("instance has no realizations")
    return value


def compute_eta(inst: Instance, obj=GROUP_ID) -> Fraction:
    """Largest slack for which near-full reward already implies full reward.

    Enumerates every item subset S and realization, returning the minimum of
    Q - f(S, phi) over pairs with f(S, phi) < Q; if no pair falls short, Q.
    """
    q = coverage_value(inst, obj)
    best = None
    ids = [it.id for it in inst.items]
    for size in range(inst.n_items + 1):
        for combo in combinations(range(inst.n_items), size):
            for i, phi in enumerate(inst.realizations):
                if isinstance(obj, ExplicitTable):
                    v = obj.value(frozenset(ids[j] for j in combo), phi.id)
                else:
                    v = _groupid_value(inst, combo, i)
                if v < q:
                    gap = q - v
                    if best is None or gap < best:
                        best = gap
    return best if best is not None else q


def _enumerate_partials(inst: Instance):
    """All positive-mass partial realizations, ordered by (size, dom, outcomes).

    Returns (order, cons): ``order`` lists (dom index tuple, outcome tuple);
    ``cons`` maps each pair to its consistent realization set.  Outcome
    assignments that no realization produces are skipped, which is exactly
    the positive-mass restriction.
    """
    order = []
    cons = {}
    for size in range(inst.n_items + 1):
        for dom in combinations(range(inst.n_items), size):
            groups = {}
            for i, phi in enumerate(inst.realizations):
                key = tuple(phi.outcomes[j] for j in dom)
                groups.setdefault(key, []).append(i)
            for key in sorted(groups):
                order.append((dom, key))
                cons[(dom, key)] = tuple(groups[key])
    return order, cons


class _Evaluator:
    """Cached expected rewards and gains for one (instance, objective) pair."""

    def __init__(self, inst: Instance, obj):
        self.inst = inst
        self.obj = obj
        self.table = obj if isinstance(obj, ExplicitTable) else None
        self._expected = {}
        self._gain = {}

    def expected(self, dom, members) -> Fraction:
        key = (dom, members) if self.table is not None else members
        hit = self._expected.get(key)
        if hit is not None:
            return hit
        if self.table is None:
            value = expected_reward(self.inst, members)
        else:
            ids = frozenset(self.inst.items[j].id for j in dom)
            mass = node_mass(self.inst, members)
            total = Fraction(0)
            for i in members:
                phi = self.inst.realizations[i]
                total += phi.prior * self.table.value(ids, phi.id)
            value = total / mass
        self._expected[key] = value
        return value

    def gain(self, dom, members, e: int) -> Fraction:
        key = (dom, members, e) if self.table is not None else (members, e)
        hit = self._gain.get(key)
        if hit is not None:
            return hit
        child_dom = tuple(sorted(dom + (e,)))
        mass = node_mass(self.inst, members)
        groups = {}
        for i in members:
            groups.setdefault(self.inst.realizations[i].outcomes[e], []).append(i)
        total = Fraction(0)
        for o in sorted(groups):
            child = tuple(groups[o])
            total += (node_mass(self.inst, child) / mass) * self.expected(child_dom, child)
        value = total - self.expected(dom, members)
        self._gain[key] = value
        return value


def _as_partial(inst: Instance, dom, outcomes) -> PartialRealization:
    return PartialRealization(
        pairs=tuple((inst.items[j].id, o) for j, o in zip(dom, outcomes))
    )


def _check_table(obj, inst: Instance) -> None:
    if isinstance(obj, ExplicitTable):
        missing = obj.missing_entries(inst)
        if missing:
            raise ValueError(f"explicit table is not total; first missing entry: {missing[0]}")


def check_adaptive_submodularity(inst: Instance, obj=GROUP_ID, limit: int = 100) -> list:
    """Enumerate every nested pair of partial realizations and addable item.

    Reports triples where the gain at the smaller partial realization is
    strictly below the gain at the larger one, in deterministic enumeration
    order, capped at ``limit`` findings.
    """
    _check_table(obj, inst)
    order, cons = _enumerate_partials(inst)
    ev = _Evaluator(inst, obj)
    violations = []
    for dom2, out2 in order:
        outside = [e for e in range(inst.n_items) if e not in dom2]
        for e in outside:
            later = ev.gain(dom2, cons[(dom2, out2)], e)
            for size in range(len(dom2) + 1):
                for positions in combinations(range(len(dom2)), size):
                    dom1 = tuple(dom2[p] for p in positions)
                    out1 = tuple(out2[p] for p in positions)
                    earlier = ev.gain(dom1, cons[(dom1, out1)], e)
                    if earlier < later:
                        violations.append(
                            PropertyViolation(
                                kind="submodularity",
                                psi=_as_partial(inst, dom1, out1),
                                psi_prime=_as_partial(inst, dom2, out2),
                                observed=None,
                                item=inst.items[e].id,
                                lhs=earlier,
                                rhs=later,
                            )
                        )
                        if len(violations) >= limit:
                            return violations
    return violations


def check_strong_adaptive_monotonicity(inst: Instance, obj=GROUP_ID, limit: int = 100) -> list:
    """Enumerate every partial realization, addable item, and realized outcome.

    Reports cases where observing the extra outcome strictly lowers the
    conditional expected reward.
    """
    _check_table(obj, inst)
    order, cons = _enumerate_partials(inst)
    ev = _Evaluator(inst, obj)
    violations = []
    for dom, outcomes in order:
        members = cons[(dom, outcomes)]
        base = ev.expected(dom, members)
        for e in range(inst.n_items):
            if e in dom:
                continue
            child_dom = tuple(sorted(dom + (e,)))
            groups = {}
            for i in members:
                groups.setdefault(inst.realizations[i].outcomes[e], []).append(i)
            for o in sorted(groups):
                child = tuple(groups[o])
                after = ev.expected(child_dom, child)
                if base > after:
                    violations.append(
                        PropertyViolation(
                            kind="monotonicity",
                            psi=_as_partial(inst, dom, outcomes),
                            psi_prime=None,
                            observed=(inst.items[e].id, o),
                            item=inst.items[e].id,
                            lhs=base,
                            rhs=after,
                        )
                    )
                    if len(violations) >= limit:
                        return violations
    return violations
