"""Exact data model: rational parsing, instances, node masses, partial realizations.

Every probability, cost, and reward in this package is a ``fractions.Fraction``.
Nothing rounds through floats except the logarithm taken in the bound audit.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "InstanceError",
    "Item",
    "Realization",
    "Instance",
    "PartialRealization",
    "RealizationSet",
    "ValidationReport",
    "parse_rational",
    "format_rational",
    "parse_instance",
    "serialize_instance",
    "instance_digest",
    "validate_instance",
    "canonical_set",
    "node_mass",
    "class_masses",
    "split_by_outcome",
]

# Sorted tuple of realization indices; the canonical form of a tree node's
# surviving set.
RealizationSet = tuple

_RATIONAL_RE = re.compile(r"-?\d+(?:/\d+)?")


class InstanceError(ValueError):
    """Malformed instance document or ill-formed constructor arguments."""


def parse_rational(text) -> Fraction:
    """Parse an exact rational from a "p/q" string (or an integer string)."""
    if not isinstance(text, str) or _RATIONAL_RE.fullmatch(text) is None:
        raise InstanceError(f"not a rational 'p/q' string: {text!r}")
    num, sep, den = text.partition("/")
    if not sep:
        return Fraction(int(num))
    if int(den) == 0:
        raise InstanceError(f"zero denominator: {text!r}")
    return Fraction(int(num), int(den))


def format_rational(value) -> str:
    """Render a rational in lowest terms, "p/q" or a plain integer string."""
    return str(Fraction(value))


def _as_fraction(value, what: str) -> Fraction:
    # Floats are rejected: they would silently break exactness guarantees.
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise InstanceError(f"{what} must be a rational string, int, or Fraction, got {value!r}")
    return Fraction(value)


@dataclass(frozen=True)
class Item:
    id: str
    cost: Fraction


@dataclass(frozen=True)
class Realization:
    id: str
    prior: Fraction
    class_id: str
    outcomes: tuple


@dataclass(frozen=True)
class Instance:
    """Immutable problem instance.

    ``items`` carry positive costs; ``realizations`` carry positive priors,
    a class label, and one observation row aligned with ``items`` order.
    Internal indices follow document order, which makes tie-breaking and
    report output deterministic.
    """

    items: tuple
    realizations: tuple

    def __post_init__(self):
        item_index = {}
        for i, item in enumerate(self.items):
            if item.id in item_index:
                raise InstanceError(f"duplicate item id {item.id!r}")
            item_index[item.id] = i
        realization_index = {}
        for i, phi in enumerate(self.realizations):
            if phi.id in realization_index:
                raise InstanceError(f"duplicate realization id {phi.id!r}")
            realization_index[phi.id] = i
        object.__setattr__(self, "_item_index", item_index)
        object.__setattr__(self, "_realization_index", realization_index)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_realizations(self) -> int:
        return len(self.realizations)

    def item_index(self, item_id: str) -> int:
        try:
            return self._item_index[item_id]
        except KeyError:
            raise InstanceError(f"unknown item {item_id!r}") from None

    def realization_index(self, phi_id: str) -> int:
        try:
            return self._realization_index[phi_id]
        except KeyError:
            raise InstanceError(f"unknown realization {phi_id!r}") from None

    def outcome(self, realization: int, item: int) -> int:
        return self.realizations[realization].outcomes[item]

    def all_realizations(self) -> RealizationSet:
        return tuple(range(self.n_realizations))

    @classmethod
    def build(cls, items: Iterable, realizations: Iterable) -> "Instance":
        """Construct from friendly tuples.

        ``items``: iterable of (id, cost); ``realizations``: iterable of
        (id, prior, class_id, outcome row).  Costs and priors may be rational
        strings, ints, or Fractions.
        """
        built_items = tuple(
            Item(id=str(iid), cost=_as_fraction(cost, f"cost of {iid}"))
            for iid, cost in items
        )
        built_realizations = tuple(
            Realization(
                id=str(rid),
                prior=_as_fraction(prior, f"prior of {rid}"),
                class_id=str(class_id),
                outcomes=tuple(int(o) for o in row),
            )
            for rid, prior, class_id, row in realizations
        )
        return cls(items=built_items, realizations=built_realizations)

    @classmethod
    def from_document(cls, doc) -> "Instance":
        """Build from a parsed instance document, rejecting unknown keys."""
        if not isinstance(doc, dict):
            raise InstanceError("document root must be a JSON object")
        _require_keys(doc, {"items", "realizations"}, "document")
        items_raw = doc["items"]
        realizations_raw = doc["realizations"]
        if not isinstance(items_raw, list) or not isinstance(realizations_raw, list):
            raise InstanceError("'items' and 'realizations' must be arrays")

        items = []
        for entry in items_raw:
            if not isinstance(entry, dict):
                raise InstanceError(f"item entry must be an object, got {entry!r}")
            _require_keys(entry, {"id", "cost"}, "item")
            if not isinstance(entry["id"], str):
                raise InstanceError(f"item id must be a string, got {entry['id']!r}")
            items.append(Item(id=entry["id"], cost=parse_rational(entry["cost"])))
        item_ids = [it.id for it in items]
        for iid in item_ids:
            if item_ids.count(iid) > 1:
                raise InstanceError(f"duplicate item id {iid!r}")

        realizations = []
        for entry in realizations_raw:
            if not isinstance(entry, dict):
                raise InstanceError(f"realization entry must be an object, got {entry!r}")
            _require_keys(entry, {"id", "prob", "class", "obs"}, "realization")
            if not isinstance(entry["id"], str) or not isinstance(entry["class"], str):
                raise InstanceError(f"realization id and class must be strings: {entry!r}")
            obs = entry["obs"]
            if not isinstance(obs, dict):
                raise InstanceError(f"obs of {entry['id']!r} must be an object")
            unknown = sorted(set(obs) - set(item_ids))
            if unknown:
                raise InstanceError(f"obs of {entry['id']!r} names unknown items: {unknown}")
            missing = sorted(set(item_ids) - set(obs))
            if missing:
                raise InstanceError(f"obs of {entry['id']!r} is missing items: {missing}")
            row = []
            for iid in item_ids:
                value = obs[iid]
                if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                    raise InstanceError(
                        f"outcome of {entry['id']!r} for {iid!r} must be a non-negative integer, got {value!r}"
                    )
                row.append(value)
            realizations.append(
                Realization(
                    id=entry["id"],
                    prior=parse_rational(entry["prob"]),
                    class_id=entry["class"],
                    outcomes=tuple(row),
                )
            )
        return cls(items=tuple(items), realizations=tuple(realizations))

    def to_document(self) -> dict:
        return {
            "items": [{"id": it.id, "cost": format_rational(it.cost)} for it in self.items],
            "realizations": [
                {
                    "id": phi.id,
                    "prob": format_rational(phi.prior),
                    "class": phi.class_id,
                    "obs": {it.id: phi.outcomes[i] for i, it in enumerate(self.items)},
                }
                for phi in self.realizations
            ],
        }

    def digest(self) -> str:
        return instance_digest(self)


def _require_keys(mapping: Mapping, allowed: set, what: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise InstanceError(f"unknown keys in {what}: {unknown}")
    missing = sorted(allowed - set(mapping))
    if missing:
        raise InstanceError(f"missing keys in {what}: {missing}")


def parse_instance(text: str) -> Instance:
    """Parse an instance document (JSON text) into an Instance."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc}") from None
    return Instance.from_document(doc)


def serialize_instance(inst: Instance) -> str:
    return json.dumps(inst.to_document(), indent=2) + "\n"


def instance_digest(inst: Instance) -> str:
    """Stable hex digest of the canonical document form."""
    canonical = json.dumps(inst.to_document(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple

    @property
    def ok(self) -> bool:
        return not self.findings


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every instance invariant; an empty report means the instance is valid."""
    findings = []
    for phi in inst.realizations:
        if len(phi.outcomes) != inst.n_items:
            findings.append(
                f"observation row of {phi.id} has {len(phi.outcomes)} entries, expected {inst.n_items}"
            )
        for i, value in enumerate(phi.outcomes[: inst.n_items]):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                findings.append(f"observation of {phi.id} for {inst.items[i].id} is not a non-negative integer")
        if phi.prior <= 0:
            findings.append(f"prior of {phi.id} is not positive ({format_rational(phi.prior)})")
    total = sum((phi.prior for phi in inst.realizations), Fraction(0))
    if total != 1:
        findings.append(f"priors sum to {format_rational(total)}, expected 1")
    for item in inst.items:
        if item.cost <= 0:
            findings.append(f"cost of {item.id} is not positive ({format_rational(item.cost)})")
    rows = {}
    for phi in inst.realizations:
        rows.setdefault(phi.outcomes, []).append(phi)
    for group in rows.values():
        classes = sorted({phi.class_id for phi in group})
        if len(classes) > 1:
            ids = ", ".join(phi.id for phi in group)
            findings.append(
                f"class not determinable: {ids} have identical observations but classes {', '.join(classes)}"
            )
    return ValidationReport(findings=tuple(findings))


def canonical_set(inst: Instance, members: Iterable) -> RealizationSet:
    """Sorted, deduplicated tuple of realization indices."""
    result = tuple(sorted(set(members)))
    if result and (result[0] < 0 or result[-1] >= inst.n_realizations):
        raise ValueError(f"realization index out of range: {result}")
    return result


def node_mass(inst: Instance, members: Iterable) -> Fraction:
    """Exact total prior mass of a non-empty realization set."""
    members = canonical_set(inst, members)
    if not members:
        raise ValueError("empty realization set has no mass")
    return sum((inst.realizations[i].prior for i in members), Fraction(0))


def class_masses(inst: Instance, members: Iterable) -> dict:
    """Per-class prior mass within a non-empty set, in first-occurrence order."""
    members = canonical_set(inst, members)
    if not members:
        raise ValueError("empty realization set has no class masses")
    masses = {}
    for i in members:
        phi = inst.realizations[i]
        masses[phi.class_id] = masses.get(phi.class_id, Fraction(0)) + phi.prior
    return masses


def split_by_outcome(inst: Instance, members: Iterable, item) -> dict:
    """Partition a realization set by an item's outcome, keyed by outcome value.

    ``item`` may be an item id or an internal index.  Only realized outcomes
    appear; keys are sorted ascending.
    """
    index = inst.item_index(item) if isinstance(item, str) else int(item)
    if not 0 <= index < inst.n_items:
        raise ValueError(f"item index out of range: {index}")
    members = canonical_set(inst, members)
    groups = {}
    for i in members:
        groups.setdefault(inst.realizations[i].outcomes[index], []).append(i)
    return {o: tuple(groups[o]) for o in sorted(groups)}


@dataclass(frozen=True)
class PartialRealization:
    """Observed (item id, outcome) pairs with distinct items."""

    pairs: tuple

    def __post_init__(self):
        ids = [item_id for item_id, _ in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate items in partial realization: {ids}")

    def dom(self) -> tuple:
        return tuple(item_id for item_id, _ in self.pairs)

    def consistent_set(self, inst: Instance) -> RealizationSet:
        """Indices of realizations agreeing with every observed pair."""
        wanted = [(inst.item_index(item_id), outcome) for item_id, outcome in self.pairs]
        return tuple(
            i
            for i, phi in enumerate(inst.realizations)
            if all(phi.outcomes[idx] == outcome for idx, outcome in wanted)
        )
