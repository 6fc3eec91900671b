"""The built-in counterexample instance and its conventional node letters.

Five equiprobable realizations in five distinct classes, three unit-cost
binary items.  The greedy tree on this instance has stop nodes whose
surviving sets overlap at threshold 23/25, so they cannot partition the
realizations; the whole audit pipeline is pinned to this instance's exact
values in the test suite and the ``repro-paper`` command.

The document is embedded verbatim so the reproduction cannot drift with
anything on disk.
"""

from __future__ import annotations

from .instances import Instance, parse_instance
from .policy import DecisionTree

__all__ = ["COUNTEREXAMPLE_JSON", "counterexample_instance", "letter_names"]

COUNTEREXAMPLE_JSON = """\
{
  "items": [
    {"id": "e1", "cost": "1"},
    {"id": "e2", "cost": "1"},
    {"id": "e3", "cost": "1"}
  ],
  "realizations": [
    {"id": "phi1", "prob": "1/5", "class": "k1", "obs": {"e1": 0, "e2": 1, "e3": 0}},
    {"id": "phi2", "prob": "1/5", "class": "k2", "obs": {"e1": 0, "e2": 0, "e3": 1}},
    {"id": "phi3", "prob": "1/5", "class": "k3", "obs": {"e1": 0, "e2": 1, "e3": 1}},
    {"id": "phi4", "prob": "1/5", "class": "k4", "obs": {"e1": 1, "e2": 0, "e3": 1}},
    {"id": "phi5", "prob": "1/5", "class": "k5", "obs": {"e1": 1, "e2": 1, "e3": 0}}
  ]
}
"""

# Conventional letters for the greedy tree on the counterexample, keyed by the
# node's surviving realization ids: r is the root, b/g the e1 branches, d/c
# the e2 branches under b, e/f the e3 branches under c.  The two leaves under
# g carry no letter.
_LETTER_BY_MEMBERS = {
    frozenset({"phi1", "phi2", "phi3", "phi4", "phi5"}): "r",
    frozenset({"phi1", "phi2", "phi3"}): "b",
    frozenset({"phi1", "phi3"}): "c",
    frozenset({"phi2"}): "d",
    frozenset({"phi1"}): "e",
    frozenset({"phi3"}): "f",
    frozenset({"phi4", "phi5"}): "g",
}


def counterexample_instance() -> Instance:
    return parse_instance(COUNTEREXAMPLE_JSON)


def letter_names(tree: DecisionTree) -> dict:
    """Map tree nodes to conventional letters where defined (else BFS names).

    Only meaningful for trees over the built-in instance; unlisted nodes keep
    their n-numbered names.
    """
    names = {}
    for node in tree.nodes:
        key = frozenset(node.member_ids(tree.instance))
        names[node] = _LETTER_BY_MEMBERS.get(key, node.name)
    return names
