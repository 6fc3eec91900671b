"""Command-line surface: validate, greedy, optimal, check, audit, search, repro-paper.

Exit codes: 0 success, 1 assertion or validation failure, 2 usage error.
Reports are deterministic text by default; ``--format json`` emits a stable
machine-readable document with every rational rendered in lowest terms.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .audit import (
    ThresholdError,
    bound_audit,
    overcount_audit,
    stop_cover,
    stop_node,
)
from .counterexample import counterexample_instance, letter_names
from .instances import (
    Instance,
    InstanceError,
    class_masses,
    format_rational,
    instance_digest,
    node_mass,
    parse_instance,
    parse_rational,
    validate_instance,
)
from .objective import (
    check_adaptive_submodularity,
    check_strong_adaptive_monotonicity,
    expected_reward,
    marginal_gain,
    reward,
)
from .policy import (
    CostProfile,
    TieBreak,
    evaluate_cost,
    greedy_policy,
    optimal_policy,
    to_dot,
    trace,
)
from .search import (
    SearchConfig,
    find_partition_violations,
    finding_to_document,
    write_findings,
)

__all__ = ["main", "run"]


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _load_instance(path: str) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", code=2) from None
    try:
        return parse_instance(text)
    except InstanceError as exc:
        raise CliError(f"invalid instance document: {exc}", code=1) from None


def _require_valid(inst: Instance) -> None:
    report = validate_instance(inst)
    if not report.ok:
        raise CliError(
            "instance is invalid:\n" + "\n".join(f"  - {f}" for f in report.findings),
            code=1,
        )


def _parse_threshold(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except InstanceError as exc:
        raise CliError(str(exc), code=2) from None


def _tie_break(label: str) -> TieBreak:
    try:
        return TieBreak.from_label(label)
    except ValueError as exc:
        raise CliError(str(exc), code=2) from None


def _tree_document(tree, names=None) -> list:
    inst = tree.instance
    doc = []
    for node in tree.nodes:
        display = names.get(node, node.name) if names else node.name
        doc.append(
            {
                "node": display,
                "members": list(node.member_ids(inst)),
                "item": node.item,
                "f_e": format_rational(node.f_e),
                "path_cost": format_rational(node.path_cost),
                "children": {
                    str(o): (names.get(child, child.name) if names else child.name)
                    for o, child in node.children.items()
                },
            }
        )
    return doc


def _profile_document(inst: Instance, profile: CostProfile) -> dict:
    return {
        "per_realization": {
            phi.id: format_rational(c) for phi, c in zip(inst.realizations, profile.costs)
        },
        "average": format_rational(profile.average),
    }


def _tree_lines(tree, names=None) -> list:
    lines = []
    for entry in _tree_document(tree, names):
        kind = f"chooses {entry['item']}" if entry["item"] else "leaf"
        lines.append(
            f"  {entry['node']}: {{{','.join(entry['members'])}}}  f_E = {entry['f_e']}  ({kind})"
        )
    return lines


def _profile_lines(inst: Instance, profile: CostProfile) -> list:
    per = ", ".join(
        f"{phi.id}: {format_rational(c)}" for phi, c in zip(inst.realizations, profile.costs)
    )
    return [f"  per-realization: {per}", f"  average: {format_rational(profile.average)}"]


def _violation_document(v) -> dict:
    return {
        "kind": v.kind,
        "psi": [[item, o] for item, o in v.psi.pairs],
        "psi_prime": None if v.psi_prime is None else [[item, o] for item, o in v.psi_prime.pairs],
        "observed": None if v.observed is None else list(v.observed),
        "item": v.item,
        "lhs": format_rational(v.lhs),
        "rhs": format_rational(v.rhs),
    }


def _maybe_letters(inst: Instance, tree):
    # The conventional letters only apply to the built-in instance's tree.
    if instance_digest(inst) == instance_digest(counterexample_instance()):
        return letter_names(tree)
    return None


def cmd_validate(args) -> tuple:
    inst = _load_instance(args.file)
    report = validate_instance(inst)
    results = {"valid": report.ok, "findings": list(report.findings)}
    if report.ok:
        lines = ["instance is valid"]
        code = 0
    else:
        lines = ["instance is invalid:"] + [f"  - {f}" for f in report.findings]
        code = 1
    return code, inst, results, lines


def cmd_greedy(args) -> tuple:
    inst = _load_instance(args.file)
    _require_valid(inst)
    tie = _tie_break(args.tie)
    tree = greedy_policy(inst, tie)
    names = _maybe_letters(inst, tree)
    profile = evaluate_cost(inst, tree)
    dot_path = None
    if args.dot:
        dot_path = args.dot
        Path(args.dot).write_text(to_dot(tree, names))
    results = {
        "tie_break": tie.label(),
        "nodes": _tree_document(tree, names),
        "cost_profile": _profile_document(inst, profile),
        "dot": dot_path,
    }
    lines = [f"greedy tree: {len(tree.nodes)} nodes, tie-break {tie.label()}"]
    lines += _tree_lines(tree, names)
    lines.append("cost profile:")
    lines += _profile_lines(inst, profile)
    if dot_path:
        lines.append(f"DOT written to {dot_path}")
    return 0, inst, results, lines


def cmd_optimal(args) -> tuple:
    inst = _load_instance(args.file)
    _require_valid(inst)
    tree, profile = optimal_policy(inst)
    names = _maybe_letters(inst, tree)
    results = {
        "nodes": _tree_document(tree, names),
        "cost_profile": _profile_document(inst, profile),
    }
    lines = [f"optimal tree (nodes: {len(tree.nodes)})"]
    lines += _tree_lines(tree, names)
    lines.append("cost profile:")
    lines += _profile_lines(inst, profile)
    return 0, inst, results, lines


def cmd_check(args) -> tuple:
    inst = _load_instance(args.file)
    _require_valid(inst)
    violations = []
    if args.property in ("submodular", "both"):
        violations += check_adaptive_submodularity(inst)
    if args.property in ("monotone", "both"):
        violations += check_strong_adaptive_monotonicity(inst)
    results = {
        "property": args.property,
        "count": len(violations),
        "violations": [_violation_document(v) for v in violations],
    }
    if violations:
        lines = [f"{len(violations)} violation(s) found:"]
        for v in violations:
            lines.append(f"  {v.kind}: item {v.item}, lhs {v.lhs}, rhs {v.rhs}")
        return 1, inst, results, lines
    return 0, inst, results, [f"no violations ({args.property})"]


def _reference_profile(args, inst, tree, greedy_profile) -> tuple:
    label = args.reference
    if label == "optimal":
        _, profile = optimal_policy(inst)
        return "optimal", profile
    if label == "greedy":
        return "greedy", greedy_profile
    try:
        doc = json.loads(Path(label).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read cost file {label}: {exc}", code=2) from None
    if not isinstance(doc, dict):
        raise CliError(f"cost file {label} must map realization ids to rationals", code=1)
    costs = []
    for phi in inst.realizations:
        if phi.id not in doc:
            raise CliError(f"cost file {label} is missing {phi.id!r}", code=1)
        costs.append(parse_rational(doc[phi.id]))
    unknown = sorted(set(doc) - {phi.id for phi in inst.realizations})
    if unknown:
        raise CliError(f"cost file {label} names unknown realizations: {unknown}", code=1)
    return label, CostProfile.from_costs(inst, costs)


def cmd_audit(args) -> tuple:
    inst = _load_instance(args.file)
    _require_valid(inst)
    x = _parse_threshold(args.x)
    tree = greedy_policy(inst)
    names = _maybe_letters(inst, tree)
    greedy_profile = evaluate_cost(inst, tree)
    ref_label, ref = _reference_profile(args, inst, tree, greedy_profile)
    try:
        cover = stop_cover(tree, x)
        report = overcount_audit(tree, ref, x)
    except ThresholdError as exc:
        raise CliError(str(exc), code=1) from None
    _, opt_profile = optimal_policy(inst)
    bound = bound_audit(inst, greedy_profile, opt_profile)

    def display(node):
        return names.get(node, node.name) if names else node.name

    results = {
        "x": format_rational(x),
        "reference": ref_label,
        "stop_cover": {
            "entries": [
                {
                    "node": display(entry.node),
                    "members": list(entry.node.member_ids(inst)),
                    "stoppers": [inst.realizations[i].id for i in entry.stoppers],
                    "f_e": format_rational(entry.f_e),
                }
                for entry in cover.entries
            ],
            "verdict": cover.verdict,
            "witness": None
            if cover.witness is None
            else [display(cover.witness[0].node), display(cover.witness[1].node)],
        },
        "overcount": {
            "overlap_weighted_sum": format_rational(report.overlap_weighted_sum),
            "true_expectation": format_rational(report.true_expectation),
            "reference_c_avg": format_rational(report.reference_c_avg),
            "gap": format_rational(report.gap),
            "total_stop_mass": format_rational(report.total_stop_mass),
        },
        "bound": {
            "coverage": format_rational(bound.coverage),
            "eta": format_rational(bound.eta),
            "min_prior": format_rational(bound.min_prior),
            "bound_factor": bound.bound_factor,
            "greedy_c_avg": format_rational(bound.greedy_c_avg),
            "optimal_c_avg": format_rational(bound.optimal_c_avg),
            "ratio": None if bound.ratio is None else format_rational(bound.ratio),
            "degenerate": bound.degenerate,
            "satisfied": bound.satisfied,
        },
    }
    lines = [f"threshold x = {format_rational(x)} (reference: {ref_label})", "stop nodes:"]
    for entry in cover.entries:
        stoppers = ",".join(inst.realizations[i].id for i in entry.stoppers)
        lines.append(
            f"  {display(entry.node)}: members {{{','.join(entry.node.member_ids(inst))}}}, "
            f"f_E = {format_rational(entry.f_e)}, stops {{{stoppers}}}"
        )
    if cover.witness is None:
        lines.append(f"verdict: {cover.verdict}")
    else:
        a, b = cover.witness
        lines.append(
            f"verdict: overlap (nodes {display(a.node)} and {display(b.node)} contain common realizations)"
        )
    lines.append(f"overlap_weighted_sum: {format_rational(report.overlap_weighted_sum)}")
    lines.append(f"true_expectation: {format_rational(report.true_expectation)}")
    lines.append(f"reference_c_avg: {format_rational(report.reference_c_avg)}")
    lines.append(f"gap: {format_rational(report.gap)}")
    lines.append(f"total_stop_mass: {format_rational(report.total_stop_mass)}")
    lines.append(
        "bound: coverage = {q}, eta = {eta}, min_prior = {d}, factor = {f!r}, ratio = {r}, satisfied = {s}".format(
            q=format_rational(bound.coverage),
            eta=format_rational(bound.eta),
            d=format_rational(bound.min_prior),
            f=bound.bound_factor,
            r="undefined" if bound.ratio is None else format_rational(bound.ratio),
            s="yes" if bound.satisfied else "no",
        )
    )
    return 0, inst, results, lines


def cmd_search(args) -> tuple:
    thresholds = None
    if args.thresholds:
        thresholds = tuple(_parse_threshold(part) for part in args.thresholds.split(","))
    try:
        cfg = SearchConfig(
            realizations=(args.realizations[0], args.realizations[1]),
            items=(args.items[0], args.items[1]),
            outcome_arity=args.arity,
            cost_mode="random" if args.costs.startswith("random") else "unit",
            max_cost=int(args.costs.split(":", 1)[1]) if ":" in args.costs else 9,
            prior_mode="rational" if args.priors.startswith("rational") else "uniform",
            max_denominator=int(args.priors.split(":", 1)[1]) if ":" in args.priors else 60,
            class_mode=args.classes,
            thresholds=thresholds,
            seed=args.seed,
            max_instances=args.max_instances,
            stop_after_first=args.stop_after_first,
        )
    except ValueError as exc:
        raise CliError(str(exc), code=2) from None
    findings = find_partition_violations(cfg)
    written = []
    if args.out:
        written = [str(p) for p in write_findings(findings, args.out)]
    results = {
        "config": cfg.to_document(),
        "count": len(findings),
        "findings": [finding_to_document(f) for f in findings],
        "written": written,
    }
    lines = [f"{len(findings)} finding(s) from {cfg.max_instances} instance budget (seed {cfg.seed})"]
    for i, f in enumerate(findings):
        witness = ", ".join(
            "{" + ",".join(e.node.member_ids(f.instance)) + "}" for e in (f.cover.witness or ())
        )
        lines.append(
            f"  {i:04d}: {f.instance.n_realizations} realizations x {f.instance.n_items} items, "
            f"x = {format_rational(f.threshold)}, overlap {witness}, gap = {format_rational(f.audit.gap)}"
        )
    if written:
        lines.append(f"wrote {len(written)} file(s) under {args.out}")
    return 0, None, results, lines


def cmd_repro_paper(args) -> tuple:
    """Re-derive the built-in counterexample and assert its exact values."""
    inst = counterexample_instance()
    checks = []

    def check(label, actual, expected):
        ok = actual == expected
        checks.append(
            {
                "label": label,
                "expected": str(expected),
                "actual": str(actual),
                "ok": ok,
            }
        )

    check("instance parses: realizations", inst.n_realizations, 5)
    check("instance parses: items", inst.n_items, 3)
    check("instance valid", validate_instance(inst).ok, True)

    by_id = {phi.id: i for i, phi in enumerate(inst.realizations)}
    b_set = (by_id["phi1"], by_id["phi2"], by_id["phi3"])
    check("mass of {phi1,phi2,phi3}", node_mass(inst, b_set), Fraction(3, 5))
    check("mass of {phi2}", node_mass(inst, (by_id["phi2"],)), Fraction(1, 5))
    check("mass of all realizations", node_mass(inst, inst.all_realizations()), Fraction(1))
    check(
        "class masses at {phi1,phi2,phi3}",
        class_masses(inst, b_set),
        {"k1": Fraction(1, 5), "k2": Fraction(1, 5), "k3": Fraction(1, 5)},
    )

    tree = greedy_policy(inst)
    names = letter_names(tree)
    by_letter = {letter: node for node, letter in names.items()}

    for e in ("e1", "e2", "e3"):
        check(f"root gain of {e}", marginal_gain(inst, inst.all_realizations(), set(), e), Fraction(18, 25))
    check("root chooses e1", tree.root.item, "e1")
    check("node b chooses e2", by_letter["b"].item, "e2")
    check("node g chooses e2", by_letter["g"].item, "e2")
    check("node c chooses e3", by_letter["c"].item, "e3")

    for letter, expected in (
        ("r", Fraction(1, 25)),
        ("b", Fraction(17, 25)),
        ("c", Fraction(22, 25)),
        ("d", Fraction(1)),
        ("e", Fraction(1)),
        ("f", Fraction(1)),
        ("g", Fraction(22, 25)),
    ):
        check(f"f_E({letter})", by_letter[letter].f_e, expected)
    check(
        "expected reward recomputed at b",
        expected_reward(inst, b_set),
        Fraction(17, 25),
    )
    check("reward of phi2 alone", reward(inst, (by_id["phi2"],), "phi2"), Fraction(1))
    check("gain of e2 at b", marginal_gain(inst, b_set, {"e1"}, "e2"), Fraction(6, 25))

    check("trace of phi2", [names[n] for n in trace(tree, "phi2")], ["r", "b", "d"])
    check("trace of phi1", [names[n] for n in trace(tree, "phi1")], ["r", "b", "c", "e"])

    x = Fraction(23, 25)
    check("stop node of phi2 at 23/25", names[stop_node(tree, "phi2", x)], "b")
    check("stop node of phi1 at 23/25", names[stop_node(tree, "phi1", x)], "c")
    check("stop node of phi3 at 23/25", names[stop_node(tree, "phi3", x)], "c")
    check("stop node of phi4 at 23/25", names[stop_node(tree, "phi4", x)], "g")
    check("stop node of phi5 at 23/25", names[stop_node(tree, "phi5", x)], "g")

    cover = stop_cover(tree, x)
    check("stop cover verdict", cover.verdict, "overlap")
    witness_letters = None
    if cover.witness is not None:
        witness_letters = (names[cover.witness[0].node], names[cover.witness[1].node])
    check("overlap witness", witness_letters, ("b", "c"))

    greedy_profile = evaluate_cost(inst, tree)
    check("greedy costs", [str(c) for c in greedy_profile.costs], ["3", "2", "3", "2", "2"])
    check("greedy average cost", greedy_profile.average, Fraction(12, 5))
    _, opt_profile = optimal_policy(inst)
    check("optimal average cost", opt_profile.average, Fraction(12, 5))

    report = overcount_audit(tree, opt_profile, x)
    check("overlap_weighted_sum", report.overlap_weighted_sum, Fraction(18, 5))
    check("true_expectation", report.true_expectation, Fraction(38, 15))
    check("gap (= overcounted phi1,phi3 share)", report.gap, Fraction(6, 5))
    check("total_stop_mass", report.total_stop_mass, Fraction(7, 5))
    check("strict overshoot", report.overlap_weighted_sum > report.reference_c_avg, True)

    bound = bound_audit(inst, greedy_profile, opt_profile)
    check("coverage value", bound.coverage, Fraction(1))
    check("eta", bound.eta, Fraction(3, 25))
    check("min prior", bound.min_prior, Fraction(1, 5))
    check("greedy/optimal ratio", bound.ratio, Fraction(1))
    check("bound satisfied", bound.satisfied, True)

    check("submodularity violations", len(check_adaptive_submodularity(inst)), 0)
    check("monotonicity violations", len(check_strong_adaptive_monotonicity(inst)), 0)

    all_ok = all(c["ok"] for c in checks)
    results = {"checks": checks, "all_ok": all_ok}
    lines = []
    for c in checks:
        mark = "ok  " if c["ok"] else "FAIL"
        lines.append(f"{mark} {c['label']}: {c['actual']}" + ("" if c["ok"] else f" (expected {c['expected']})"))
    lines.append("all checks passed" if all_ok else "SOME CHECKS FAILED")
    return (0 if all_ok else 1), inst, results, lines


def _range_pair(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}")
    return (int(parts[0]), int(parts[1]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupident",
        description="Build and audit decision-tree policies for group identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance document against every invariant")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("greedy", help="build the greedy tree; optionally export DOT")
    p.add_argument("file")
    p.add_argument("--tie", default="lowest", help="lowest | highest | random:SEED")
    p.add_argument("--dot", metavar="OUT", default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_greedy)

    p = sub.add_parser("optimal", help="exact minimum-expected-cost tree (desk scale)")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_optimal)

    p = sub.add_parser("check", help="brute-force the two objective properties")
    p.add_argument("file")
    p.add_argument("--property", choices=("submodular", "monotone", "both"), required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("audit", help="stop-node cover, overcount audit, and bound report")
    p.add_argument("file")
    p.add_argument("--x", required=True, metavar="P/Q")
    p.add_argument(
        "--reference",
        default="optimal",
        help="optimal | greedy | COSTFILE (JSON mapping realization id -> rational)",
    )
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_audit)

    p = sub.add_parser("search", help="mine random instances for partition violations")
    p.add_argument("--realizations", type=_range_pair, default=(2, 5), metavar="MIN:MAX")
    p.add_argument("--items", type=_range_pair, default=(1, 4), metavar="MIN:MAX")
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--costs", default="unit", help="unit | random:MAXCOST")
    p.add_argument("--priors", default="uniform", help="uniform | rational[:MAXDEN]")
    p.add_argument("--classes", choices=("distinct", "random"), default="distinct")
    p.add_argument("--thresholds", default=None, help="comma-separated rationals; default: auto grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-instances", type=int, default=100)
    p.add_argument("--stop-after-first", action="store_true")
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser(
        "repro-paper",
        help="re-derive the built-in counterexample and assert its exact values",
    )
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_repro_paper)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, inst, results, lines = args.handler(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    if args.format == "json":
        document = {
            "command": args.command,
            "instance_digest": instance_digest(inst) if inst is not None else None,
            "results": results,
        }
        print(json.dumps(document, indent=2))
    else:
        for line in lines:
            print(line)
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
