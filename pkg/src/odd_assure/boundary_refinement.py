"""Learn refined ODD attribute boundaries from labeled operational traces.

Traces label each sampled operating point Yes (safe inside the ODD) or No
(exit-ODD behaviour observed). A binary CART tree with Gini impurity fits
those labels; its leaves convert to IF/THEN rules whose Yes regions, projected
per feature, propose updated in-ODD intervals. Proposals are reports, never
in-place spec edits.

Fitting is deterministic: records are canonically sorted first, candidate
thresholds are midpoints between consecutive distinct feature values, and
ties go to the lexicographically smaller feature, then the lower threshold.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .odd_model import Interval, OddSpec, format_interval

YES = "Yes"
NO = "No"


class RefinementError(Exception):
    pass


class DocumentError(RefinementError):
    pass


class TooFewRecords(RefinementError):
    pass


class MissingFeature(RefinementError):
    pass


class UnknownFeature(RefinementError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    features: Mapping[str, float]
    label: str

    def __post_init__(self) -> None:
        if self.label not in (YES, NO):
            raise DocumentError(f"label must be Yes or No, got {self.label!r}")


@dataclass(frozen=True)
class Leaf:
    label: str
    n_yes: int
    n_no: int


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: float
    left: Union["Split", Leaf]   # feature <= threshold
    right: Union["Split", Leaf]  # feature > threshold


@dataclass(frozen=True)
class DecisionTree:
    root: Union[Split, Leaf]
    feature_names: tuple[str, ...]
    constant_features: bool = False  # impure root that no split could separate


@dataclass(frozen=True)
class Rule:
    """Conjunction of threshold tests with a Yes/No outcome; one per leaf."""

    conjuncts: tuple[tuple[str, str, float], ...]  # (feature, "<=" or ">", threshold)
    outcome: str


@dataclass(frozen=True)
class BoundaryProposal:
    class_name: str
    current: tuple[Interval, ...]
    proposed: tuple[Interval, ...]


@dataclass(frozen=True)
class RefinementReport:
    proposals: tuple[BoundaryProposal, ...]
    yes_regions: tuple[Rule, ...]  # full conjunctive regions, kept for audit
    exit_everywhere: bool


def _gini(n_yes: int, n_no: int) -> float:
    total = n_yes + n_no
    if total == 0:
        return 0.0
    p_yes = n_yes / total
    p_no = n_no / total
    return 1.0 - p_yes * p_yes - p_no * p_no


def _majority(n_yes: int, n_no: int) -> str:
    # Tie goes to No: an undecided region is treated as exit-ODD.
    return YES if n_yes > n_no else NO


def fit_tree(records: Sequence[TraceRecord], max_depth: int = 6, min_leaf: int = 20) -> DecisionTree:
    """Fit a binary CART classifier over the trace records.

    Splitting stops at ``max_depth``, when a side would fall under
    ``min_leaf`` records, or at zero impurity. A root that is impure but
    admits no valid split becomes a single majority leaf with the
    ``constant_features`` flag raised.
    """
    if min_leaf < 1 or max_depth < 0:
        raise RefinementError("max_depth must be >= 0 and min_leaf >= 1")
    if len(records) < 2 * min_leaf:
        raise TooFewRecords(f"{len(records)} records cannot fill two leaves of {min_leaf}")
    names = sorted(records[0].features)
    for rec in records:
        if sorted(rec.features) != names:
            raise DocumentError("records disagree on the feature set")

    ordered = sorted(records, key=lambda r: ([r.features[n] for n in names], r.label))
    x = np.array([[r.features[n] for n in names] for r in ordered], dtype=float)
    y = np.array([1 if r.label == YES else 0 for r in ordered], dtype=int)

    def grow(idx: np.ndarray, depth: int):
        n_yes = int(y[idx].sum())
        n_no = int(len(idx) - n_yes)
        impurity = _gini(n_yes, n_no)
        if impurity == 0.0 or depth >= max_depth:
            return Leaf(_majority(n_yes, n_no), n_yes, n_no)
        best = None  # (weighted impurity, feature pos, threshold, mask)
        for pos, name in enumerate(names):
            col = x[idx, pos]
            values = np.unique(col)
            for lo, hi in zip(values, values[1:]):
                threshold = (lo + hi) / 2.0
                mask = col <= threshold
                nl = int(mask.sum())
                nr = len(idx) - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                yl = int(y[idx][mask].sum())
                yr = n_yes - yl
                weighted = (nl * _gini(yl, nl - yl) + nr * _gini(yr, nr - yr)) / len(idx)
                if weighted >= impurity:
                    continue
                if best is None or weighted < best[0]:
                    best = (weighted, pos, threshold, mask)
        if best is None:
            return Leaf(_majority(n_yes, n_no), n_yes, n_no)
        _, pos, threshold, mask = best
        return Split(
            feature=names[pos],
            threshold=float(threshold),
            left=grow(idx[mask], depth + 1),
            right=grow(idx[~mask], depth + 1),
        )

    root = grow(np.arange(len(ordered)), 0)
    constant = isinstance(root, Leaf) and _gini(root.n_yes, root.n_no) > 0.0
    return DecisionTree(root=root, feature_names=tuple(names), constant_features=constant)


def predict(tree: DecisionTree, features: Mapping[str, float]) -> str:
    """Descend the tree to a leaf label; values equal to a threshold go left."""
    node = tree.root
    while isinstance(node, Split):
        if node.feature not in features:
            raise MissingFeature(f"no value for feature {node.feature!r}")
        node = node.left if features[node.feature] <= node.threshold else node.right
    return node.label


def extract_rules(tree: DecisionTree) -> list[Rule]:
    """One rule per leaf, in left-to-right leaf order.

    Along a path, repeated tests of one feature collapse to the tightest
    bound per direction (minimum of the <= thresholds, maximum of the >
    thresholds), keeping the position of the first occurrence.
    """
    rules: list[Rule] = []

    def walk(node, path: list[tuple[str, str, float]]):
        if isinstance(node, Leaf):
            rules.append(Rule(tuple(_collapse(path)), node.label))
            return
        walk(node.left, path + [(node.feature, "<=", node.threshold)])
        walk(node.right, path + [(node.feature, ">", node.threshold)])

    walk(tree.root, [])
    return rules


def _collapse(path: Sequence[tuple[str, str, float]]) -> list[tuple[str, str, float]]:
    out: list[tuple[str, str, float]] = []
    slot: dict[tuple[str, str], int] = {}
    for feature, op, threshold in path:
        key = (feature, op)
        if key not in slot:
            slot[key] = len(out)
            out.append((feature, op, threshold))
            continue
        i = slot[key]
        kept = out[i][2]
        if op == "<=":
            out[i] = (feature, op, min(kept, threshold))
        else:
            out[i] = (feature, op, max(kept, threshold))
    return out


def format_rule(rule: Rule) -> str:
    """Render `IF f <= v AND ... THEN Yes|No` with 2-decimal thresholds;
    an unconditional rule has no IF clause."""
    if not rule.conjuncts:
        return f"THEN {rule.outcome}"
    tests = " AND ".join(f"{f} {op} {v:.2f}" for f, op, v in rule.conjuncts)
    return f"IF {tests} THEN {rule.outcome}"


def rule_interval(rule: Rule, feature: str) -> Interval:
    """Projection of a rule's region onto one feature."""
    lo, hi = -math.inf, math.inf
    lo_inc, hi_inc = False, False
    for f, op, threshold in rule.conjuncts:
        if f != feature:
            continue
        if op == "<=":
            if threshold < hi:
                hi, hi_inc = threshold, True
        else:
            if threshold > lo:
                lo, lo_inc = threshold, False
    return Interval(lo, hi, lo_inc, hi_inc)


def _merge_intervals(intervals: list[Interval]) -> tuple[Interval, ...]:
    if not intervals:
        return ()
    ordered = sorted(intervals, key=lambda iv: (iv.lo, not iv.lo_inclusive))
    merged = [ordered[0]]
    for iv in ordered[1:]:
        last = merged[-1]
        touches = iv.lo < last.hi or (
            iv.lo == last.hi and (iv.lo_inclusive or last.hi_inclusive)
        )
        if touches:
            if (iv.hi, iv.hi_inclusive) > (last.hi, last.hi_inclusive):
                merged[-1] = Interval(last.lo, iv.hi, last.lo_inclusive, iv.hi_inclusive)
        else:
            merged.append(iv)
    return tuple(merged)


def refine_boundaries(spec: OddSpec, rules: Iterable[Rule]) -> RefinementReport:
    """Propose per-feature in-ODD intervals from the Yes rules.

    Every feature tested by some rule must name an ODD class. The proposal
    for a feature is the merged union of the projections of the Yes rules
    that test it; this per-feature projection is conservative, so the
    untouched conjunctive regions ride along in the report for audit.
    """
    rules = list(rules)
    tested = sorted({f for r in rules for f, _, _ in r.conjuncts})
    for feature in tested:
        if feature not in spec.classes:
            raise UnknownFeature(f"rule feature {feature!r} is not an ODD class")

    yes_rules = [r for r in rules if r.outcome == YES]
    proposals = []
    for feature in tested:
        relevant = [r for r in yes_rules if any(f == feature for f, _, _ in r.conjuncts)]
        proposed = _merge_intervals([rule_interval(r, feature) for r in relevant])
        current = tuple(a.bounds for a in spec.classes[feature].attributes)
        proposals.append(BoundaryProposal(feature, current, proposed))
    return RefinementReport(
        proposals=tuple(proposals),
        yes_regions=tuple(yes_rules),
        exit_everywhere=not yes_rules,
    )


def report_to_document(report: RefinementReport) -> dict:
    return {
        "exit_everywhere": report.exit_everywhere,
        "proposals": [
            {
                "class": p.class_name,
                "current": [format_interval(iv) for iv in p.current],
                "proposed": [format_interval(iv) for iv in p.proposed],
            }
            for p in report.proposals
        ],
        "yes_regions": [format_rule(r) for r in report.yes_regions],
    }


def parse_trace(text: str) -> list[TraceRecord]:
    """Parse a delimited trace: header of feature names plus a `label`
    column holding Yes/No."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "label" not in reader.fieldnames:
        raise DocumentError("trace needs a header row with a 'label' column")
    features = [n for n in reader.fieldnames if n != "label"]
    if not features:
        raise DocumentError("trace has no feature columns")
    records = []
    for row_no, row in enumerate(reader, start=2):
        try:
            values = {n: float(row[n]) for n in features}
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"row {row_no}: bad numeric value ({exc})") from exc
        records.append(TraceRecord(values, row["label"]))
    if not records:
        raise TooFewRecords("trace has no data rows")
    return records


def load_trace(path) -> list[TraceRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_trace(fh.read())
