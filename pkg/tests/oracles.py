"""Independent reference implementations used to check the library.

Everything here is deliberately naive: joint probabilities by full
enumeration, gate probabilities by the closed-form recursion, interval
membership by a hand-rolled scan. None of it shares code with the inference
or parsing paths it is used to verify.
"""

from __future__ import annotations

import itertools
import math
import random

from odd_assure.bayes_core import BayesNet, BnNode, Cpt, build_net
from odd_assure.hara_fta import CausalEntry, CausalRelation, Event, Fta, GateOp, compute_fta


def cpt_lookup(net: BayesNet, node_id: str, assignment: dict[str, str]) -> float:
    """P(node = assignment[node] | parents per assignment), straight off the
    row-major table convention."""
    cpt = net.cpts[node_id]
    row = 0
    for parent in cpt.parent_order:
        states = net.nodes[parent].states
        row = row * len(states) + states.index(assignment[parent])
    return cpt.table[row][net.nodes[node_id].states.index(assignment[node_id])]


def enumerate_joint(net: BayesNet, assignment: dict[str, str]) -> float:
    p = 1.0
    for node_id in net.nodes:
        p *= cpt_lookup(net, node_id, assignment)
    return p


def all_assignments(net: BayesNet):
    names = list(net.nodes)
    state_lists = [net.nodes[n].states for n in names]
    for combo in itertools.product(*state_lists):
        yield dict(zip(names, combo))


def enumerate_posterior(net: BayesNet, query: str, evidence: dict[str, str]) -> dict[str, float]:
    """P(query | evidence) as a dict, by summing the joint over every full
    assignment consistent with the evidence."""
    totals = {state: 0.0 for state in net.nodes[query].states}
    for assignment in all_assignments(net):
        if any(assignment[k] != v for k, v in evidence.items()):
            continue
        totals[assignment[query]] += enumerate_joint(net, assignment)
    z = sum(totals.values())
    if z == 0.0:
        raise ZeroDivisionError("evidence has zero probability")
    return {state: p / z for state, p in totals.items()}


# ---------------------------------------------------------------------------
# Random network generation


def random_net(rng: random.Random, n_nodes: int) -> BayesNet:
    """Random DAG over binary nodes with random CPTs. Edges always point from
    a lower to a higher index, which guarantees acyclicity."""
    names = [f"n{i}" for i in range(n_nodes)]
    edges = []
    for j in range(1, n_nodes):
        for i in range(j):
            if rng.random() < 0.35:
                edges.append((names[i], names[j]))
    nodes = [BnNode(n, ("t", "f")) for n in names]
    cpts = []
    for j, name in enumerate(names):
        parents = tuple(src for src, dst in edges if dst == name)
        rows = []
        for _ in range(2 ** len(parents)):
            p = rng.uniform(0.02, 0.98)
            rows.append((p, 1.0 - p))
        cpts.append(Cpt(name, parents, tuple(rows)))
    return build_net(nodes, edges, cpts)


def random_evidence(rng: random.Random, net: BayesNet, exclude: str, max_vars: int) -> dict[str, str]:
    candidates = [n for n in net.nodes if n != exclude]
    rng.shuffle(candidates)
    chosen = candidates[: rng.randint(0, min(max_vars, len(candidates)))]
    return {n: rng.choice(net.nodes[n].states) for n in chosen}


# ---------------------------------------------------------------------------
# Fault trees


def random_tree_fta(rng: random.Random, max_events: int = 10) -> tuple[Fta, dict[str, float]]:
    """Random tree-shaped fault tree (no shared subtrees, so the closed-form
    gate recursion below is exact) plus random leaf priors."""
    counter = itertools.count()
    events: list[Event] = []
    mapping: dict[str, CausalEntry] = {}
    budget = rng.randint(1, max_events)

    def build(remaining: list[int], depth: int) -> str:
        eid = f"e{next(counter)}"
        can_expand = remaining[0] >= 2 and depth < 4 and rng.random() < 0.75
        if not can_expand:
            events.append(Event(eid, eid, atomic=True))
            return eid
        n_children = rng.randint(2, min(3, remaining[0]))
        remaining[0] -= n_children
        children = tuple(build(remaining, depth + 1) for _ in range(n_children))
        events.append(Event(eid, eid, atomic=False))
        mapping[eid] = CausalEntry(children, rng.choice((GateOp.AND, GateOp.OR)))
        return eid

    top_id = build([budget], 0)
    top = next(e for e in events if e.id == top_id)
    fta = compute_fta(top, events, CausalRelation(mapping))
    priors = {e.id: rng.random() for e in fta.events if e.atomic}
    return fta, priors


def gate_formula_top_probability(fta: Fta, priors: dict[str, float]) -> float:
    """Closed-form failure probability of the top event for tree FTAs:
    AND multiplies child probabilities, OR complements the product of
    complements."""
    gates = {g.parent: g for g in fta.gates}

    def prob(eid: str) -> float:
        gate = gates.get(eid)
        if gate is None:
            return priors[eid]
        child_probs = [prob(c) for c in gate.children]
        if gate.op is GateOp.AND:
            return math.prod(child_probs)
        return 1.0 - math.prod(1.0 - p for p in child_probs)

    return prob(fta.top)


def forward_sample(net: BayesNet, n: int, rng: random.Random) -> list[dict[str, str]]:
    """Ancestral sampling along a locally computed topological order."""
    remaining = {nid: set(net.cpts[nid].parent_order) for nid in net.nodes}
    order = []
    while remaining:
        ready = sorted(n for n, deps in remaining.items() if not deps)
        order.extend(ready)
        for n_ in ready:
            del remaining[n_]
        for deps in remaining.values():
            deps.difference_update(ready)
    records = []
    for _ in range(n):
        rec: dict[str, str] = {}
        for nid in order:
            states = net.nodes[nid].states
            p = cpt_row(net, nid, rec)
            u = rng.random()
            acc = 0.0
            chosen = states[-1]
            for state, prob in zip(states, p):
                acc += prob
                if u < acc:
                    chosen = state
                    break
            rec[nid] = chosen
        records.append(rec)
    return records


def cpt_row(net: BayesNet, node_id: str, assignment: dict[str, str]) -> tuple[float, ...]:
    cpt = net.cpts[node_id]
    row = 0
    for parent in cpt.parent_order:
        states = net.nodes[parent].states
        row = row * len(states) + states.index(assignment[parent])
    return cpt.table[row]


# ---------------------------------------------------------------------------
# Intervals


def scan_interval_membership(text: str, value: float) -> bool:
    """Re-derive membership straight from the bracket text, independently of
    the Interval class."""
    body = "".join(text.split())
    lo_inc = body[0] == "["
    hi_inc = body[-1] == "]"
    lo_tok, hi_tok = body[1:-1].split(",")
    lo = -math.inf if lo_tok == "-" else float(lo_tok)
    hi = math.inf if hi_tok == "+" else float(hi_tok)
    above = value >= lo if lo_inc else value > lo
    below = value <= hi if hi_inc else value < hi
    return above and below
