"""Hazard analysis structures: causal event chains and fault tree construction.

A hazard is decomposed into a fault tree by walking a causal relation from
the top event with an explicit worklist. Non-atomic events receive an AND/OR
gate over their cause events; atomic events terminate the walk and carry the
operating conditions (ODD class/attribute references) that make them
observable. Events may be shared between branches, so the result is a DAG
rather than a strict tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping


class HaraError(Exception):
    """Base class for hazard analysis errors."""


class DocumentError(HaraError):
    pass


class CyclicCausality(HaraError):
    """The causal relation contains a cycle reachable from the hazard."""


class DanglingReference(HaraError):
    pass


class InconsistentChain(HaraError):
    """An event's dependency edges contradict its declared role."""


class GateOp(str, Enum):
    AND = "AND"
    OR = "OR"


class EventRole(str, Enum):
    OCCURRENCE = "occurrence"
    HAZARDOUS = "hazardous"
    CONSEQUENCE = "consequence"


@dataclass(frozen=True)
class Event:
    """A HARA event. Atomic events are leaves observable through operating
    conditions; only they may carry ``oper_conditions``."""

    id: str
    text: str
    atomic: bool
    oper_conditions: tuple[tuple[str, str], ...] = ()
    role: EventRole | None = None

    def __post_init__(self) -> None:
        if self.oper_conditions and not self.atomic:
            raise DocumentError(
                f"event {self.id!r} is not atomic but declares operating conditions"
            )


@dataclass(frozen=True)
class CausalEntry:
    children: tuple[str, ...]
    op: GateOp


@dataclass(frozen=True)
class CausalRelation:
    """Maps an event to its ordered cause events and the gate operator
    combining them."""

    mapping: Mapping[str, CausalEntry]

    def __post_init__(self) -> None:
        for parent, entry in self.mapping.items():
            if not entry.children:
                raise DocumentError(f"causal entry for {parent!r} has no children")
            if parent in entry.children:
                raise DocumentError(f"causal entry for {parent!r} references itself")
            if len(set(entry.children)) != len(entry.children):
                raise DocumentError(f"causal entry for {parent!r} repeats a child")

    def get(self, event_id: str) -> CausalEntry | None:
        return self.mapping.get(event_id)


@dataclass(frozen=True)
class Gate:
    parent: str
    children: tuple[str, ...]
    op: GateOp


@dataclass(frozen=True)
class Fta:
    """Fault tree: top event, ordered event set, and one gate per non-atomic
    event reachable from the top."""

    top: str
    events: tuple[Event, ...]
    gates: tuple[Gate, ...]

    def event(self, event_id: str) -> Event:
        for e in self.events:
            if e.id == event_id:
                return e
        raise KeyError(event_id)

    def atomic_events(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.atomic)


class DependsKind(str, Enum):
    ON_OCCURRENCE = "dependsOnOccurrence"
    ON_HAZARDOUS = "dependsOnHazardous"
    ON_CONSEQUENCE = "dependsOnConsequence"
    TRIGGER = "trigger"


@dataclass(frozen=True)
class ChainEdge:
    kind: DependsKind
    src: str
    dst: str


@dataclass(frozen=True)
class HazardChain:
    """Occurrence events feeding a hazardous event feeding consequence events,
    with typed dependency edges between them."""

    hazardous_event: str
    occurrence_events: tuple[str, ...] = ()
    consequence_events: tuple[str, ...] = ()
    edges: tuple[ChainEdge, ...] = ()

    def __post_init__(self) -> None:
        members = set(self.members())
        for edge in self.edges:
            if edge.src not in members or edge.dst not in members:
                raise DanglingReference(
                    f"chain edge {edge.src!r} -> {edge.dst!r} leaves the chain"
                )
            if edge.kind is DependsKind.TRIGGER:
                if edge.src not in self.occurrence_events or edge.dst != self.hazardous_event:
                    raise InconsistentChain(
                        "trigger edges run strictly from occurrence events to the hazardous event"
                    )

    def members(self) -> tuple[str, ...]:
        return self.occurrence_events + (self.hazardous_event,) + self.consequence_events

    def declared_role(self, event_id: str) -> EventRole:
        if event_id == self.hazardous_event:
            return EventRole.HAZARDOUS
        if event_id in self.occurrence_events:
            return EventRole.OCCURRENCE
        if event_id in self.consequence_events:
            return EventRole.CONSEQUENCE
        raise DanglingReference(f"event {event_id!r} is not part of the chain")


@dataclass(frozen=True)
class FtaDefect:
    kind: str
    event_ids: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        return f"{self.kind}{list(self.event_ids)}: {self.message}"


def _check_acyclic(start: str, relation: CausalRelation) -> None:
    """Three-state depth-first search for cycles reachable from ``start``."""
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = {}

    def visit(node: str, path: list[str]) -> None:
        color[node] = GREY
        path.append(node)
        entry = relation.get(node)
        for child in entry.children if entry else ():
            state = color.get(child, WHITE)
            if state == GREY:
                cycle = path[path.index(child):] + [child]
                raise CyclicCausality(" -> ".join(cycle))
            if state == WHITE:
                visit(child, path)
        path.pop()
        color[node] = BLACK

    visit(start, [])


def compute_fta(hazard: Event, events: Iterable[Event], causal_relation: CausalRelation) -> Fta:
    """Construct the fault tree rooted at ``hazard``.

    Worklist traversal with stack semantics: pop an event, look up its cause
    events, gate non-atomic ones, push the causes. Each event is expanded
    exactly once and appended to the event set at most once, preserving the
    child order given by the causal relation.
    """
    by_id = {e.id: e for e in events}
    if hazard.id not in by_id:
        raise DanglingReference(f"hazard {hazard.id!r} is not in the event set")
    for parent, entry in causal_relation.mapping.items():
        for ref in (parent, *entry.children):
            if ref not in by_id:
                raise DanglingReference(f"causal relation references unknown event {ref!r}")
        if by_id[parent].atomic:
            raise DocumentError(f"atomic event {parent!r} cannot have cause events")
    _check_acyclic(hazard.id, causal_relation)

    collected = [hazard.id]
    gates: list[Gate] = []
    expanded: set[str] = set()
    stack = [hazard.id]
    while stack:
        current = stack.pop()
        if current in expanded:
            continue
        expanded.add(current)
        entry = causal_relation.get(current)
        if entry is None:
            continue
        gates.append(Gate(parent=current, children=entry.children, op=entry.op))
        for child in entry.children:
            if child not in collected:
                collected.append(child)
        stack.extend(entry.children)

    return Fta(
        top=hazard.id,
        events=tuple(by_id[eid] for eid in collected),
        gates=tuple(gates),
    )


def _role_candidates(out_kinds: set[DependsKind]) -> set[EventRole]:
    """Closed-world evaluation of the three classification axioms.

    Occurrence: lacks a dependsOnHazardous edge or lacks a dependsOnConsequence
    edge. Consequence: lacks a dependsOnOccurrence edge. Hazardous: lacks a
    dependsOnConsequence edge.
    """
    on_occ = DependsKind.ON_OCCURRENCE in out_kinds
    on_haz = DependsKind.ON_HAZARDOUS in out_kinds
    on_con = DependsKind.ON_CONSEQUENCE in out_kinds
    candidates = set()
    if (not on_haz) or (not on_con):
        candidates.add(EventRole.OCCURRENCE)
    if not on_occ:
        candidates.add(EventRole.CONSEQUENCE)
    if not on_con:
        candidates.add(EventRole.HAZARDOUS)
    return candidates


def classify_event(chain: HazardChain, event_id: str) -> EventRole:
    """Classify a chain event from its outgoing dependency edges.

    When the edge pattern admits several roles, the role declared by the
    chain position wins; a declared role outside the admissible set is an
    inconsistency, not a reclassification.
    """
    declared = chain.declared_role(event_id)
    out_kinds = {
        e.kind for e in chain.edges if e.src == event_id and e.kind is not DependsKind.TRIGGER
    }
    candidates = _role_candidates(out_kinds)
    if not candidates:
        raise InconsistentChain(f"event {event_id!r} satisfies no role axiom")
    if declared not in candidates:
        raise InconsistentChain(
            f"event {event_id!r} is declared {declared.value} but its edges admit "
            f"only {sorted(r.value for r in candidates)}"
        )
    return declared


def validate_fta(fta: Fta) -> list[FtaDefect]:
    """Check all structural invariants; defects are data, not exceptions."""
    defects: list[FtaDefect] = []
    ids = [e.id for e in fta.events]
    by_id = {e.id: e for e in fta.events}
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        defects.append(FtaDefect("DuplicateEvent", tuple(dupes), "event listed twice"))
    if fta.top not in by_id:
        defects.append(FtaDefect("MissingTop", (fta.top,), "top event not in event set"))
        return defects

    gates_by_parent: dict[str, list[Gate]] = {}
    for gate in fta.gates:
        gates_by_parent.setdefault(gate.parent, []).append(gate)
        if not gate.children:
            defects.append(FtaDefect("EmptyGate", (gate.parent,), "gate has no children"))
        for ref in (gate.parent, *gate.children):
            if ref not in by_id:
                defects.append(
                    FtaDefect("DanglingReference", (ref,), "gate references unknown event")
                )
        if gate.parent in gate.children:
            defects.append(FtaDefect("SelfLoop", (gate.parent,), "gate feeds its own parent"))

    for event in fta.events:
        n_gates = len(gates_by_parent.get(event.id, []))
        if event.atomic and n_gates > 0:
            defects.append(
                FtaDefect("AtomicWithGate", (event.id,), "atomic event must not have a gate")
            )
        if not event.atomic and n_gates == 0:
            defects.append(
                FtaDefect("MissingGate", (event.id,), "non-atomic event has no gate")
            )
        if not event.atomic and n_gates > 1:
            defects.append(
                FtaDefect("DuplicateGate", (event.id,), f"{n_gates} gates on one event")
            )
        if event.oper_conditions and not event.atomic:
            defects.append(
                FtaDefect(
                    "OperCondOnNonAtomic", (event.id,), "conditions on a non-atomic event"
                )
            )

    # Reachability from the top through gate children.
    reachable = {fta.top}
    frontier = [fta.top]
    while frontier:
        node = frontier.pop()
        for gate in gates_by_parent.get(node, []):
            for child in gate.children:
                if child in by_id and child not in reachable:
                    reachable.add(child)
                    frontier.append(child)
    for event in fta.events:
        if event.id not in reachable:
            defects.append(
                FtaDefect("UnreachableEvent", (event.id,), "no path from the top event")
            )

    # Cycle detection over gate edges restricted to known ids.
    WHITE, GREY, BLACK = 0, 1, 2
    color = {eid: WHITE for eid in by_id}

    def visit(node: str) -> bool:
        color[node] = GREY
        for gate in gates_by_parent.get(node, []):
            for child in gate.children:
                if child not in color:
                    continue
                if color[child] == GREY:
                    return True
                if color[child] == WHITE and visit(child):
                    return True
        color[node] = BLACK
        return False

    for eid in by_id:
        if color[eid] == WHITE and visit(eid):
            defects.append(FtaDefect("CyclicStructure", (eid,), "gate edges form a cycle"))
            break

    return defects


def check_oper_conditions(fta: Fta, spec) -> list[FtaDefect]:
    """Cross-check atomic leaves against a companion ODD spec.

    A condition reference ``(class, name)`` resolves when the class exists
    and ``name`` is one of its attributes or one of its subclasses; hazard
    tables commonly reference conditions at both granularities.
    """
    defects = []
    for event in fta.atomic_events():
        for class_name, ref in event.oper_conditions:
            cls = spec.classes.get(class_name)
            if cls is None:
                defects.append(
                    FtaDefect(
                        "UnknownOperCondClass", (event.id,), f"no ODD class {class_name!r}"
                    )
                )
                continue
            names = {a.name for a in cls.attributes} | set(spec.children(class_name))
            if ref not in names:
                defects.append(
                    FtaDefect(
                        "UnknownOperCondState",
                        (event.id,),
                        f"{ref!r} is neither attribute nor subclass of {class_name!r}",
                    )
                )
    return defects


def parse_hara(document) -> tuple[list[str], dict[str, Event], CausalRelation, list[HazardChain]]:
    """Parse a HARA document (JSON text or parsed object).

    Schema: ``{"hazards": [id], "events": [{id, text, atomic, role,
    oper_conditions}], "causal": [{parent, op, children}], "chains":
    [{hazardous, occurrence, consequence, edges}]}``. The chains section is
    optional.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("events"), list):
        raise DocumentError("document must be an object with an 'events' list")

    events: dict[str, Event] = {}
    for entry in document["events"]:
        if not isinstance(entry, dict) or "id" not in entry:
            raise DocumentError(f"event entry missing 'id': {entry!r}")
        if entry["id"] in events:
            raise DocumentError(f"event {entry['id']!r} declared twice")
        role = entry.get("role")
        events[entry["id"]] = Event(
            id=entry["id"],
            text=entry.get("text", entry["id"]),
            atomic=bool(entry.get("atomic", False)),
            oper_conditions=tuple(
                (c[0], c[1]) for c in entry.get("oper_conditions", [])
            ),
            role=EventRole(role) if role else None,
        )

    mapping = {}
    for entry in document.get("causal", []):
        if not {"parent", "op", "children"} <= entry.keys():
            raise DocumentError(f"causal entry needs parent/op/children: {entry!r}")
        if entry["parent"] in mapping:
            raise DocumentError(f"two causal entries for {entry['parent']!r}")
        try:
            op = GateOp(entry["op"].upper())
        except ValueError:
            raise DocumentError(f"gate op must be AND or OR, got {entry['op']!r}") from None
        mapping[entry["parent"]] = CausalEntry(tuple(entry["children"]), op)
    relation = CausalRelation(mapping)

    hazards = list(document.get("hazards", []))
    for hid in hazards:
        if hid not in events:
            raise DanglingReference(f"hazard {hid!r} not declared in events")

    chains = []
    for entry in document.get("chains", []):
        chains.append(
            HazardChain(
                hazardous_event=entry["hazardous"],
                occurrence_events=tuple(entry.get("occurrence", [])),
                consequence_events=tuple(entry.get("consequence", [])),
                edges=tuple(
                    ChainEdge(DependsKind(e["kind"]), e["from"], e["to"])
                    for e in entry.get("edges", [])
                ),
            )
        )
    return hazards, events, relation, chains


def hara_to_document(
    hazards: Iterable[str],
    events: Mapping[str, Event],
    relation: CausalRelation,
    chains: Iterable[HazardChain] = (),
) -> dict:
    return {
        "hazards": list(hazards),
        "events": [
            {
                "id": e.id,
                "text": e.text,
                "atomic": e.atomic,
                "role": e.role.value if e.role else None,
                "oper_conditions": [list(c) for c in e.oper_conditions],
            }
            for e in events.values()
        ],
        "causal": [
            {"parent": parent, "op": entry.op.value, "children": list(entry.children)}
            for parent, entry in relation.mapping.items()
        ],
        "chains": [
            {
                "hazardous": c.hazardous_event,
                "occurrence": list(c.occurrence_events),
                "consequence": list(c.consequence_events),
                "edges": [
                    {"kind": e.kind.value, "from": e.src, "to": e.dst} for e in c.edges
                ],
            }
            for c in chains
        ],
    }


def load_hara(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hara(fh.read())
