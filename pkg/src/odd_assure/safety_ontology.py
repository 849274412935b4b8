"""Triple store for the safety ontology with closed-world axiom checking.

ODD structure, hazard events, GSN argument elements, and network metadata all
live in one graph of (subject, predicate, object) facts. The axiom checker
treats the description-logic axioms as integrity constraints: every predicate
has domain/range typing rules, the subsumptions hasInference/hasEvidence into
supportedBy must be materialized, and objective-node membership is derived
from the dependsOn edges. Violations are returned as data, labeled with the
axiom they break.

Graphs are persistent values: mutators return a new graph, so concurrent
readers never see a half-applied update.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

Term = Union[str, "Literal"]


class OntologyError(Exception):
    pass


class UnknownPredicate(OntologyError):
    pass


class TypeViolation(OntologyError):
    pass


class ParseError(OntologyError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Literal:
    """A quoted string or numeric value; everything else is an identifier."""

    value: Union[str, float, int]

    def __str__(self) -> str:
        return str(self.value)


RDF_TYPE = "rdf_type"

VOCABULARY = frozenset(
    {
        "subClassOf",
        "hasAttribute",
        "hasDomain",
        "hasOperCond",
        "hasOccurrenceEvent",
        "hasConsequenceEvent",
        "trigger",
        "dependsOnOccurrence",
        "dependsOnHazardous",
        "dependsOnConsequence",
        "relatedTo",
        "supportedBy",
        "supports",
        "hasInference",
        "hasEvidence",
        "hasConfidence",
        "hasText",
        "dependsOn",
        "hasCPT",
        "hasACP",
        RDF_TYPE,
    }
)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: str
    object: Term


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str
    triple: Triple
    message: str

    def __str__(self) -> str:
        return f"{self.axiom}: {self.message}"


@dataclass(frozen=True)
class TripleGraph:
    triples: frozenset[Triple] = frozenset()
    extension_predicates: frozenset[str] = frozenset()

    def types_of(self, term: Term) -> set[str]:
        return {
            str(t.object)
            for t in self.triples
            if t.predicate == RDF_TYPE and t.subject == term and isinstance(t.object, str)
        }

    def has_type(self, term: Term, cls: str) -> bool:
        return Triple(term, RDF_TYPE, cls) in self.triples

    def individuals_of(self, cls: str) -> set[Term]:
        return {t.subject for t in self.triples if t.predicate == RDF_TYPE and t.object == cls}


def assert_triple(graph: TripleGraph, triple: Triple) -> TripleGraph:
    """Insert a fact (set semantics: re-asserting is a no-op).

    supportedBy and supports are each other's inverse, and hasInference /
    hasEvidence are subsumed by supportedBy; the entailed facts are
    materialized on insert so pattern queries see them.
    """
    if triple.predicate not in VOCABULARY | graph.extension_predicates:
        raise UnknownPredicate(f"predicate {triple.predicate!r} is not in the vocabulary")
    new = {triple}
    if triple.predicate == "supportedBy":
        new.add(Triple(triple.object, "supports", triple.subject))
    elif triple.predicate == "supports":
        new.add(Triple(triple.object, "supportedBy", triple.subject))
    elif triple.predicate in ("hasInference", "hasEvidence"):
        new.add(Triple(triple.subject, "supportedBy", triple.object))
        new.add(Triple(triple.object, "supports", triple.subject))
    return TripleGraph(graph.triples | new, graph.extension_predicates)


def assert_all(graph: TripleGraph, triples: Iterable[Triple]) -> TripleGraph:
    for t in triples:
        graph = assert_triple(graph, t)
    return graph


def retract_triple(graph: TripleGraph, triple: Triple) -> TripleGraph:
    return TripleGraph(graph.triples - {triple}, graph.extension_predicates)


def query(graph: TripleGraph, subject=None, predicate=None, object=None) -> list[Triple]:
    """All triples matching the bound positions (None = wildcard), in
    canonical lexicographic order."""
    hits = [
        t
        for t in graph.triples
        if (subject is None or t.subject == subject)
        and (predicate is None or t.predicate == predicate)
        and (object is None or t.object == object)
    ]
    return sorted(hits, key=_sort_key)


def _sort_key(t: Triple):
    return (_term_key(t.subject), t.predicate, _term_key(t.object))


def _term_key(term: Term) -> tuple[int, str]:
    if isinstance(term, Literal):
        return (1, format_term(term))
    return (0, term)


# ---------------------------------------------------------------------------
# Axiom checking

# predicate -> (range axiom, allowed object types) and (domain axiom,
# required subject types). "any" lists accept one matching type; A37 is the
# lone conjunctive domain.
_RANGE_RULES: dict[str, tuple[str, frozenset[str]]] = {
    "subClassOf": ("A1", frozenset({"OddClass"})),
    "hasAttribute": ("A3", frozenset({"OddAttribute"})),
    "hasDomain": ("A5", frozenset({"Unit", "Constraint"})),
    "hasOperCond": ("A7", frozenset({"OddAttribute"})),
    "hasOccurrenceEvent": ("A9", frozenset({"OccurrenceEvent"})),
    "hasConsequenceEvent": ("A11", frozenset({"ConsequenceEvent"})),
    "trigger": ("A13", frozenset({"HazardousEvent"})),
    "dependsOnOccurrence": ("A15", frozenset({"OccurrenceEvent"})),
    "dependsOnHazardous": ("A17", frozenset({"HazardousEvent"})),
    "dependsOnConsequence": ("A19", frozenset({"ConsequenceEvent"})),
    "relatedTo": ("A24", frozenset({"HazardousEvent"})),
    "supportedBy": ("A26", frozenset({"Goal", "Strategy", "Solution"})),
    "hasInference": ("A30", frozenset({"Goal"})),
    "hasEvidence": ("A33", frozenset({"Evidence"})),
    "hasConfidence": ("A36", frozenset({"ObjNode"})),
    "dependsOn": ("A42", frozenset({"Node"})),
    "hasCPT": ("A44", frozenset({"CptTable"})),
}
_DOMAIN_RULES: dict[str, tuple[str, frozenset[str]]] = {
    "subClassOf": ("A2", frozenset({"OddClass"})),
    "hasAttribute": ("A4", frozenset({"OddClass"})),
    "hasDomain": ("A6", frozenset({"OddAttribute"})),
    "hasOperCond": ("A8", frozenset({"Event", "OccurrenceEvent", "ConsequenceEvent"})),
    "hasOccurrenceEvent": ("A10", frozenset({"Event"})),
    "hasConsequenceEvent": ("A12", frozenset({"Event"})),
    "trigger": ("A14", frozenset({"OccurrenceEvent"})),
    "dependsOnOccurrence": ("A16", frozenset({"OccurrenceEvent", "HazardousEvent"})),
    "dependsOnHazardous": ("A18", frozenset({"HazardousEvent", "ConsequenceEvent"})),
    "dependsOnConsequence": ("A20", frozenset({"ConsequenceEvent"})),
    "relatedTo": ("A25", frozenset({"TopLevelGoal"})),
    "supportedBy": ("A27", frozenset({"Goal", "Strategy"})),
    "hasInference": ("A31", frozenset({"Goal"})),
    "hasEvidence": ("A34", frozenset({"Goal"})),
    "dependsOn": ("A43", frozenset({"Node"})),
    "hasCPT": ("A45", frozenset({"Node"})),
    "hasACP": ("A47", frozenset({"ObjNode"})),
}

# A29 (supportedBy subsumes itself) and A41 are tautologies and have no
# checkable content; they are intentionally absent from the rule tables.


def _check_typed(graph: TripleGraph, term: Term, allowed: frozenset[str]) -> bool:
    return bool(graph.types_of(term) & allowed)


def check_axioms(graph: TripleGraph) -> list[AxiomViolation]:
    """Closed-world integrity check; empty list means consistent."""
    violations: list[AxiomViolation] = []

    for t in sorted(graph.triples, key=_sort_key):
        rule = _RANGE_RULES.get(t.predicate)
        if rule is not None:
            axiom, allowed = rule
            if not _check_typed(graph, t.object, allowed):
                violations.append(
                    AxiomViolation(
                        axiom,
                        t,
                        f"object of {t.predicate} must be typed "
                        f"{' or '.join(sorted(allowed))}, got {format_term(t.object)}",
                    )
                )
        rule = _DOMAIN_RULES.get(t.predicate)
        if rule is not None:
            axiom, allowed = rule
            if not _check_typed(graph, t.subject, allowed):
                violations.append(
                    AxiomViolation(
                        axiom,
                        t,
                        f"subject of {t.predicate} must be typed "
                        f"{' or '.join(sorted(allowed))}, got {format_term(t.subject)}",
                    )
                )
        if t.predicate == "hasConfidence":
            # A37: the subject must be both a Goal and a Solution.
            if not ({"Goal", "Solution"} <= graph.types_of(t.subject)):
                violations.append(
                    AxiomViolation(
                        "A37",
                        t,
                        f"subject of hasConfidence must be typed Goal and Solution, "
                        f"got {format_term(t.subject)}",
                    )
                )
        if t.predicate == "hasText":
            if not (isinstance(t.object, Literal) and isinstance(t.object.value, str)):
                violations.append(
                    AxiomViolation("A40", t, "object of hasText must be a string literal")
                )
        if t.predicate == "hasACP":
            ok = isinstance(t.object, Literal) and isinstance(t.object.value, (int, float))
            if ok and not (0.0 <= float(t.object.value) <= 1.0):
                ok = False
            if not ok:
                violations.append(
                    AxiomViolation(
                        "A46", t, "object of hasACP must be a numeric literal in [0, 1]"
                    )
                )
        if t.predicate == "supportedBy":
            if Triple(t.object, "supports", t.subject) not in graph.triples:
                violations.append(
                    AxiomViolation("A28", t, "inverse supports fact is not materialized")
                )
        if t.predicate in ("hasInference", "hasEvidence"):
            axiom = "A32" if t.predicate == "hasInference" else "A35"
            if Triple(t.subject, "supportedBy", t.object) not in graph.triples:
                violations.append(
                    AxiomViolation(axiom, t, f"{t.predicate} fact lacks its supportedBy fact")
                )

    violations.extend(_check_event_classification(graph))
    violations.extend(_check_objective_nodes(graph))
    return violations


_EVENT_AXIOMS = {
    "OccurrenceEvent": "A21",
    "ConsequenceEvent": "A22",
    "HazardousEvent": "A23",
}


def _event_candidates(graph: TripleGraph, term: Term) -> set[str]:
    out = {
        t.predicate
        for t in graph.triples
        if t.subject == term
        and t.predicate in ("dependsOnOccurrence", "dependsOnHazardous", "dependsOnConsequence")
    }
    candidates = set()
    if "dependsOnHazardous" not in out or "dependsOnConsequence" not in out:
        candidates.add("OccurrenceEvent")
    if "dependsOnOccurrence" not in out:
        candidates.add("ConsequenceEvent")
    if "dependsOnConsequence" not in out:
        candidates.add("HazardousEvent")
    return candidates


def _check_event_classification(graph: TripleGraph) -> list[AxiomViolation]:
    violations = []
    for cls, axiom in _EVENT_AXIOMS.items():
        for term in sorted(graph.individuals_of(cls), key=_term_key):
            if cls not in _event_candidates(graph, term):
                violations.append(
                    AxiomViolation(
                        axiom,
                        Triple(term, RDF_TYPE, cls),
                        f"{format_term(term)} is typed {cls} but its dependency "
                        f"edges rule that out",
                    )
                )
    return violations


def _check_objective_nodes(graph: TripleGraph) -> list[AxiomViolation]:
    """A48: an ObjNode is a Node that is the target of at least one dependsOn
    edge and the source of none (the terminal node of the dependency DAG)."""
    violations = []
    for term in sorted(graph.individuals_of("ObjNode"), key=_term_key):
        is_node = graph.has_type(term, "Node")
        incoming = any(
            t.predicate == "dependsOn" and t.object == term for t in graph.triples
        )
        outgoing = any(
            t.predicate == "dependsOn" and t.subject == term for t in graph.triples
        )
        if not (is_node and incoming and not outgoing):
            violations.append(
                AxiomViolation(
                    "A48",
                    Triple(term, RDF_TYPE, "ObjNode"),
                    f"{format_term(term)} must be a Node with incoming and no "
                    f"outgoing dependsOn edges",
                )
            )
    return violations


def classify_goals(graph: TripleGraph) -> dict[Term, str]:
    """Partition Goal individuals: SupportGoal iff the goal supports
    something, TopLevelGoal otherwise."""
    result = {}
    for goal in graph.individuals_of("Goal"):
        supports_something = any(
            t.predicate == "supports" and t.subject == goal for t in graph.triples
        )
        result[goal] = "SupportGoal" if supports_something else "TopLevelGoal"
    return result


def attach_confidence(
    graph: TripleGraph, solution_id: str, objective_node_id: str, value: float
) -> TripleGraph:
    """Record a computed confidence value at a GSN solution's claim point."""
    if not graph.has_type(solution_id, "Solution"):
        raise TypeViolation(f"{solution_id!r} is not typed Solution")
    if not graph.has_type(objective_node_id, "ObjNode"):
        raise TypeViolation(f"{objective_node_id!r} is not typed ObjNode")
    if not 0.0 <= value <= 1.0:
        raise TypeViolation(f"confidence {value!r} is outside [0, 1]")
    graph = assert_triple(graph, Triple(solution_id, "hasConfidence", objective_node_id))
    graph = assert_triple(graph, Triple(objective_node_id, "hasACP", Literal(value)))
    return graph


# ---------------------------------------------------------------------------
# Line format

_IDENT_FORBIDDEN = set(' \t\n"')
# Identifiers must not look like numbers; numeric tokens round-trip unquoted.
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def format_term(term: Term) -> str:
    if isinstance(term, Literal):
        if isinstance(term.value, (int, float)):
            return repr(float(term.value))
        escaped = term.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    return term


def _parse_term(token: str, line_no: int) -> Term:
    if token.startswith('"'):
        if not token.endswith('"') or len(token) < 2:
            raise ParseError(f"unterminated literal {token!r}", line_no)
        body = token[1:-1]
        out, i = [], 0
        while i < len(body):
            ch = body[i]
            if ch == "\\":
                if i + 1 >= len(body):
                    raise ParseError(f"dangling escape in {token!r}", line_no)
                nxt = body[i + 1]
                out.append({"n": "\n", '"': '"', "\\": "\\"}.get(nxt, nxt))
                i += 2
            else:
                out.append(ch)
                i += 1
        return Literal("".join(out))
    if _NUMBER_RE.match(token):
        return Literal(float(token))
    if any(c in _IDENT_FORBIDDEN for c in token):
        raise ParseError(f"bad identifier {token!r}", line_no)
    return token


def parse_term(token: str) -> Term:
    """Parse one standalone term token (for query patterns and the like)."""
    return _parse_term(token, 0)


def _split_terms(line: str, line_no: int) -> list[str]:
    tokens, i, n = [], 0, len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        if line[i] == '"':
            j = i + 1
            while j < n:
                if line[j] == "\\":
                    j += 2
                    continue
                if line[j] == '"':
                    break
                j += 1
            if j >= n:
                raise ParseError("unterminated string literal", line_no)
            tokens.append(line[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not line[j].isspace():
                j += 1
            tokens.append(line[i:j])
            i = j
    return tokens


def export_graph(graph: TripleGraph) -> str:
    """Canonical serialization: one sorted `subject predicate object .` line
    per triple. Equal triple sets export byte-identical text."""
    lines = []
    for t in sorted(graph.triples, key=_sort_key):
        lines.append(
            f"{format_term(t.subject)} {t.predicate} {format_term(t.object)} ."
        )
    return "\n".join(lines) + ("\n" if lines else "")


def import_graph(text: str, extension_predicates: Iterable[str] = ()) -> TripleGraph:
    """Inverse of :func:`export_graph`; raises ParseError with a line number.

    Triples are loaded verbatim (no materialization on import), so a
    hand-written file missing its inverse supports facts will fail the A28
    check rather than being silently repaired.
    """
    extensions = frozenset(extension_predicates)
    triples = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _split_terms(line, line_no)
        if len(tokens) != 4 or tokens[-1] != ".":
            raise ParseError("expected `subject predicate object .`", line_no)
        subject = _parse_term(tokens[0], line_no)
        predicate = tokens[1]
        if predicate not in VOCABULARY | extensions:
            raise ParseError(f"unknown predicate {predicate!r}", line_no)
        obj = _parse_term(tokens[2], line_no)
        triples.add(Triple(subject, predicate, obj))
    return TripleGraph(frozenset(triples), extensions)


def load_graph(path, extension_predicates: Iterable[str] = ()) -> TripleGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return import_graph(fh.read(), extension_predicates)


def save_graph(graph: TripleGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(export_graph(graph))
