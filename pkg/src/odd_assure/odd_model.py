"""ODD specification model: class hierarchy, interval-bounded attributes,
and discretization of raw sensor readings.

An ODD (operational design domain) spec is a tree of classes. A leaf class
describes one measurable operating condition (rain intensity, fog visibility,
ego speed, ...) whose value range is carved into named attributes, each
bounded by an interval in the half-open bracket notation `[0.25, 0.77[`.
Discretizing a reading returns the attribute whose interval contains it, or
``OUT_OF_ODD`` when no interval does. Leaving the ODD is a first-class
result, not an error: the runtime monitor acts on it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union


class OddModelError(Exception):
    """Base class for ODD spec errors."""


class DocumentError(OddModelError):
    """The document is structurally unreadable (not a schema-shaped object)."""


class MalformedInterval(OddModelError):
    """Interval text does not match the bracket grammar."""


class EmptyInterval(OddModelError):
    """Interval bounds admit no value."""


class DuplicateName(OddModelError):
    pass


class UnknownParent(OddModelError):
    pass


class MalformedHierarchy(OddModelError):
    """Class parent links do not form a single-rooted tree."""


class OverlappingIntervals(OddModelError):
    pass


class EmptyClass(OddModelError):
    """A leaf class declares no attributes, so nothing can be discretized."""


class UnknownClass(OddModelError):
    pass


class AmbiguousState(OddModelError):
    """A value falls inside more than one attribute interval of a class."""


class OutOfOdd:
    """Singleton marker: a reading lies outside every interval of its class."""

    _instance = None

    def __new__(cls) -> "OutOfOdd":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OutOfOdd"


OUT_OF_ODD = OutOfOdd()

#: A discretization result: an attribute name, or the out-of-ODD marker.
State = Union[str, OutOfOdd]


@dataclass(frozen=True)
class Interval:
    """A real interval with independently open or closed endpoints.

    Unbounded sides are stored as ``-inf`` / ``+inf`` and are always
    exclusive. A degenerate point interval (``lo == hi``) is allowed only
    when both endpoints are inclusive.
    """

    lo: float
    hi: float
    lo_inclusive: bool
    hi_inclusive: bool

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise MalformedInterval("interval bounds must not be NaN")
        if math.isinf(self.lo) and self.lo_inclusive:
            raise MalformedInterval("an unbounded low endpoint cannot be inclusive")
        if math.isinf(self.hi) and self.hi_inclusive:
            raise MalformedInterval("an unbounded high endpoint cannot be inclusive")
        if self.lo > self.hi:
            raise EmptyInterval(f"lo {self.lo} exceeds hi {self.hi}")
        if self.lo == self.hi and not (self.lo_inclusive and self.hi_inclusive):
            raise EmptyInterval(
                f"point interval at {self.lo} requires both endpoints inclusive"
            )

    def contains(self, value: float) -> bool:
        """Exact membership test; boundary comparisons carry no epsilon."""
        if self.lo_inclusive:
            above = value >= self.lo
        else:
            above = value > self.lo
        if self.hi_inclusive:
            below = value <= self.hi
        else:
            below = value < self.hi
        return above and below

    def overlaps(self, other: "Interval") -> bool:
        """True when some value lies in both intervals."""
        lo_ok = self.lo < other.hi or (
            self.lo == other.hi and self.lo_inclusive and other.hi_inclusive
        )
        hi_ok = other.lo < self.hi or (
            other.lo == self.hi and other.lo_inclusive and self.hi_inclusive
        )
        return lo_ok and hi_ok


_INTERVAL_RE = re.compile(r"^([\[\](])([^,]+),([^,]+)([\[\])])$")


def _format_bound(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def parse_interval(text: str) -> Interval:
    """Parse bracket notation like ``[0.25, 0.77[`` into an :class:`Interval`.

    Bracket orientation encodes inclusivity: ``[a`` includes the low bound,
    ``a]`` includes the high bound, and the flipped forms exclude it. The
    ASCII spellings ``(a, b)`` are accepted as synonyms of ``]a, b[``.
    ``+`` as the high token means unbounded above, ``-`` as the low token
    unbounded below; an unbounded side must use an exclusive bracket.
    """
    compact = "".join(text.split())
    m = _INTERVAL_RE.match(compact)
    if m is None:
        raise MalformedInterval(f"not an interval: {text!r}")
    open_b, lo_tok, hi_tok, close_b = m.groups()
    lo_inclusive = open_b == "["
    hi_inclusive = close_b == "]"

    if lo_tok == "-":
        lo = -math.inf
    else:
        try:
            lo = float(lo_tok)
        except ValueError:
            raise MalformedInterval(f"bad low bound in {text!r}") from None
        if math.isinf(lo) or math.isnan(lo):
            raise MalformedInterval(f"bad low bound in {text!r}")
    if hi_tok == "+":
        hi = math.inf
    else:
        try:
            hi = float(hi_tok)
        except ValueError:
            raise MalformedInterval(f"bad high bound in {text!r}") from None
        if math.isinf(hi) or math.isnan(hi):
            raise MalformedInterval(f"bad high bound in {text!r}")

    return Interval(lo, hi, lo_inclusive, hi_inclusive)


def format_interval(interval: Interval) -> str:
    """Render an interval back to the bracket grammar accepted by
    :func:`parse_interval` (half-open spelling, never the paren form)."""
    open_b = "[" if interval.lo_inclusive else "]"
    close_b = "]" if interval.hi_inclusive else "["
    lo = "-" if math.isinf(interval.lo) else _format_bound(interval.lo)
    hi = "+" if math.isinf(interval.hi) else _format_bound(interval.hi)
    return f"{open_b}{lo}, {hi}{close_b}"


@dataclass(frozen=True)
class OddAttribute:
    """A named state of an ODD class, e.g. ``Rain_Moderate`` with its bounds."""

    name: str
    unit: str
    bounds: Interval


@dataclass(frozen=True)
class OddClass:
    name: str
    parent: str | None
    attributes: tuple[OddAttribute, ...]
    partition: bool = False


@dataclass(frozen=True)
class OddSpec:
    """Fully linked ODD specification. Immutable after parsing; all
    operations on it are pure and safe for concurrent readers."""

    root: str
    classes: dict[str, OddClass]

    def children(self, name: str) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes.values() if c.parent == name)

    def is_leaf(self, name: str) -> bool:
        return not self.children(name)

    def leaf_classes(self) -> tuple[str, ...]:
        return tuple(n for n in self.classes if self.is_leaf(n))


@dataclass(frozen=True)
class Observation:
    """One timestamped environment sample.

    ``readings`` maps leaf class names to raw measurements. The (x, y)
    location is carried for reporting but not interpreted.
    """

    time: float
    x: float
    y: float
    readings: Mapping[str, float]


@dataclass(frozen=True)
class OddDefect:
    kind: str
    class_name: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}({self.class_name}): {self.detail}"


@dataclass(frozen=True)
class Interpretation:
    """Per-class discretization of an observation.

    ``states`` holds the successful entries (attribute name or OUT_OF_ODD);
    entries that raised are collected in ``errors`` instead of aborting the
    whole observation.
    """

    states: dict[str, State] = field(default_factory=dict)
    errors: dict[str, OddModelError] = field(default_factory=dict)


def _overlap_witness(a: Interval, b: Interval) -> float:
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if a.contains(lo) and b.contains(lo):
        return lo
    return (lo + hi) / 2.0


def parse_odd_spec(document: Union[str, dict]) -> OddSpec:
    """Parse and validate an ODD spec document (JSON text or parsed object).

    The document schema is ``{"classes": [{name, parent, partition,
    attributes: [{name, unit, interval}]}]}`` with intervals in the string
    grammar of :func:`parse_interval`. Validation enforces unique names, a
    single-rooted parent tree, non-empty leaf classes, and pairwise disjoint
    intervals for classes flagged ``partition: true``.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("classes"), list):
        raise DocumentError("document must be an object with a 'classes' list")

    classes: dict[str, OddClass] = {}
    for entry in document["classes"]:
        if not isinstance(entry, dict) or "name" not in entry:
            raise DocumentError(f"class entry missing 'name': {entry!r}")
        name = entry["name"]
        if name in classes:
            raise DuplicateName(f"class {name!r} declared twice")
        attrs = []
        seen_attrs = set()
        for attr in entry.get("attributes", []):
            if not isinstance(attr, dict) or not {"name", "unit", "interval"} <= attr.keys():
                raise DocumentError(f"attribute entry needs name/unit/interval: {attr!r}")
            if attr["name"] in seen_attrs:
                raise DuplicateName(f"attribute {attr['name']!r} declared twice in {name!r}")
            seen_attrs.add(attr["name"])
            attrs.append(
                OddAttribute(attr["name"], attr["unit"], parse_interval(attr["interval"]))
            )
        classes[name] = OddClass(
            name=name,
            parent=entry.get("parent"),
            attributes=tuple(attrs),
            partition=bool(entry.get("partition", False)),
        )

    roots = [c.name for c in classes.values() if c.parent is None]
    if len(roots) != 1:
        raise MalformedHierarchy(f"expected exactly one root class, found {roots}")
    for cls in classes.values():
        if cls.parent is not None and cls.parent not in classes:
            raise UnknownParent(f"class {cls.name!r} names unknown parent {cls.parent!r}")

    # Walking parent links from every class must reach the root without
    # revisiting a node; anything else is a cycle or a detached subtree.
    root = roots[0]
    for cls in classes.values():
        seen = {cls.name}
        cur = cls.parent
        while cur is not None:
            if cur in seen:
                raise MalformedHierarchy(f"cycle in parent links at {cur!r}")
            seen.add(cur)
            cur = classes[cur].parent
        if root not in seen and cls.name != root:
            raise MalformedHierarchy(f"class {cls.name!r} not attached to root {root!r}")

    spec = OddSpec(root=root, classes=classes)
    for cls in classes.values():
        if spec.is_leaf(cls.name) and not cls.attributes:
            raise EmptyClass(f"leaf class {cls.name!r} has no attributes")
        if cls.partition:
            for defect in _class_overlaps(cls):
                raise OverlappingIntervals(str(defect))
    return spec


def _class_overlaps(cls: OddClass) -> list[OddDefect]:
    defects = []
    for i, a in enumerate(cls.attributes):
        for b in cls.attributes[i + 1 :]:
            if a.bounds.overlaps(b.bounds):
                witness = _overlap_witness(a.bounds, b.bounds)
                defects.append(
                    OddDefect(
                        "OverlappingIntervals",
                        cls.name,
                        f"{a.name} and {b.name} both contain {witness:g}",
                    )
                )
    return defects


def validate_odd(spec: OddSpec) -> list[OddDefect]:
    """Report interval overlaps in every class, partition-flagged or not.

    Partition classes are already rejected at parse time; running this on a
    parsed spec surfaces overlaps an author left in non-partition classes
    (e.g. two states sharing a boundary point).
    """
    defects: list[OddDefect] = []
    for cls in spec.classes.values():
        defects.extend(_class_overlaps(cls))
    return defects


def discretize(spec: OddSpec, class_name: str, value: float) -> State:
    """Map a raw value onto the attribute of ``class_name`` containing it.

    Returns OUT_OF_ODD when no interval contains the value. Raises
    AmbiguousState when more than one does, which signals a defect in a
    non-partition class rather than a property of the value.
    """
    cls = spec.classes.get(class_name)
    if cls is None:
        raise UnknownClass(f"no ODD class named {class_name!r}")
    if not cls.attributes:
        raise EmptyClass(f"class {class_name!r} has no attributes to discretize against")
    matches = [a.name for a in cls.attributes if a.bounds.contains(value)]
    if not matches:
        return OUT_OF_ODD
    if len(matches) > 1:
        raise AmbiguousState(
            f"value {value!r} falls in {matches} of class {class_name!r}"
        )
    return matches[0]


def interpret(spec: OddSpec, obs: Observation) -> Interpretation:
    """Discretize every reading of an observation, collecting per-entry errors."""
    states: dict[str, State] = {}
    errors: dict[str, OddModelError] = {}
    for class_name in sorted(obs.readings):
        try:
            states[class_name] = discretize(spec, class_name, obs.readings[class_name])
        except OddModelError as exc:
            errors[class_name] = exc
    return Interpretation(states=states, errors=errors)


def in_odd(spec: OddSpec, obs: Observation) -> bool:
    """True iff no reading of the observation discretizes to OUT_OF_ODD.

    Entries that raise (unknown class, ambiguous state) are authoring
    defects, not ODD exits; they do not flip the flag.
    """
    interp = interpret(spec, obs)
    return not any(state is OUT_OF_ODD for state in interp.states.values())


def odd_spec_to_document(spec: OddSpec) -> dict:
    """Serialize back to the document schema; inverse of :func:`parse_odd_spec`."""
    classes = []
    for cls in spec.classes.values():
        classes.append(
            {
                "name": cls.name,
                "parent": cls.parent,
                "partition": cls.partition,
                "attributes": [
                    {"name": a.name, "unit": a.unit, "interval": format_interval(a.bounds)}
                    for a in cls.attributes
                ],
            }
        )
    return {"classes": classes}


def load_odd_spec(path) -> OddSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_odd_spec(fh.read())


def save_odd_spec(spec: OddSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(odd_spec_to_document(spec), fh, indent=2)
        fh.write("\n")
