"""In-memory knowledge graphs of provenance-carrying triples.

A graph holds <subject, predicate, object> triples where objects are either
entities or literals. Every triple records where it came from (provider note
span, knowledge-base record, chat turn, ...) and a confidence. Graphs support
fixed-pattern path queries and same_as bridging between a patient graph and
an external knowledge base.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
import threading
from dataclasses import dataclass, field

NAMESPACES = ("patient", "kb", "note", "sys")

_LOCAL_RE = re.compile(r"^[a-z0-9][a-z0-9_.\-]*$")
_ENTITY_RE = re.compile(r"^(patient|kb|note|sys):[a-z0-9][a-z0-9_.\-]*$")
_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?$")
_UNIT_NUMBER_RE = re.compile(r"^(-?\d+(?:\.\d+)?)\s+([A-Za-z%/]+)$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

WILDCARD = "*"


class KnowledgeGraphError(Exception):
    """Base error for graph operations."""


class InvalidTriple(KnowledgeGraphError):
    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"invalid triple field '{field_name}': {message}")


class UnknownEntity(KnowledgeGraphError):
    def __init__(self, entity: "EntityId"):
        self.entity = entity
        super().__init__(f"entity not in graph: {entity}")


class DanglingLink(KnowledgeGraphError):
    def __init__(self, link_id: str, endpoint: "EntityId"):
        self.link_id = link_id
        self.endpoint = endpoint
        super().__init__(f"link {link_id}: endpoint {endpoint} missing from graph")


@dataclass(frozen=True, order=True)
class EntityId:
    """Canonical entity identifier, `namespace:local`."""

    namespace: str
    local: str

    def __post_init__(self):
        if self.namespace not in NAMESPACES:
            raise InvalidTriple("namespace", f"unknown namespace {self.namespace!r}")
        if not _LOCAL_RE.match(self.local):
            raise InvalidTriple(
                "local", f"{self.local!r} must be a non-empty lowercase token"
            )

    def __str__(self) -> str:
        return f"{self.namespace}:{self.local}"

    @classmethod
    def parse(cls, text: str) -> "EntityId":
        ns, sep, local = text.partition(":")
        if not sep:
            raise InvalidTriple("entity", f"{text!r} is not of the form namespace:local")
        return cls(ns, local)


def entity(text: "str | EntityId") -> EntityId:
    """Coerce a `namespace:local` string (or pass through an EntityId)."""
    if isinstance(text, EntityId):
        return text
    return EntityId.parse(text)


@dataclass(frozen=True)
class Literal:
    """Typed literal object value: string, number (optionally with unit), or date."""

    value: "str | int | float | _dt.date"
    unit: str | None = None

    @property
    def kind(self) -> str:
        if isinstance(self.value, _dt.date):
            return "date"
        if isinstance(self.value, (int, float)) and not isinstance(self.value, bool):
            return "number"
        return "string"

    def __str__(self) -> str:
        if self.kind == "date":
            return self.value.isoformat()
        if self.kind == "number":
            return f"{self.value} {self.unit}" if self.unit else str(self.value)
        return json.dumps(self.value)


@dataclass(frozen=True)
class Provenance:
    """Origin of a triple. `kind` selects which of the optional fields apply."""

    kind: str
    note_id: str | None = None
    span: tuple[int, int] | None = None
    kb_id: str | None = None
    record_id: str | None = None
    session_id: str | None = None
    message_id: str | None = None
    link_id: str | None = None

    KINDS = ("provider_note", "knowledge_base", "chat_turn", "integration", "self_report")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidTriple("provenance", f"unknown provenance kind {self.kind!r}")
        if self.kind == "provider_note":
            if self.note_id is None or self.span is None:
                raise InvalidTriple("provenance", "provider_note needs note_id and span")
            lo, hi = self.span
            if not (0 <= lo <= hi):
                raise InvalidTriple("provenance", f"bad char span {self.span}")

    @classmethod
    def provider_note(cls, note_id: str, span: tuple[int, int]) -> "Provenance":
        return cls("provider_note", note_id=note_id, span=(int(span[0]), int(span[1])))

    @classmethod
    def knowledge_base(cls, kb_id: str, record_id: str) -> "Provenance":
        return cls("knowledge_base", kb_id=kb_id, record_id=record_id)

    @classmethod
    def chat_turn(cls, session_id: str, message_id: str) -> "Provenance":
        return cls("chat_turn", session_id=session_id, message_id=message_id)

    @classmethod
    def integration(cls, link_id: str) -> "Provenance":
        return cls("integration", link_id=link_id)

    @classmethod
    def self_report(cls, session_id: str, message_id: str) -> "Provenance":
        return cls("self_report", session_id=session_id, message_id=message_id)

    def to_json(self) -> dict:
        out = {"source": self.kind}
        for key in ("note_id", "kb_id", "record_id", "session_id", "message_id", "link_id"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.span is not None:
            out["span"] = list(self.span)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Provenance":
        fields = dict(data)
        kind = fields.pop("source")
        span = fields.pop("span", None)
        if span is not None:
            fields["span"] = (int(span[0]), int(span[1]))
        return cls(kind, **fields)

    def sort_key(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class Triple:
    subject: EntityId
    predicate: str
    object: "EntityId | Literal"
    confidence: float = 1.0
    provenance: Provenance = None  # type: ignore[assignment]

    def __post_init__(self):
        if not isinstance(self.subject, EntityId):
            raise InvalidTriple("subject", "subject must be an EntityId")
        if not self.predicate or not _LOCAL_RE.match(self.predicate):
            raise InvalidTriple("predicate", f"{self.predicate!r} must be a lowercase token")
        if not isinstance(self.object, (EntityId, Literal)):
            raise InvalidTriple("object", "object must be an EntityId or Literal")
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidTriple("confidence", f"{self.confidence} outside [0, 1]")
        if not isinstance(self.provenance, Provenance):
            raise InvalidTriple("provenance", "provenance is required")

    @property
    def key(self) -> tuple:
        """Duplicate identity: same (s, p, o, provenance); confidence is not identity."""
        return (self.subject, self.predicate, self.object, self.provenance)

    def to_json(self) -> dict:
        obj: dict = {"entity": str(self.object)} if isinstance(self.object, EntityId) else {
            "literal": format_object(self.object)
        }
        return {
            "subject": str(self.subject),
            "predicate": self.predicate,
            "object": obj,
            "confidence": self.confidence,
            "provenance": self.provenance.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Triple":
        obj = data["object"]
        if "entity" in obj:
            o: EntityId | Literal = entity(obj["entity"])
        else:
            o = parse_object(obj["literal"])
            if isinstance(o, EntityId):  # defensive: literal field must stay literal
                o = Literal(str(o))
        return cls(
            subject=entity(data["subject"]),
            predicate=data["predicate"],
            object=o,
            confidence=float(data["confidence"]),
            provenance=Provenance.from_json(data["provenance"]),
        )


@dataclass(frozen=True)
class Path:
    """Simple (acyclic) path: nodes[i] -edges[i]-> nodes[i+1]."""

    nodes: tuple[EntityId, ...]
    edges: tuple[Triple, ...]

    def __post_init__(self):
        if len(self.nodes) < 1 or len(self.edges) != len(self.nodes) - 1:
            raise ValueError("path shape: need len(edges) == len(nodes) - 1 >= 0")
        for i, edge in enumerate(self.edges):
            if edge.subject != self.nodes[i] or edge.object != self.nodes[i + 1]:
                raise ValueError(f"edge {i} does not connect nodes {i} -> {i + 1}")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path repeats a node")

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def predicates(self) -> tuple[str, ...]:
        return tuple(e.predicate for e in self.edges)

    def replays_against(self, graph: "KnowledgeGraph") -> bool:
        """True when every edge is present verbatim in the graph."""
        return all(e.key in graph._triples for e in self.edges)

    def to_json(self) -> dict:
        return {
            "nodes": [str(n) for n in self.nodes],
            "edges": [
                {"subject": str(e.subject), "predicate": e.predicate, "object": str(e.object)}
                for e in self.edges
            ],
        }

    def sort_key(self) -> tuple:
        return (
            len(self.edges),
            tuple(str(n) for n in self.nodes),
            self.predicates,
            tuple(e.provenance.sort_key() for e in self.edges),
        )


@dataclass
class MergeReport:
    added: int = 0
    skipped: int = 0


class KnowledgeGraph:
    """Named triple store with an adjacency index over entity objects.

    Mutations are serialized through an internal lock (single writer); reads
    are plain dict lookups and may run concurrently between mutations.
    """

    def __init__(self, graph_id: str):
        self.graph_id = graph_id
        self._triples: dict[tuple, Triple] = {}
        self._out: dict[EntityId, list[Triple]] = {}
        self._nodes: set[EntityId] = set()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t.key in self._triples

    def triples(self) -> list[Triple]:
        return list(self._triples.values())

    def nodes(self) -> set[EntityId]:
        return set(self._nodes)

    def has_entity(self, e: EntityId) -> bool:
        return e in self._nodes

    def outgoing(self, e: EntityId) -> list[Triple]:
        return list(self._out.get(e, ()))

    def objects(self, subject: EntityId, predicate: str) -> list["EntityId | Literal"]:
        return [t.object for t in self._out.get(subject, ()) if t.predicate == predicate]

    def add_triple(self, t: Triple) -> bool:
        """Insert `t`; returns False (and leaves the graph unchanged) on duplicate."""
        with self._lock:
            if t.key in self._triples:
                return False
            self._triples[t.key] = t
            self._nodes.add(t.subject)
            self._out.setdefault(t.subject, []).append(t)
            if isinstance(t.object, EntityId):
                self._nodes.add(t.object)
            return True

    def copy(self, graph_id: str | None = None) -> "KnowledgeGraph":
        out = KnowledgeGraph(graph_id or self.graph_id)
        for t in self._triples.values():
            out.add_triple(t)
        return out

    def content_key(self) -> frozenset:
        """Order-free identity of the triple set (for before/after comparisons)."""
        return frozenset(self._triples)


def find_paths(
    graph: KnowledgeGraph,
    start: EntityId,
    predicate_pattern: "list[str] | tuple[str, ...]",
    end: "EntityId | str",
    max_len: int = 6,
) -> list[Path]:
    """All simple paths from `start` matching the predicate pattern position-wise.

    The pattern fixes the path length: edge i must carry predicate pattern[i]
    (`*` matches any predicate). `end` is an EntityId or the wildcard `*`.
    Results are fully ordered: length, node-id sequence, predicates, provenance.
    """
    if not (1 <= max_len <= 6):
        raise ValueError(f"max_len {max_len} outside [1, 6]")
    pattern = tuple(predicate_pattern)
    if not pattern:
        raise ValueError("predicate pattern must be non-empty")
    if len(pattern) > max_len:
        raise ValueError(f"pattern length {len(pattern)} exceeds max_len {max_len}")
    if not graph.has_entity(start):
        raise UnknownEntity(start)
    end_entity = None if end == WILDCARD else entity(end)

    found: list[Path] = []

    def walk(node: EntityId, depth: int, nodes: list[EntityId], edges: list[Triple]):
        if depth == len(pattern):
            if end_entity is None or node == end_entity:
                found.append(Path(tuple(nodes), tuple(edges)))
            return
        want = pattern[depth]
        for t in graph.outgoing(node):
            if want != WILDCARD and t.predicate != want:
                continue
            if not isinstance(t.object, EntityId):
                continue
            if t.object in nodes:
                continue  # simple paths only
            nodes.append(t.object)
            edges.append(t)
            walk(t.object, depth + 1, nodes, edges)
            nodes.pop()
            edges.pop()

    walk(start, 0, [start], [])
    found.sort(key=Path.sort_key)
    return found


def merge_into(
    patient_kg: KnowledgeGraph, kb: KnowledgeGraph, links: "list"
) -> MergeReport:
    """Bridge accepted entity links into the patient graph as same_as triples.

    The KB is never mutated. Each link adds
    (link.source, same_as, link.target) with integration provenance; a bridge
    already present counts as skipped.
    """
    report = MergeReport()
    for link in links:
        if not patient_kg.has_entity(link.source):
            raise DanglingLink(link.link_id, link.source)
        if not kb.has_entity(link.target):
            raise DanglingLink(link.link_id, link.target)
        bridge = Triple(
            subject=link.source,
            predicate="same_as",
            object=link.target,
            confidence=link.score,
            provenance=Provenance.integration(link.link_id),
        )
        if patient_kg.add_triple(bridge):
            report.added += 1
        else:
            report.skipped += 1
    return report


def union(graph_id: str, *graphs: KnowledgeGraph) -> KnowledgeGraph:
    """New graph holding every triple of the inputs (first occurrence wins on dupes)."""
    out = KnowledgeGraph(graph_id)
    for g in graphs:
        for t in g.triples():
            out.add_triple(t)
    return out


# --- TSV snapshot format ----------------------------------------------------
# One triple per line: subject TAB predicate TAB object TAB confidence TAB
# provenance-json. `#` lines are comments. Objects: `ns:local` is an entity;
# `"..."` a string literal; bare numbers are numbers, `50 mg` a number with
# unit, `2026-01-15` a date; anything else is an unquoted string literal.


def format_object(o: "EntityId | Literal") -> str:
    return str(o)


def parse_object(text: str) -> "EntityId | Literal":
    if _ENTITY_RE.match(text):
        return EntityId.parse(text)
    if text.startswith('"'):
        return Literal(json.loads(text))
    if _NUMBER_RE.match(text):
        return Literal(int(text) if "." not in text else float(text))
    m = _UNIT_NUMBER_RE.match(text)
    if m:
        num = m.group(1)
        return Literal(int(num) if "." not in num else float(num), unit=m.group(2))
    if _DATE_RE.match(text):
        return Literal(_dt.date.fromisoformat(text))
    return Literal(text)


def to_tsv(graph: KnowledgeGraph) -> str:
    lines = [f"# graph: {graph.graph_id}"]
    for t in sorted(
        graph.triples(),
        key=lambda t: (str(t.subject), t.predicate, format_object(t.object), t.provenance.sort_key()),
    ):
        lines.append(
            "\t".join(
                [
                    str(t.subject),
                    t.predicate,
                    format_object(t.object),
                    repr(t.confidence) if isinstance(t.confidence, float) else str(t.confidence),
                    json.dumps(t.provenance.to_json(), sort_keys=True),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def from_tsv(text: str, graph_id: str) -> KnowledgeGraph:
    graph = KnowledgeGraph(graph_id)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise KnowledgeGraphError(f"line {lineno}: expected 5 tab-separated fields, got {len(parts)}")
        subject, predicate, obj, confidence, prov = parts
        graph.add_triple(
            Triple(
                subject=entity(subject),
                predicate=predicate,
                object=parse_object(obj),
                confidence=float(confidence),
                provenance=Provenance.from_json(json.loads(prov)),
            )
        )
    return graph
