"""Rule-pattern triple extraction from provider notes.

Extraction is deterministic: a pattern pack (JSON) of regexes with named
capture groups, each paired with triple templates. Template terms are either
`$patient`, `$<group>` (captured text normalized into a `kb:` entity),
`$<group>:num` (numeric literal), `$<group>:str` (verbatim string literal),
or a bare constant. The extractor is the pluggable bootstrap source for the
patient knowledge graph; a learned extractor can replace it behind the same
call shape.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from alleviate.kg import EntityId, KnowledgeGraph, Literal, Provenance, Triple

EXTRACTION_CONFIDENCE = 1.0  # provider notes are authoritative

_NORMALIZE_DROP = re.compile(r"[^a-z0-9_.\-]")
_WS_RUN = re.compile(r"\s+")


class PatternCompileError(Exception):
    def __init__(self, pattern_id: str, message: str):
        self.pattern_id = pattern_id
        super().__init__(f"pattern {pattern_id!r}: {message}")


@dataclass(frozen=True)
class ProviderNote:
    note_id: str
    patient_id: EntityId
    text: str
    authored_at: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValueError("note text must be non-empty")


@dataclass(frozen=True)
class Recommendation:
    activity: EntityId
    target_count: int
    period: str = "week"
    source: Provenance | None = None

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")


@dataclass
class ExtractionPattern:
    pattern_id: str
    matcher: str
    templates: list[tuple[str, str, str]]
    priority: int = 0
    _compiled: re.Pattern = field(init=False, repr=False)

    def __post_init__(self):
        if self.priority < 0:
            raise PatternCompileError(self.pattern_id, "priority must be >= 0")
        try:
            self._compiled = re.compile(self.matcher)
        except re.error as exc:
            raise PatternCompileError(self.pattern_id, str(exc)) from exc
        groups = set(self._compiled.groupindex)
        for template in self.templates:
            if len(template) != 3:
                raise PatternCompileError(self.pattern_id, f"template {template!r} is not a triple")
            for term in (template[0], template[2]):
                name = _placeholder_name(term)
                if name is not None and name != "patient" and name not in groups:
                    raise PatternCompileError(
                        self.pattern_id, f"placeholder ${name} is not a capture group"
                    )

    @classmethod
    def from_json(cls, data: dict) -> "ExtractionPattern":
        return cls(
            pattern_id=data["pattern_id"],
            matcher=data["matcher"],
            templates=[tuple(t) for t in data["templates"]],
            priority=int(data.get("priority", 0)),
        )


def load_pattern_pack(text: str) -> list[ExtractionPattern]:
    return [ExtractionPattern.from_json(item) for item in json.loads(text)]


def _placeholder_name(term: str) -> str | None:
    if not term.startswith("$"):
        return None
    return term[1:].split(":", 1)[0]


def normalize_entity_text(text: str) -> str:
    """lowercase, whitespace runs -> `_`, strip anything non-token."""
    lowered = _WS_RUN.sub("_", text.strip().lower())
    return _NORMALIZE_DROP.sub("", lowered).strip("_.-")


def _resolve_term(term: str, match: re.Match, patient_id: EntityId):
    """Entity or Literal for one template slot; None when normalization
    leaves nothing usable (the triple is skipped)."""
    if term == "$patient":
        return patient_id
    if term.startswith("$"):
        name, _, kind = term[1:].partition(":")
        raw = match.group(name)
        if raw is None:
            return None
        if kind == "num":
            try:
                value = float(raw)
            except ValueError:
                return None
            return Literal(int(value) if value.is_integer() else value)
        if kind == "str":
            return Literal(raw)
        local = normalize_entity_text(raw)
        return EntityId("kb", local) if local else None
    local = normalize_entity_text(term)
    return EntityId("kb", local) if local else None


def extract_triples(
    note: ProviderNote,
    patterns: list[ExtractionPattern],
    provenance_for=None,
) -> list[Triple]:
    """Instantiated triples for every pattern match in the note.

    Matches are non-overlapping within one pattern (regex scan order) and
    patterns run independently. Output order: match start asc, pattern
    priority asc, then pattern id and template order. `provenance_for`
    overrides the span -> Provenance mapping (chat turns reuse this pack
    with chat_turn provenance).
    """
    if provenance_for is None:
        provenance_for = lambda span: Provenance.provider_note(note.note_id, span)

    hits = []
    for pattern in patterns:
        for match in pattern._compiled.finditer(note.text):
            hits.append((match.start(), pattern.priority, pattern.pattern_id, pattern, match))
    hits.sort(key=lambda h: (h[0], h[1], h[2]))

    out: list[Triple] = []
    for start, _, _, pattern, match in hits:
        span = (match.start(), match.end())
        for subject_term, predicate, object_term in pattern.templates:
            subject = _resolve_term(subject_term, match, note.patient_id)
            obj = _resolve_term(object_term, match, note.patient_id)
            if subject is None or obj is None or isinstance(subject, Literal):
                continue
            out.append(
                Triple(
                    subject=subject,
                    predicate=predicate,
                    object=obj,
                    confidence=EXTRACTION_CONFIDENCE,
                    provenance=provenance_for(span),
                )
            )
    return out


def bootstrap_patient_kg(
    patient_id: EntityId,
    notes: list[ProviderNote],
    patterns: list[ExtractionPattern],
) -> KnowledgeGraph:
    """New graph named after the patient, holding the union of all note extractions."""
    for note in notes:
        if note.patient_id != patient_id:
            raise ValueError(f"note {note.note_id} belongs to {note.patient_id}, not {patient_id}")
    graph = KnowledgeGraph(str(patient_id))
    for note in notes:
        for triple in extract_triples(note, patterns):
            graph.add_triple(triple)
    return graph


def extract_recommendations(
    graph: KnowledgeGraph, patient_id: EntityId
) -> tuple[list[Recommendation], list[str]]:
    """Pair (patient, recommended_activity, A) with (A, frequency_per_week, n).

    Activities missing a frequency are skipped with a warning; conflicting
    frequencies warn and keep the lowest value. Sorted by activity id.
    """
    warnings: list[str] = []
    recommendations: list[Recommendation] = []
    activity_triples = [
        t for t in graph.outgoing(patient_id) if t.predicate == "recommended_activity"
    ]
    seen: set[EntityId] = set()
    for t in sorted(activity_triples, key=lambda t: str(t.object)):
        activity = t.object
        if not isinstance(activity, EntityId) or activity in seen:
            continue
        seen.add(activity)
        counts = sorted(
            {
                int(o.value)
                for o in graph.objects(activity, "frequency_per_week")
                if isinstance(o, Literal) and o.kind == "number"
            }
        )
        if not counts:
            warnings.append(f"{activity}: recommended_activity without frequency_per_week")
            continue
        if len(counts) > 1:
            warnings.append(f"{activity}: conflicting frequencies {counts}, keeping {counts[0]}")
        recommendations.append(
            Recommendation(activity=activity, target_count=counts[0], source=t.provenance)
        )
    return recommendations, warnings
