"""Dialogue state machine: intent handling, hypothesis generation, adherence
appraisal, and the step pipeline that gates every reply.

The pipeline order inside step() is fixed and screening always runs first, so
an emergency can never be starved by intent handling. Every non-fallback,
non-emergency reply carries the bindings that were checked, which lets an
auditor re-derive the Allowed verdict later from the turn log alone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from alleviate.kg import (
    EntityId,
    KnowledgeGraph,
    Literal,
    Path,
    UnknownEntity,
    find_paths,
)
from alleviate.linking import DEFAULT_LINK_THRESHOLD, cosine, embed, entity_label
from alleviate.notes import Recommendation, extract_recommendations, normalize_entity_text
from alleviate.policy import (
    EmptyCandidateSet,
    PolicyState,
    ResponsePolicy,
    SelectionExplanation,
    explain_selection,
    select_with_detail,
)
from alleviate.safety import check_action
from alleviate.screeners import (
    DEFAULT_MATCH_THRESHOLD,
    QuestionnaireTree,
    TreeState,
    advance,
    match_concepts,
)

FALLBACK_TEMPLATE = "t_clarify"
EMERGENCY_TEMPLATE = "t_emergency"

# slot names each intent may carry
INTENT_SLOTS = {
    "medication_query": ("drug",),
    "symptom_report": ("symptom",),
    "adherence_checkin": ("activity", "count"),
    "feedback": (),
    "other": (),
}


class SessionClosed(Exception):
    pass


@dataclass(frozen=True)
class Intent:
    kind: str
    slots: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        allowed = INTENT_SLOTS[self.kind]
        extra = set(self.slots) - set(allowed)
        if extra:
            raise ValueError(f"intent {self.kind} cannot carry slots {sorted(extra)}")


@dataclass(frozen=True)
class ResponseTemplate:
    template_id: str
    action_type: str
    intent: str
    text: str


@dataclass(frozen=True)
class ResponseCandidate:
    template_id: str
    action_type: str
    text: str
    bindings: dict = field(default_factory=dict, hash=False)
    evidence: tuple = ()  # Path objects

    def __post_init__(self):
        leftover = re.search(r"\{[a-z_]+\}", self.text)
        if leftover:
            raise ValueError(f"unfilled placeholder {leftover.group()} in {self.template_id}")


@dataclass(frozen=True)
class Hypothesis:
    statement: tuple  # (cause, effect) EntityIds
    support: Path

    @property
    def rank_key(self) -> tuple:
        product = 1.0
        for edge in self.support.edges:
            product *= edge.confidence
        return (len(self.support.edges), -product, str(self.statement[0]))


@dataclass
class DialogueSession:
    session_id: str
    patient_id: EntityId
    tree_state: TreeState
    turn_log: list = field(default_factory=list)  # (message_id, speaker, text, at)
    activity_log: list = field(default_factory=list)  # (activity EntityId, at)
    adherence_bucket: str = "unknown"
    closed: bool = False

    def next_message_id(self) -> str:
        return f"{self.session_id}-m{len(self.turn_log) + 1:03d}"


@dataclass
class DialogueContext:
    """Everything step() needs; assembled once by the service."""

    graph: KnowledgeGraph  # patient graph merged with the fixture KBs
    constraints: list
    tree: QuestionnaireTree
    policy: ResponsePolicy
    templates: dict  # template_id -> ResponseTemplate
    lexicon: dict  # parsed intent lexicon
    link_threshold: float = DEFAULT_LINK_THRESHOLD
    match_threshold: float = DEFAULT_MATCH_THRESHOLD
    screener_thresholds: dict = field(default_factory=lambda: {"flag_at": 1, "emergency_at": 4})
    rng_seed: int = 0
    clock: object = None  # callable -> ISO string

    def now(self) -> str:
        return self.clock() if callable(self.clock) else ""


@dataclass(frozen=True)
class StepResult:
    reply: ResponseCandidate
    alerts: tuple
    explanation: tuple  # Path objects backing the reply
    selection: SelectionExplanation | None
    policy_state: PolicyState | None


def load_templates(text: str) -> dict:
    table = {}
    for item in json.loads(text):
        template = ResponseTemplate(
            template_id=item["template_id"],
            action_type=item["action_type"],
            intent=item["intent"],
            text=item["text"],
        )
        if template.template_id in table:
            raise ValueError(f"duplicate template id {template.template_id}")
        table[template.template_id] = template
    for needed in (FALLBACK_TEMPLATE, EMERGENCY_TEMPLATE):
        if needed not in table:
            raise ValueError(f"template table is missing {needed}")
    return table


def load_lexicon(text: str) -> dict:
    data = json.loads(text)
    rules = [(r["kind"], re.compile(r["matcher"])) for r in data["rules"]]
    for kind, _ in rules:
        if kind not in INTENT_SLOTS:
            raise ValueError(f"lexicon rule for unknown intent {kind!r}")
    return {"rules": rules, "normalize": data.get("normalize", {})}


def classify_intent(utterance: str, lexicon: dict) -> Intent:
    """First matching lexicon rule wins; captured groups become slots,
    passed through the per-slot normalize map."""
    for kind, matcher in lexicon["rules"]:
        match = matcher.search(utterance)
        if not match:
            continue
        slots = {}
        for name, value in match.groupdict().items():
            if value is None:
                continue
            value = value.lower()
            value = lexicon["normalize"].get(name, {}).get(value, value)
            slots[name] = int(value) if value.isdigit() else value
        return Intent(kind, slots)
    return Intent("other", {})


def hypothesize(
    symptom: EntityId,
    graph: KnowledgeGraph,
    patient: EntityId,
    max_len: int = 4,
) -> list[Hypothesis]:
    """Candidate medication-causes-symptom chains for a reported symptom.

    Walks takes -> same_as* -> has_side_effect up to max_len edges; one
    hypothesis per cause, backed by its best-ranked support path.
    """
    if not graph.has_entity(symptom):
        raise UnknownEntity(symptom)
    patterns = [["takes", "has_side_effect"]]
    bridges = ["takes"]
    while len(bridges) + 1 < max_len:
        bridges = bridges + ["same_as"]
        patterns.append(bridges + ["has_side_effect"])
    by_cause: dict[EntityId, Hypothesis] = {}
    for pattern in patterns:
        for path in find_paths(graph, patient, pattern, symptom, max_len=max_len):
            cause = path.nodes[1]
            candidate = Hypothesis(statement=(cause, symptom), support=path)
            held = by_cause.get(cause)
            if held is None or candidate.rank_key < held.rank_key:
                by_cause[cause] = candidate
    return sorted(by_cause.values(), key=lambda h: h.rank_key)


def resolve_label(text: str, graph: KnowledgeGraph, threshold: float) -> list[tuple[EntityId, float]]:
    """KB entities whose label literal is close to the text, best first."""
    spoken = embed(text)
    hits = []
    for triple in graph.triples():
        if triple.predicate != "label" or not isinstance(triple.object, Literal):
            continue
        score = cosine(spoken, embed(str(triple.object.value)))
        if score >= threshold:
            hits.append((triple.subject, score))
    hits.sort(key=lambda h: (-h[1], str(h[0])))
    return hits


def appraise_adherence(
    session: DialogueSession,
    rec: Recommendation,
    reported_count: int,
    templates: dict,
) -> ResponseCandidate:
    """Praise at or above the recommended count, encourage below it."""
    if reported_count < 0:
        raise ValueError("reported_count must be >= 0")
    activity_name = rec.activity.local.replace("_", " ")
    if reported_count >= rec.target_count:
        template = templates["t_praise"]
        text = template.text.format(count=reported_count, activity=activity_name)
    else:
        template = templates["t_encourage"]
        text = template.text.format(
            count=reported_count,
            target=rec.target_count,
            activity=activity_name,
            remaining=rec.target_count - reported_count,
        )
    return ResponseCandidate(
        template_id=template.template_id,
        action_type=template.action_type,
        text=text,
        bindings={"patient": session.patient_id, "a": rec.activity},
    )


def _render(template: ResponseTemplate, slots: dict, bindings: dict, evidence=()) -> ResponseCandidate | None:
    try:
        text = template.text.format(**slots)
    except (KeyError, IndexError):
        return None
    return ResponseCandidate(
        template_id=template.template_id,
        action_type=template.action_type,
        text=text,
        bindings=bindings,
        evidence=tuple(evidence),
    )


def _candidates_for(
    intent: Intent, session: DialogueSession, ctx: DialogueContext
) -> list[ResponseCandidate]:
    patient = session.patient_id
    base = {"patient": patient}
    templates = [t for t in ctx.templates.values() if t.intent == intent.kind]
    templates.sort(key=lambda t: t.template_id)
    out: list[ResponseCandidate] = []

    if intent.kind == "medication_query":
        drug_name = intent.slots.get("drug")
        if not drug_name:
            return []
        local = normalize_entity_text(drug_name)
        if not local:
            return []
        drug = EntityId("kb", local)
        bindings = dict(base, m=drug)
        for template in templates:
            candidate = _render(template, {"drug": drug_name}, bindings)
            if candidate:
                out.append(candidate)
        return out

    if intent.kind == "symptom_report":
        symptom_name = intent.slots.get("symptom")
        if not symptom_name:
            return []
        hypotheses: list[Hypothesis] = []
        for target, _score in resolve_label(symptom_name, ctx.graph, ctx.link_threshold):
            try:
                hypotheses.extend(hypothesize(target, ctx.graph, patient))
            except UnknownEntity:
                continue
        if not hypotheses:
            return []
        best = min(hypotheses, key=lambda h: h.rank_key)
        cause, effect = best.statement
        bindings = dict(base, m=cause, s=effect)
        slots = {"symptom": symptom_name, "drug": entity_label(ctx.graph, cause)}
        for template in templates:
            candidate = _render(template, slots, bindings, evidence=[best.support])
            if candidate:
                out.append(candidate)
        return out

    if intent.kind == "adherence_checkin":
        activity_name = intent.slots.get("activity")
        reported = intent.slots.get("count")
        if not activity_name or reported is None:
            return []
        local = normalize_entity_text(activity_name)
        recommendations, _ = extract_recommendations(ctx.graph, patient)
        rec = next((r for r in recommendations if r.activity.local == local), None)
        if rec is None:
            return []
        session.activity_log.append((rec.activity, ctx.now()))
        session.adherence_bucket = "on_track" if reported >= rec.target_count else "behind"
        return [appraise_adherence(session, rec, reported, ctx.templates)]

    # feedback and other: static templates, no slots
    for template in templates:
        candidate = _render(template, {}, dict(base))
        if candidate:
            out.append(candidate)
    return out


def _seed_for(ctx: DialogueContext, session_id: str, message_id: str) -> int:
    h = 0xCBF29CE484222325
    for b in f"{ctx.rng_seed}:{session_id}:{message_id}".encode():
        h = ((h ^ b) * 0x100000001B3) & ((1 << 64) - 1)
    return h & 0x7FFFFFFF


def step(session: DialogueSession, utterance: str, ctx: DialogueContext) -> StepResult:
    """One patient turn through the fixed pipeline.

    (1) screening and escalation, (2) emergency override, (3) intent
    classification and candidate building, (4) safety filtering,
    (5) policy selection, (6) clarify fallback. The turn log gets both the
    patient utterance and the reply.
    """
    if session.closed:
        raise SessionClosed(session.session_id)

    in_id = session.next_message_id()
    session.turn_log.append((in_id, "patient", utterance, ctx.now()))

    matches = match_concepts(utterance, ctx.tree, ctx.match_threshold)
    session.tree_state, alert = advance(
        session.tree_state,
        ctx.tree,
        matches,
        in_id,
        thresholds=ctx.screener_thresholds,
        created_at=ctx.now(),
    )
    alerts = (alert,) if alert else ()

    if alert is not None and alert.level == "emergency":
        template = ctx.templates[EMERGENCY_TEMPLATE]
        reply = ResponseCandidate(
            template_id=template.template_id,
            action_type=template.action_type,
            text=template.text,
            bindings={"patient": session.patient_id},
        )
        out_id = session.next_message_id()
        session.turn_log.append((out_id, "bot", reply.text, ctx.now()))
        return StepResult(reply, alerts, (), None, None)

    intent = classify_intent(utterance, ctx.lexicon)
    candidates = _candidates_for(intent, session, ctx)

    survivors: list[ResponseCandidate] = []
    masked: list[tuple[str, str]] = []
    for candidate in candidates:
        verdict = check_action(candidate.action_type, candidate.bindings, ctx.graph, ctx.constraints)
        if verdict.allowed:
            merged = candidate.evidence + verdict.evidence
            survivors.append(
                ResponseCandidate(
                    template_id=candidate.template_id,
                    action_type=candidate.action_type,
                    text=candidate.text,
                    bindings=candidate.bindings,
                    evidence=merged,
                )
            )
        else:
            masked.append((candidate.template_id, verdict.violated))

    state = PolicyState(
        intent=intent.kind,
        escalation="flagged" if session.tree_state.escalation != "none" else "none",
        adherence=session.adherence_bucket,
    )
    try:
        chosen, explored = select_with_detail(
            state, survivors, ctx.policy, _seed_for(ctx, session.session_id, in_id)
        )
    except EmptyCandidateSet:
        template = ctx.templates[FALLBACK_TEMPLATE]
        chosen = ResponseCandidate(
            template_id=template.template_id,
            action_type=template.action_type,
            text=template.text,
            bindings={"patient": session.patient_id},
        )
        explored = False

    selection = explain_selection(
        state, chosen.template_id, ctx.policy, survivors, explored, tuple(masked)
    )
    out_id = session.next_message_id()
    session.turn_log.append((out_id, "bot", chosen.text, ctx.now()))
    return StepResult(chosen, alerts, tuple(chosen.evidence), selection, state)
