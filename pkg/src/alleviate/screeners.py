"""Questionnaire-tree screening and monotone escalation state.

A screening instrument is a severity-ordered tree; every patient utterance is
matched against each node's concept phrases with the same character-trigram
embedding used for entity linking, and the session's confirmed level is the
running maximum of matched severities. Crossing the flag or emergency
threshold raises an alert exactly once per level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from alleviate.linking import cosine, embed

DEFAULT_MATCH_THRESHOLD = 0.70
DEFAULT_FLAG_AT = 1
DEFAULT_EMERGENCY_AT = 4

ESCALATION_ORDER = {"none": 0, "clinician_flag": 1, "emergency": 2}


class TreeValidationError(Exception):
    pass


class UnknownNode(Exception):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"tree has no node {node_id!r}")


@dataclass(frozen=True)
class TreeNode:
    node_id: str
    label: str
    concept_phrases: tuple[str, ...]
    severity: int
    children: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.concept_phrases:
            raise TreeValidationError(f"node {self.node_id}: concept_phrases empty")
        if self.severity < 1:
            raise TreeValidationError(f"node {self.node_id}: severity must be >= 1")


@dataclass(frozen=True)
class QuestionnaireTree:
    tree_id: str
    root: str
    nodes: dict = field(hash=False)  # node_id -> TreeNode

    def node(self, node_id: str) -> TreeNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def max_severity(self) -> int:
        return max(n.severity for n in self.nodes.values())


@dataclass(frozen=True)
class ConceptMatch:
    """One node whose best phrase cleared the threshold; the phrase is kept
    so alert evidence can cite it."""

    node_id: str
    score: float
    phrase: str


@dataclass(frozen=True)
class TreeState:
    tree_id: str
    session_id: str
    confirmed_level: int = 0
    matched_nodes: tuple = ()  # (node_id, message_id, score)
    escalation: str = "none"


@dataclass(frozen=True)
class Alert:
    alert_id: str
    session_id: str
    level: str  # clinician_flag | emergency
    triggering_node: str
    evidence: tuple  # (message_id, matched phrase, score)
    created_at: str
    acknowledged: bool = False

    def to_json(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "session_id": self.session_id,
            "level": self.level,
            "triggering_node": self.triggering_node,
            "evidence": {
                "message_id": self.evidence[0],
                "phrase": self.evidence[1],
                "score": self.evidence[2],
            },
            "created_at": self.created_at,
            "acknowledged": self.acknowledged,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Alert":
        ev = data["evidence"]
        return cls(
            alert_id=data["alert_id"],
            session_id=data["session_id"],
            level=data["level"],
            triggering_node=data["triggering_node"],
            evidence=(ev["message_id"], ev["phrase"], ev["score"]),
            created_at=data["created_at"],
            acknowledged=data.get("acknowledged", False),
        )


def load_tree(spec: str) -> QuestionnaireTree:
    """Parse and validate a tree file (JSON {tree_id, root, nodes})."""
    try:
        data = json.loads(spec)
    except json.JSONDecodeError as exc:
        raise TreeValidationError(f"not valid JSON: {exc}") from exc
    try:
        nodes = {
            n["node_id"]: TreeNode(
                node_id=n["node_id"],
                label=n["label"],
                concept_phrases=tuple(n["concept_phrases"]),
                severity=int(n["severity"]),
                children=tuple(n.get("children", ())),
            )
            for n in data["nodes"]
        }
        tree = QuestionnaireTree(tree_id=data["tree_id"], root=data["root"], nodes=nodes)
    except KeyError as exc:
        raise TreeValidationError(f"missing field {exc}") from exc

    if len(nodes) != len(data["nodes"]):
        raise TreeValidationError("duplicate node ids")
    if tree.root not in nodes:
        raise TreeValidationError(f"root {tree.root!r} is not a node")

    parents: dict[str, str] = {}
    for node in nodes.values():
        for child in node.children:
            if child not in nodes:
                raise TreeValidationError(f"node {node.node_id}: unknown child {child!r}")
            if child in parents:
                raise TreeValidationError(f"node {child} has two parents")
            parents[child] = node.node_id

    # reachability + severity ordering in one walk from the root
    seen: set[str] = set()
    stack = [tree.root]
    while stack:
        current = stack.pop()
        if current in seen:
            raise TreeValidationError(f"cycle through node {current}")
        seen.add(current)
        node = nodes[current]
        for child in node.children:
            if nodes[child].severity <= node.severity:
                raise TreeValidationError(
                    f"severity must increase: {current} ({node.severity}) -> "
                    f"{child} ({nodes[child].severity})"
                )
            stack.append(child)
    orphans = set(nodes) - seen
    if orphans:
        raise TreeValidationError(f"unreachable nodes: {sorted(orphans)}")
    return tree


def match_concepts(
    utterance: str, tree: QuestionnaireTree, threshold: float = DEFAULT_MATCH_THRESHOLD
) -> list[ConceptMatch]:
    """Nodes whose best concept phrase reaches the threshold, strongest first.

    A node's score is the max cosine over its phrases; order is severity
    desc, score desc, node id.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    vec = embed(utterance)
    hits: list[tuple[int, ConceptMatch]] = []
    for node in tree.nodes.values():
        best_score = -1.0
        best_phrase = ""
        for phrase in node.concept_phrases:
            score = cosine(vec, embed(phrase))
            if score > best_score:
                best_score = score
                best_phrase = phrase
        if best_score >= threshold:
            hits.append((node.severity, ConceptMatch(node.node_id, best_score, best_phrase)))
    hits.sort(key=lambda h: (-h[0], -h[1].score, h[1].node_id))
    return [match for _, match in hits]


def advance(
    state: TreeState,
    tree: QuestionnaireTree,
    matches: list[ConceptMatch],
    message_id: str,
    thresholds: dict | None = None,
    alert_id: str = "",
    created_at: str = "",
) -> tuple[TreeState, Alert | None]:
    """Fold one utterance's matches into the session state.

    confirmed_level is a running max and never decreases; an Alert is
    returned exactly when the derived escalation strictly increases.
    """
    thresholds = thresholds or {}
    flag_at = int(thresholds.get("flag_at", DEFAULT_FLAG_AT))
    emergency_at = int(thresholds.get("emergency_at", DEFAULT_EMERGENCY_AT))

    level = state.confirmed_level
    top: ConceptMatch | None = None
    for match in matches:
        severity = tree.node(match.node_id).severity
        if severity > level:
            level = severity
            top = match

    if level >= emergency_at:
        escalation = "emergency"
    elif level >= flag_at:
        escalation = "clinician_flag"
    else:
        escalation = state.escalation

    new_state = replace(
        state,
        confirmed_level=level,
        matched_nodes=state.matched_nodes
        + tuple((m.node_id, message_id, m.score) for m in matches),
        escalation=escalation
        if ESCALATION_ORDER[escalation] > ESCALATION_ORDER[state.escalation]
        else state.escalation,
    )

    alert = None
    if ESCALATION_ORDER[new_state.escalation] > ESCALATION_ORDER[state.escalation]:
        trigger = top if top is not None else (matches[0] if matches else None)
        if trigger is None:
            raise ValueError("escalation increased without a matched node")
        alert = Alert(
            alert_id=alert_id or f"alert-{state.session_id}-{message_id}",
            session_id=state.session_id,
            level=new_state.escalation,
            triggering_node=trigger.node_id,
            evidence=(message_id, trigger.phrase, trigger.score),
            created_at=created_at,
        )
    return new_state, alert
