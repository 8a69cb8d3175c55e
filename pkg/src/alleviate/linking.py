"""Entity embedding and similarity linking between patient graphs and KBs.

Entities are embedded as hashed character-trigram count vectors: lowercase
the label, pad with `#` on both ends, hash every trigram with 64-bit FNV-1a
into 256 buckets, then L2-normalize. The scheme is deterministic and
dependency-free, so linking decisions are exactly reproducible; swap in a
learned embedder via the `embedder` arguments if one becomes available.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from alleviate.kg import EntityId, KnowledgeGraph, Literal

DIMS = 256
DEFAULT_LINK_THRESHOLD = 0.75

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

RULE_KINDS = (
    "PreferHighestScore",
    "PreferKb",
    "MaxLinksPerEntity",
    "KeepPatientValueOnContradiction",
)


class ConflictingRuleSet(Exception):
    def __init__(self, priority: int, rule_ids: list[str]):
        self.priority = priority
        self.rule_ids = rule_ids
        super().__init__(f"rules {rule_ids} share priority {priority}")


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def embed(text: str) -> np.ndarray:
    """256-dim unit vector of hashed character trigrams; zero vector for ""."""
    vec = np.zeros(DIMS, dtype=np.float64)
    if not text:
        return vec
    padded = "#" + text.lower() + "#"
    for i in range(len(padded) - 2):
        bucket = _fnv1a64(padded[i : i + 3].encode("utf-8")) % DIMS
        vec[bucket] += 1.0
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two embedding vectors (0.0 when either is the zero vector)."""
    return float(np.dot(a, b))


@dataclass(frozen=True)
class EntityLink:
    """Candidate or resolved link from a patient-graph entity to a KB entity."""

    link_id: str
    source: EntityId
    target: EntityId
    kb_id: str
    score: float
    status: str = "candidate"  # candidate | accepted | rejected
    rejected_by: str | None = None
    contradictions: tuple[str, ...] = ()

    def accept(self) -> "EntityLink":
        assert self.status == "candidate"
        return replace(self, status="accepted")

    def reject(self, rule_id: str) -> "EntityLink":
        assert self.status == "candidate"
        return replace(self, status="rejected", rejected_by=rule_id)


@dataclass(frozen=True)
class GuidelineRule:
    """Clinician conflict-resolution rule; lower priority runs first."""

    rule_id: str
    kind: str
    priority: int
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")

    @classmethod
    def from_json(cls, data: dict) -> "GuidelineRule":
        return cls(
            rule_id=data["rule_id"],
            kind=data["kind"],
            priority=int(data["priority"]),
            params=dict(data.get("params", {})),
        )


def entity_label(graph: KnowledgeGraph, e: EntityId) -> str:
    """Label triple value when present, else the local id with `_` -> space."""
    for obj in graph.objects(e, "label"):
        if isinstance(obj, Literal) and obj.kind == "string":
            return obj.value
    return e.local.replace("_", " ")


def _literal_values(graph: KnowledgeGraph, e: EntityId) -> dict[str, set]:
    out: dict[str, set] = {}
    for t in graph.outgoing(e):
        if isinstance(t.object, Literal) and t.predicate != "label":
            out.setdefault(t.predicate, set()).add((t.object.value, t.object.unit))
    return out


def link_entities(
    patient_kg: KnowledgeGraph,
    kb: KnowledgeGraph,
    threshold: float = DEFAULT_LINK_THRESHOLD,
) -> list[EntityLink]:
    """Candidate links from patient-graph concepts into one KB.

    Sources are `kb:` entities of the patient graph plus `patient:` entities
    carrying a label alias. Every source label is compared against every KB
    entity label; pairs scoring at or above the threshold become candidates,
    ordered by (source id, score desc, target id).
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold {threshold} outside (0, 1]")

    sources = []
    for e in sorted(patient_kg.nodes(), key=str):
        if e.namespace == "kb":
            sources.append(e)
        elif e.namespace == "patient" and any(
            isinstance(o, Literal) for o in patient_kg.objects(e, "label")
        ):
            sources.append(e)

    targets = sorted((e for e in kb.nodes() if e.namespace == "kb"), key=str)
    target_vecs = [(e, embed(entity_label(kb, e))) for e in targets]

    links: list[EntityLink] = []
    for src in sources:
        src_vec = embed(entity_label(patient_kg, src))
        for tgt, tgt_vec in target_vecs:
            score = cosine(src_vec, tgt_vec)
            if score < threshold:
                continue
            contradictions = tuple(
                sorted(
                    pred
                    for pred, values in _literal_values(patient_kg, src).items()
                    if pred in _literal_values(kb, tgt)
                    and values != _literal_values(kb, tgt)[pred]
                )
            )
            links.append(
                EntityLink(
                    link_id=f"{src}->{tgt}",
                    source=src,
                    target=tgt,
                    kb_id=kb.graph_id,
                    score=score,
                    contradictions=contradictions,
                )
            )
    links.sort(key=lambda l: (str(l.source), -l.score, str(l.target)))
    return links


def _apply_rule(kind: str, params: dict, pool: list[EntityLink]) -> list[EntityLink]:
    """Survivors of one rule over one source entity's live candidates."""
    if kind == "PreferHighestScore":
        best = max(l.score for l in pool)
        return [l for l in pool if l.score == best]
    if kind == "PreferKb":
        named = [l for l in pool if l.kb_id == params["kb_id"]]
        return named if named else pool
    if kind == "MaxLinksPerEntity":
        n = int(params.get("n", 1))
        return sorted(pool, key=lambda l: (-l.score, str(l.target)))[:n]
    if kind == "KeepPatientValueOnContradiction":
        return [l for l in pool if not l.contradictions]
    raise ValueError(kind)


def resolve_conflicts(
    candidates: list[EntityLink], rules: list[GuidelineRule]
) -> list[EntityLink]:
    """Accept or reject every candidate, deterministically.

    Clinician rules run in priority order as filters per source entity; a
    default PreferHighestScore then MaxLinksPerEntity(1) (lexicographic
    target tie-break) fill in for kinds not supplied. Defaults reject with
    their kind name as rule_id. Survivors are accepted.
    """
    seen: dict[int, list[str]] = {}
    for r in rules:
        seen.setdefault(r.priority, []).append(r.rule_id)
    for priority, ids in seen.items():
        if len(ids) > 1:
            raise ConflictingRuleSet(priority, ids)

    chain = [(r.kind, r.rule_id, r.params) for r in sorted(rules, key=lambda r: r.priority)]
    kinds_given = {kind for kind, _, _ in chain}
    if "PreferHighestScore" not in kinds_given:
        chain.append(("PreferHighestScore", "PreferHighestScore", {}))
    if "MaxLinksPerEntity" not in kinds_given:
        chain.append(("MaxLinksPerEntity", "MaxLinksPerEntity", {"n": 1}))

    by_source: dict[str, list[EntityLink]] = {}
    for c in candidates:
        if c.status != "candidate":
            raise ValueError(f"link {c.link_id} already resolved")
        by_source.setdefault(str(c.source), []).append(c)

    resolved: dict[str, EntityLink] = {}
    for pool in by_source.values():
        live = list(pool)
        for kind, rule_id, params in chain:
            if not live:
                break
            keep = _apply_rule(kind, params, live)
            for link in live:
                if link not in keep:
                    resolved[link.link_id] = link.reject(rule_id)
            live = keep
        for link in live:
            resolved[link.link_id] = link.accept()

    out = [resolved[c.link_id] for c in candidates]
    assert len(out) == len(candidates)
    return out
