"""Independent brute-force oracles used to freeze expected values.

Everything here is deliberately written against the *documented behavior*
rather than the library internals: pure-python counters instead of numpy,
list scans instead of adjacency indexes, explicit state machines instead of
shared helpers. Tests compare library output to these.
"""

from __future__ import annotations

import math
from collections import Counter

from alleviate.kg import EntityId, Triple

# --- hashed-trigram embedding, reimplemented ---------------------------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def trigrams(text: str) -> list[str]:
    padded = "#" + text.lower() + "#"
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def embed_counts(text: str) -> Counter:
    """Hashed 256-bucket trigram counts (unnormalized)."""
    counts: Counter = Counter()
    if not text:
        return counts
    for tri in trigrams(text):
        counts[fnv1a64(tri.encode("utf-8")) % 256] += 1
    return counts


def raw_trigram_counts(text: str) -> Counter:
    """Unhashed trigram counts, for ordering checks that avoid the hash."""
    if not text:
        return Counter()
    return Counter(trigrams(text))


def cosine_counts(a: Counter, b: Counter) -> float:
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def cosine_texts(x: str, y: str) -> float:
    """Cosine between hashed trigram count vectors of two texts."""
    return cosine_counts(embed_counts(x), embed_counts(y))


# --- path enumeration ---------------------------------------------------------


def path_signature(nodes, predicates, provs) -> tuple:
    return (
        tuple(str(n) for n in nodes),
        tuple(predicates),
        tuple(p.sort_key() for p in provs),
    )


def brute_force_paths(
    triples: list[Triple],
    start: EntityId,
    pattern: list[str],
    end,  # EntityId or "*"
) -> set[tuple]:
    """All simple paths as signatures, by scanning the raw triple list."""
    edges = [t for t in triples if isinstance(t.object, EntityId)]
    out: set[tuple] = set()

    def extend(nodes, chain):
        depth = len(chain)
        if depth == len(pattern):
            if end == "*" or nodes[-1] == end:
                out.add(
                    path_signature(nodes, [t.predicate for t in chain], [t.provenance for t in chain])
                )
            return
        for t in edges:
            if t.subject != nodes[-1]:
                continue
            if pattern[depth] != "*" and t.predicate != pattern[depth]:
                continue
            if t.object in nodes:
                continue
            extend(nodes + [t.object], chain + [t])

    extend([start], [])
    return out


# --- screener traversal ---------------------------------------------------------


class ScreenerOracle:
    """Step-for-step reference traversal over a questionnaire tree spec dict."""

    def __init__(self, tree_spec: dict, threshold: float, flag_at: int, emergency_at: int):
        self.nodes = {n["node_id"]: n for n in tree_spec["nodes"]}
        self.threshold = threshold
        self.flag_at = flag_at
        self.emergency_at = emergency_at
        self.confirmed = 0
        self.escalation = "none"

    def match(self, utterance: str) -> list[tuple[str, float]]:
        hits = []
        for node in self.nodes.values():
            score = max(cosine_texts(utterance, p) for p in node["concept_phrases"])
            if score >= self.threshold:
                hits.append((node["node_id"], score, node["severity"]))
        hits.sort(key=lambda h: (-h[2], -h[1], h[0]))
        return [(node_id, score) for node_id, score, _ in hits]

    def step(self, utterance: str) -> tuple[int, str, str | None]:
        """Returns (confirmed_level, escalation, alert_level_or_None)."""
        matched = self.match(utterance)
        level = self.confirmed
        for node_id, _score in matched:
            level = max(level, self.nodes[node_id]["severity"])
        self.confirmed = level
        if level >= self.emergency_at:
            new_esc = "emergency"
        elif level >= self.flag_at:
            new_esc = "clinician_flag"
        else:
            new_esc = "none"
        order = {"none": 0, "clinician_flag": 1, "emergency": 2}
        alert = None
        if order[new_esc] > order[self.escalation]:
            alert = new_esc
            self.escalation = new_esc
        return self.confirmed, self.escalation, alert


# --- entity linking + conflict resolution ----------------------------------------


def all_pairs_candidates(
    patient_labels: dict[str, str], kb_labels: dict[str, str], threshold: float
) -> list[tuple[str, str, float]]:
    """(source_id, target_id, score) for every pair at or above threshold,
    ordered by (source id, score desc, target id)."""
    rows = []
    for src, src_label in patient_labels.items():
        for tgt, tgt_label in kb_labels.items():
            score = cosine_texts(src_label, tgt_label)
            if score >= threshold:
                rows.append((src, tgt, score))
    rows.sort(key=lambda r: (r[0], -r[2], r[1]))
    return rows


def resolve_by_hand(
    candidates: list[dict], rules: list[dict]
) -> dict[tuple[str, str], tuple[str, str | None]]:
    """Reference conflict resolution over candidate dicts.

    candidates: {source, target, kb_id, score, contradictions: [predicate...]}
    rules: {rule_id, kind, params, priority}; clinician rules run in priority
    order, then a default PreferHighestScore and MaxLinksPerEntity(1) fill in
    for any kind the clinician did not supply (default rule_id = kind name).
    Candidates still live at the end are accepted.

    Returns {(source, target): (status, rejected_by)}.
    """
    decisions: dict[tuple[str, str], tuple[str, str | None]] = {}
    live: dict[str, list[dict]] = {}
    for c in candidates:
        live.setdefault(c["source"], []).append(c)

    def reject(c: dict, rule_id: str):
        decisions[(c["source"], c["target"])] = ("rejected", rule_id)

    ordered = sorted(rules, key=lambda r: r["priority"])
    kinds_given = {r["kind"] for r in ordered}
    chain: list[tuple[str, str, dict]] = [
        (r["kind"], r["rule_id"], r.get("params", {})) for r in ordered
    ]
    if "PreferHighestScore" not in kinds_given:
        chain.append(("PreferHighestScore", "PreferHighestScore", {}))
    if "MaxLinksPerEntity" not in kinds_given:
        chain.append(("MaxLinksPerEntity", "MaxLinksPerEntity", {"n": 1}))

    for source, pool in live.items():
        for kind, rule_id, params in chain:
            if not pool:
                break
            if kind == "PreferHighestScore":
                best = max(c["score"] for c in pool)
                keep = [c for c in pool if c["score"] == best]
            elif kind == "PreferKb":
                named = [c for c in pool if c["kb_id"] == params["kb_id"]]
                keep = named if named else pool
            elif kind == "MaxLinksPerEntity":
                keep = sorted(pool, key=lambda c: (-c["score"], c["target"]))[: params["n"]]
            elif kind == "KeepPatientValueOnContradiction":
                keep = [c for c in pool if not c.get("contradictions")]
            else:
                raise ValueError(kind)
            for c in pool:
                if c not in keep:
                    reject(c, rule_id)
            pool = keep
        for c in pool:
            decisions[(c["source"], c["target"])] = ("accepted", None)
    return decisions
