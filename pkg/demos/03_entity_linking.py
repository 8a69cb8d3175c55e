#!/usr/bin/env python3
"""Link patient-graph concepts to external KB entries by character-trigram
cosine similarity, then resolve competing links with clinician rules."""

from alleviate.kg import KnowledgeGraph, Literal, Provenance, Triple, entity
from alleviate.linking import GuidelineRule, cosine, embed, link_entities, resolve_conflicts

# misspellings land close in trigram space, unrelated terms do not
for a, b in [("sertraline", "sertraline"), ("sertraline", "sertralin"), ("sertraline", "exercise")]:
    print(f"cosine({a!r}, {b!r}) = {cosine(embed(a), embed(b)):.3f}")


def labeled(graph_id, labels):
    prov = Provenance.knowledge_base(graph_id, "r0")
    g = KnowledgeGraph(graph_id)
    for eid, label in labels.items():
        g.add_triple(Triple(entity(eid), "label", Literal(label), 1.0, prov))
    return g


patient = labeled("patient:p1", {"kb:sertralin": "sertralin", "kb:dizzyness": "dizzyness"})
mayo = labeled("mayo", {"kb:m_sertraline": "sertraline", "kb:m_dizziness": "dizziness"})
umls = labeled("umls", {"kb:u_sertraline": "sertraline"})

links = link_entities(patient, mayo, 0.75) + link_entities(patient, umls, 0.75)
print(f"\n{len(links)} candidate links above threshold 0.75:")
for link in links:
    print(f"  {link.source} -> {link.target} ({link.kb_id})  score={link.score:.3f}")

# both KBs offer a sertraline target; a clinician rule decides which one wins
rules = [GuidelineRule("prefer-mayo", "PreferKb", 10, {"kb_id": "mayo"})]
print("\nafter conflict resolution with PreferKb(mayo):")
for link in resolve_conflicts(links, rules):
    why = f" (rejected by {link.rejected_by})" if link.status == "rejected" else ""
    print(f"  {link.source} -> {link.target}: {link.status}{why}")
