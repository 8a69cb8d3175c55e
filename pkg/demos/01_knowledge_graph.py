#!/usr/bin/env python3
"""Build a small patient knowledge graph by hand, round-trip it through the
TSV format, and run a multi-hop path query over it."""

from alleviate.kg import KnowledgeGraph, Literal, Provenance, Triple, entity, find_paths, from_tsv, to_tsv

prov = Provenance.provider_note("n1", (0, 20))
graph = KnowledgeGraph("patient:p1")

triples = [
    Triple(entity("patient:p1"), "takes", entity("kb:sertraline"), 1.0, prov),
    Triple(entity("kb:sertraline"), "label", Literal("sertraline"), 1.0, prov),
    Triple(entity("kb:sertraline"), "has_side_effect", entity("kb:dizziness"), 0.9, prov),
    Triple(entity("kb:dizziness"), "label", Literal("dizziness"), 1.0, prov),
]
for t in triples:
    graph.add_triple(t)

print(f"graph {graph.graph_id}: {len(graph.triples())} triples, {len(graph.nodes())} nodes")

# duplicates are identified by (s, p, o, provenance) and rejected
again = graph.add_triple(triples[0])
print(f"adding the same triple again -> {again}")

text = to_tsv(graph)
print("\nTSV serialization (sorted, deterministic):")
print(text)

back = from_tsv(text, "patient:p1")
print(f"round trip preserves the triple set: {set(back.triples()) == set(graph.triples())}")

# path queries fix the length via the predicate pattern; * is a wildcard
paths = find_paths(graph, entity("patient:p1"), ["takes", "has_side_effect"], "*")
for path in paths:
    print("\n2-hop path from patient:p1:")
    print("  nodes:", " -> ".join(str(n) for n in path.nodes))
    print("  predicates:", [e.predicate for e in path.edges])
    print("  replays against the graph:", path.replays_against(graph))
