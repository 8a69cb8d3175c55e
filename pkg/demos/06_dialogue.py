#!/usr/bin/env python3
"""Run a handful of patient utterances through the full reply pipeline:
screening, intent classification, candidate building, safety masking, and
policy selection, over a graph merged from notes and both fixture KBs."""

from importlib import resources

from alleviate.dialogue import DialogueContext, DialogueSession, load_lexicon, load_templates, step
from alleviate.kg import entity, from_tsv, merge_into, union
from alleviate.linking import link_entities, resolve_conflicts
from alleviate.notes import ProviderNote, bootstrap_patient_kg, load_pattern_pack
from alleviate.policy import ResponsePolicy
from alleviate.safety import parse_constraints
from alleviate.screeners import TreeState, load_tree


def data(name):
    return resources.files("alleviate.data").joinpath(name).read_text()


patient = entity("patient:p1")
pack = load_pattern_pack(data("patterns.json"))
mayo = from_tsv(data("kb/mayo-fixture.tsv"), "mayo-fixture")
umls = from_tsv(data("kb/umls-fixture.tsv"), "umls-fixture")

notes = [
    ProviderNote("n1", patient, "Patient is taking sertraline 50 mg daily."),
    ProviderNote("n2", patient, "Recommend exercise 5 times per week."),
]
graph = bootstrap_patient_kg(patient, notes, pack)
links = [l for kb in (mayo, umls) for l in link_entities(graph, kb)]
accepted = [l for l in resolve_conflicts(links, []) if l.status == "accepted"]
for kb in (mayo, umls):
    merge_into(graph, kb, [l for l in accepted if l.kb_id == kb.graph_id])
merged = union(f"merged:{patient}", graph, mayo, umls)
print(f"merged graph for {patient}: {len(merged.triples())} triples")

ctx = DialogueContext(
    graph=merged,
    constraints=parse_constraints(data("safety.rules")),
    tree=load_tree(data("severity_tree.json")),
    policy=ResponsePolicy(epsilon=0.0, alpha=0.1),
    templates=load_templates(data("templates.json")),
    lexicon=load_lexicon(data("intent_lexicon.json")),
)
session = DialogueSession("s1", patient, TreeState(ctx.tree.tree_id, "s1"))

for utterance in [
    "I forgot if I took my sertraline",
    "I exercised 3 days this week",
    "I feel dizzy",
    "I need lorazepam",
    "I have a plan to kill myself tonight",
]:
    result = step(session, utterance, ctx)
    print(f"\npatient: {utterance}")
    print(f"bot [{result.reply.template_id} / {result.reply.action_type}]: {result.reply.text}")
    for path in result.explanation:
        print("  evidence:", " -> ".join(str(n) for n in path.nodes))
    if result.selection and result.selection.masked:
        for template_id, rule in result.selection.masked:
            print(f"  masked: {template_id} (violates {rule})")
    for alert in result.alerts:
        print(f"  ALERT: {alert.level} via {alert.triggering_node}")
