#!/usr/bin/env python3
"""Walk the severity-ordered questionnaire tree over a short conversation and
watch the escalation state ratchet up to clinician_flag and then emergency."""

from importlib import resources

from alleviate.screeners import TreeState, advance, load_tree, match_concepts

tree = load_tree(resources.files("alleviate.data").joinpath("severity_tree.json").read_text())
print(f"tree {tree.tree_id}: {len(tree.nodes)} severity nodes")
for node in tree.nodes.values():
    print(f"  {node.node_id} (severity {node.severity}): {node.concept_phrases[0]!r}, ...")

conversation = [
    "The weather is nice today",
    "Sometimes I wish I was dead",
    "I've been thinking about suicide",
    "The weather is still nice",
    "I have a plan to kill myself tonight",
]

state = TreeState(tree.tree_id, "s1")
print("\nconfirmed level only moves up; alerts fire once per escalation crossing")
for i, utterance in enumerate(conversation):
    matches = match_concepts(utterance, tree)
    state, alert = advance(state, tree, matches, f"m{i + 1:03d}")
    hit = matches[0].node_id if matches else "-"
    fired = f"{alert.level} ({alert.triggering_node})" if alert else "-"
    print(f"  {utterance!r}")
    print(f"    matched={hit} confirmed={state.confirmed_level} escalation={state.escalation} alert={fired}")
