#!/usr/bin/env python3
"""Gate response actions behind REQUIRE/FORBID path rules: an action is
allowed only if every Require rule has a witness path and no Forbid rule
finds a counterexample."""

import json
from importlib import resources

from alleviate.kg import KnowledgeGraph, Provenance, Triple, entity
from alleviate.safety import ParseError, check_action, parse_constraints

rules_text = resources.files("alleviate.data").joinpath("safety.rules").read_text()
constraints = parse_constraints(rules_text)
print(f"{len(constraints)} rules loaded:")
for rule in constraints:
    print(f"  {rule.name}: {rule.mode} on {rule.action_type}")

prov = Provenance.provider_note("n1", (0, 10))
graph = KnowledgeGraph("patient:p1")
graph.add_triple(Triple(entity("patient:p1"), "takes", entity("kb:sertraline"), 1.0, prov))
# penicillin is prescribed AND flagged as an allergy, so the Forbid rule fires
graph.add_triple(Triple(entity("patient:p1"), "takes", entity("kb:penicillin"), 1.0, prov))
graph.add_triple(Triple(entity("patient:p1"), "allergic_to", entity("kb:penicillin"), 1.0, prov))

# prescription on record: allowed, with the witness path as evidence
verdict = check_action("medication_advice", {"patient": entity("patient:p1"), "m": entity("kb:sertraline")}, graph, constraints)
print(f"\nadvice about sertraline -> {verdict.decision}")
print(json.dumps(verdict.to_json(), indent=2))

# allergy on record: the Forbid rule reports the counterexample path
verdict = check_action("medication_advice", {"patient": entity("patient:p1"), "m": entity("kb:penicillin")}, graph, constraints)
print(f"\nadvice about penicillin -> {verdict.decision}, violated: {verdict.violated}")

# rule files fail fast with line/column positions
try:
    parse_constraints("RULE broken ON x REQUIRE NONSENSE $p -[takes]-> ?m")
except ParseError as err:
    print(f"\nbroken rule file: {err}")
