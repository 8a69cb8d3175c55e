#!/usr/bin/env python3
"""Bootstrap a patient graph from free-text provider notes using the shipped
extraction pattern pack, then read the activity recommendations back out."""

from importlib import resources

from alleviate.kg import entity, to_tsv
from alleviate.notes import ProviderNote, bootstrap_patient_kg, extract_recommendations, load_pattern_pack

pack = load_pattern_pack(resources.files("alleviate.data").joinpath("patterns.json").read_text())
print(f"pattern pack: {len(pack)} extraction patterns")

patient = entity("patient:p1")
notes = [
    ProviderNote("n1", patient, "Patient is taking sertraline 50 mg daily."),
    ProviderNote("n2", patient, "Recommend exercise 5 times per week."),
    ProviderNote("n3", patient, "Recommend exercise 3 times per week."),  # conflicts with n2
]

graph = bootstrap_patient_kg(patient, notes, pack)
print(f"\nbootstrapped graph: {len(graph.triples())} triples")
print(to_tsv(graph))

# conflicting target counts resolve to the lower bar, with a warning
recs, warnings = extract_recommendations(graph, patient)
for rec in recs:
    print(f"recommendation: {rec.activity.local} x{rec.target_count} per {rec.period}")
for w in warnings:
    print(f"warning: {w}")
