"""Alleviate: a knowledge-graph-driven mental-health dialogue engine.

The library is organized around a per-patient knowledge graph bootstrapped
from provider notes, entity linking into bundled fixture knowledge bases,
REQUIRE/FORBID path constraints gating every bot response, questionnaire-tree
monitoring for emergency escalation, and a safety-masked contextual bandit
over response templates. The `service` subpackage binds everything into an
HTTP API with an append-only event log.
"""

from alleviate.kg import (
    EntityId,
    KnowledgeGraph,
    Literal,
    MergeReport,
    Path,
    Provenance,
    Triple,
    entity,
    find_paths,
    merge_into,
)

__version__ = "0.1.0"

__all__ = [
    "EntityId",
    "KnowledgeGraph",
    "Literal",
    "MergeReport",
    "Path",
    "Provenance",
    "Triple",
    "entity",
    "find_paths",
    "merge_into",
    "__version__",
]
