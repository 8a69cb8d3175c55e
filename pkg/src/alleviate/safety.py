"""REQUIRE/FORBID path constraints gating dialogue actions.

Rule files are line-oriented so clinicians can audit them:

    RULE <name> ON <action_type> (REQUIRE|FORBID) PATH <term> -[p1,p2,...]-> <term>

A term is `$patient`, a variable `?x`, or an entity id `ns:local`; `*` is the
predicate wildcard; `#` starts a comment. A Require rule passes when at least
one matching path exists under the action's bindings; a Forbid rule passes
only when none does. Evaluation gates response emission, the last step before
a reply leaves the engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from alleviate.kg import EntityId, KnowledgeGraph, Path, entity, find_paths

ACTION_TYPES = (
    "medication_advice",
    "adherence_praise",
    "adherence_encourage",
    "hypothesis_offer",
    "smalltalk",
    "emergency_alert",
    "clarify",
)

MAX_PATTERN_LEN = 6

_NAME_RE = re.compile(r"[A-Za-z_][\w.\-]*")
_VAR_RE = re.compile(r"\?[a-z][a-z0-9_]*")
_ENTITY_RE = re.compile(r"[a-z]+:[a-z0-9][a-z0-9_.\-]*")
_PRED_RE = re.compile(r"\*|[a-z_][a-z0-9_]*")


class ParseError(Exception):
    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnboundVariable(Exception):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"variable {variable!r} has no binding")


@dataclass(frozen=True)
class PathConstraint:
    """One parsed rule. Terms are kept in DSL form ($patient, ?x, ns:local)."""

    name: str
    action_type: str
    mode: str  # "Require" | "Forbid"
    start: str
    predicates: tuple[str, ...]
    end: str

    def __post_init__(self):
        if self.action_type not in ACTION_TYPES:
            raise ValueError(f"unknown action type {self.action_type!r}")
        if self.mode not in ("Require", "Forbid"):
            raise ValueError(f"mode must be Require or Forbid, not {self.mode!r}")
        if not 1 <= len(self.predicates) <= MAX_PATTERN_LEN:
            raise ValueError(f"predicate list length {len(self.predicates)} outside 1..{MAX_PATTERN_LEN}")
        for term in (self.start, self.end):
            if not _is_term(term):
                raise ValueError(f"bad term {term!r}")
        for pred in self.predicates:
            if not _PRED_RE.fullmatch(pred):
                raise ValueError(f"bad predicate {pred!r}")

    def pretty(self) -> str:
        keyword = "REQUIRE" if self.mode == "Require" else "FORBID"
        preds = ",".join(self.predicates)
        return f"RULE {self.name} ON {self.action_type} {keyword} PATH {self.start} -[{preds}]-> {self.end}"


@dataclass(frozen=True)
class Verdict:
    decision: str  # "Allowed" | "Denied"
    evidence: tuple[Path, ...] = ()
    violated: str | None = None

    @property
    def allowed(self) -> bool:
        return self.decision == "Allowed"

    def to_json(self) -> dict:
        return {
            "decision": self.decision,
            "evidence": [p.to_json() for p in self.evidence],
            "violated": self.violated,
        }


def _is_term(term: str) -> bool:
    return term == "$patient" or bool(_VAR_RE.fullmatch(term)) or bool(_ENTITY_RE.fullmatch(term))


# --- parser -----------------------------------------------------------------
# Hand-rolled cursor scanner: error positions must point at the offending
# token, which re-based whole-line matching cannot report.


class _Cursor:
    def __init__(self, text: str, line_no: int):
        self.text = text
        self.line_no = line_no
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    @property
    def column(self) -> int:
        return self.pos + 1

    def fail(self, expected: str):
        raise ParseError(self.line_no, self.column, f"expected {expected}")

    def keyword(self, word: str):
        self.skip_ws()
        if not self.text.startswith(word, self.pos):
            self.fail(word)
        after = self.pos + len(word)
        if after < len(self.text) and self.text[after] not in " \t":
            self.fail(word)
        self.pos = after

    def regex(self, pattern: re.Pattern, expected: str) -> str:
        self.skip_ws()
        match = pattern.match(self.text, self.pos)
        if not match:
            self.fail(expected)
        self.pos = match.end()
        return match.group()

    def literal(self, token: str):
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            self.fail(f"'{token}'")
        self.pos += len(token)

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)


def _parse_term(cur: _Cursor) -> str:
    cur.skip_ws()
    if cur.peek("$"):
        col = cur.column
        token = cur.text[cur.pos : cur.pos + len("$patient")]
        if token != "$patient":
            raise ParseError(cur.line_no, col, "expected $patient")
        cur.pos += len("$patient")
        return "$patient"
    if cur.peek("?"):
        return cur.regex(_VAR_RE, "variable like ?m")
    col = cur.column
    token = cur.regex(_ENTITY_RE, "term ($patient, ?var, or ns:local)")
    try:
        entity(token)
    except Exception:
        raise ParseError(cur.line_no, col, "entity with a known namespace") from None
    return token


def parse_constraints(text: str) -> list[PathConstraint]:
    """Rules in file order; `#` comments and blank lines are skipped."""
    rules: list[PathConstraint] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        cur = _Cursor(line, line_no)
        cur.keyword("RULE")
        cur.skip_ws()
        col = cur.column
        name = cur.regex(_NAME_RE, "rule name")
        if name in ("RULE", "ON", "REQUIRE", "FORBID", "PATH"):
            raise ParseError(line_no, col, "expected rule name")
        cur.keyword("ON")
        cur.skip_ws()
        col = cur.column
        action = cur.regex(_NAME_RE, "action type")
        if action not in ACTION_TYPES:
            raise ParseError(line_no, col, f"action type (one of {', '.join(ACTION_TYPES)})")
        cur.skip_ws()
        col = cur.column
        keyword = cur.regex(_NAME_RE, "REQUIRE or FORBID")
        if keyword not in ("REQUIRE", "FORBID"):
            raise ParseError(line_no, col, "REQUIRE or FORBID")
        cur.keyword("PATH")
        start = _parse_term(cur)
        cur.literal("-[")
        predicates = [cur.regex(_PRED_RE, "predicate or *")]
        while cur.peek(","):
            cur.literal(",")
            predicates.append(cur.regex(_PRED_RE, "predicate or *"))
        cur.literal("]->")
        end = _parse_term(cur)
        if not cur.at_end():
            raise ParseError(line_no, cur.column, "end of line")
        if len(predicates) > MAX_PATTERN_LEN:
            raise ParseError(line_no, 1, f"at most {MAX_PATTERN_LEN} predicates")
        rules.append(
            PathConstraint(
                name=name,
                action_type=action,
                mode="Require" if keyword == "REQUIRE" else "Forbid",
                start=start,
                predicates=tuple(predicates),
                end=end,
            )
        )
    return rules


def pretty_constraints(constraints: list[PathConstraint]) -> str:
    return "\n".join(rule.pretty() for rule in constraints) + ("\n" if constraints else "")


# --- evaluation --------------------------------------------------------------


def _resolve(term: str, bindings: dict) -> EntityId | None:
    """EntityId for a term, or None when it is a free (unbound) variable."""
    if term == "$patient":
        if "patient" not in bindings:
            raise UnboundVariable("patient")
        return entity(bindings["patient"])
    if term.startswith("?"):
        name = term[1:]
        if name in bindings:
            return entity(bindings[name])
        return None
    return entity(term)


def check_action(
    action_type: str,
    bindings: dict,
    graph: KnowledgeGraph,
    constraints: list[PathConstraint],
) -> Verdict:
    """Allowed iff every Require rule for the action has a path and no Forbid
    rule does. Free variables in end position are existentially quantified;
    a free variable in start position is an error (paths are enumerated
    forward). Denied reports the first failing rule in file order; for a
    Forbid violation the counterexample path is carried as evidence.
    """
    if action_type not in ACTION_TYPES:
        raise ValueError(f"unknown action type {action_type!r}")
    evidence: list[Path] = []
    for rule in constraints:
        if rule.action_type != action_type:
            continue
        start = _resolve(rule.start, bindings)
        if start is None:
            raise UnboundVariable(rule.start[1:])
        end = _resolve(rule.end, bindings)
        paths: list[Path] = []
        if graph.has_entity(start):
            paths = find_paths(graph, start, rule.predicates, end if end is not None else "*")
        if rule.mode == "Require":
            if not paths:
                return Verdict("Denied", (), rule.name)
            evidence.append(paths[0])
        else:
            if paths:
                return Verdict("Denied", (paths[0],), rule.name)
    return Verdict("Allowed", tuple(evidence), None)
