"""Safety-masked epsilon-greedy selection over response templates.

A reply is a one-step episode: the only reward is the +-1 feedback on that
reply, so the value update has no bootstrapping term. Selection sees only the
survivors of the safety filter; masked templates cannot be chosen no matter
their value.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

INTENT_KINDS = ("medication_query", "symptom_report", "adherence_checkin", "feedback", "other")
ESCALATION_BUCKETS = ("none", "flagged")
ADHERENCE_BUCKETS = ("unknown", "behind", "on_track")

DEFAULT_EPSILON = 0.1
DEFAULT_ALPHA = 0.1


class EmptyCandidateSet(Exception):
    pass


@dataclass(frozen=True, order=True)
class PolicyState:
    intent: str
    escalation: str = "none"
    adherence: str = "unknown"

    def __post_init__(self):
        if self.intent not in INTENT_KINDS:
            raise ValueError(f"unknown intent {self.intent!r}")
        if self.escalation not in ESCALATION_BUCKETS:
            raise ValueError(f"unknown escalation bucket {self.escalation!r}")
        if self.adherence not in ADHERENCE_BUCKETS:
            raise ValueError(f"unknown adherence bucket {self.adherence!r}")

    @property
    def key(self) -> str:
        return f"{self.intent}|{self.escalation}|{self.adherence}"

    @classmethod
    def from_key(cls, key: str) -> "PolicyState":
        intent, escalation, adherence = key.split("|")
        return cls(intent, escalation, adherence)


@dataclass(frozen=True)
class FeedbackEvent:
    session_id: str
    message_id: str
    source: str  # patient | clinician
    signal: str  # positive | negative

    def __post_init__(self):
        if self.source not in ("patient", "clinician"):
            raise ValueError(f"unknown feedback source {self.source!r}")
        if self.signal not in ("positive", "negative"):
            raise ValueError(f"unknown feedback signal {self.signal!r}")

    @property
    def reward(self) -> float:
        return 1.0 if self.signal == "positive" else -1.0


@dataclass(frozen=True)
class ResponsePolicy:
    epsilon: float = DEFAULT_EPSILON
    alpha: float = DEFAULT_ALPHA
    q: dict = field(default_factory=dict, hash=False)  # (PolicyState, template_id) -> float
    counts: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")

    def value(self, state: PolicyState, template_id: str) -> float:
        return self.q.get((state, template_id), 0.0)


def select_with_detail(state, survivors, policy: ResponsePolicy, rng_seed: int):
    """(chosen candidate, explored flag). Candidates only need a template_id.

    Exploration draws uniformly over survivors sorted by template_id, so the
    pick depends on the seed and the survivor set, not on caller ordering.
    """
    if not survivors:
        raise EmptyCandidateSet("no survivors to select from")
    ranked = sorted(survivors, key=lambda c: c.template_id)
    rng = random.Random(rng_seed)
    if rng.random() < policy.epsilon:
        return ranked[rng.randrange(len(ranked))], True
    best = ranked[0]
    best_q = policy.value(state, best.template_id)
    for candidate in ranked[1:]:
        q = policy.value(state, candidate.template_id)
        if q > best_q:
            best, best_q = candidate, q
    return best, False


def select_response(state, survivors, policy: ResponsePolicy, rng_seed: int):
    chosen, _ = select_with_detail(state, survivors, policy, rng_seed)
    return chosen


def update_policy(
    policy: ResponsePolicy, state: PolicyState, template_id: str, reward: float
) -> ResponsePolicy:
    """One-step value update q <- q + alpha * (reward - q)."""
    if reward not in (1.0, -1.0, 1, -1):
        raise ValueError(f"reward must be +1 or -1, not {reward!r}")
    cell = (state, template_id)
    old = policy.q.get(cell, 0.0)
    q = dict(policy.q)
    counts = dict(policy.counts)
    q[cell] = old + policy.alpha * (reward - old)
    counts[cell] = counts.get(cell, 0) + 1
    return replace(policy, q=q, counts=counts)


@dataclass(frozen=True)
class SelectionExplanation:
    state: PolicyState
    chosen: str
    explored: bool
    survivor_values: tuple  # (template_id, q) sorted by template_id
    masked: tuple  # (template_id, violated rule name)

    def to_json(self) -> dict:
        return {
            "state": self.state.key,
            "chosen": self.chosen,
            "explored": self.explored,
            "survivors": [{"template_id": t, "q": v} for t, v in self.survivor_values],
            "masked": [{"template_id": t, "violated": r} for t, r in self.masked],
        }


def explain_selection(
    state: PolicyState,
    chosen: str,
    policy: ResponsePolicy,
    survivors,
    explored: bool = False,
    masked=(),
) -> SelectionExplanation:
    """Pure rendering of one selection: every survivor's value plus the
    templates the safety filter removed and the rule each one violated."""
    values = tuple(
        sorted((c.template_id, policy.value(state, c.template_id)) for c in survivors)
    )
    return SelectionExplanation(
        state=state,
        chosen=chosen,
        explored=explored,
        survivor_values=values,
        masked=tuple(masked),
    )


# --- persistence --------------------------------------------------------------


def policy_to_json(policy: ResponsePolicy) -> str:
    cells = [
        {
            "state": state.key,
            "template_id": template_id,
            "value": value,
            "count": policy.counts.get((state, template_id), 0),
        }
        for (state, template_id), value in sorted(
            policy.q.items(), key=lambda item: (item[0][0].key, item[0][1])
        )
    ]
    return json.dumps(
        {"epsilon": policy.epsilon, "alpha": policy.alpha, "q": cells},
        indent=2,
        sort_keys=True,
    )


def policy_from_json(text: str) -> ResponsePolicy:
    data = json.loads(text)
    q = {}
    counts = {}
    for cell in data.get("q", ()):
        key = (PolicyState.from_key(cell["state"]), cell["template_id"])
        q[key] = float(cell["value"])
        if int(cell.get("count", 0)) > 0:
            counts[key] = int(cell["count"])
    return ResponsePolicy(
        epsilon=float(data.get("epsilon", DEFAULT_EPSILON)),
        alpha=float(data.get("alpha", DEFAULT_ALPHA)),
        q=q,
        counts=counts,
    )
