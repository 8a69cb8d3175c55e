#!/usr/bin/env python3
"""Drive the epsilon-greedy response policy with simulated +/-1 feedback and
watch the per-state template values separate and the greedy pick flip."""

import random
from collections import namedtuple

from alleviate.policy import PolicyState, ResponsePolicy, select_with_detail, update_policy

Arm = namedtuple("Arm", "template_id")

state = PolicyState("symptom_report")
arms = [Arm("t_hypo_direct"), Arm("t_hypo_gentle")]
# patients in this simulation respond much better to the gentle phrasing
rates = {"t_hypo_direct": 0.3, "t_hypo_gentle": 0.8}

policy = ResponsePolicy(epsilon=0.1, alpha=0.1)
rng = random.Random(42)

print(f"state {state.key!r}, epsilon={policy.epsilon}, alpha={policy.alpha}")
print(f"{'round':>6} {'q(direct)':>10} {'q(gentle)':>10}  greedy pick")
for i in range(1, 2001):
    chosen, explored = select_with_detail(state, arms, policy, rng.getrandbits(31))
    reward = 1.0 if rng.random() < rates[chosen.template_id] else -1.0
    policy = update_policy(policy, state, chosen.template_id, reward)
    if i in (1, 10, 50, 200, 1000, 2000):
        q_direct = policy.value(state, "t_hypo_direct")
        q_gentle = policy.value(state, "t_hypo_gentle")
        greedy = max(arms, key=lambda a: policy.value(state, a.template_id))
        print(f"{i:>6} {q_direct:>10.3f} {q_gentle:>10.3f}  {greedy.template_id}")

print("\nper-arm pull counts:", {t: policy.counts.get((state, t), 0) for t in rates})
print("expected rewards were 0.3*2-1 = -0.4 (direct) and 0.8*2-1 = +0.6 (gentle)")
