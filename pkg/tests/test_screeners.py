"""Questionnaire tree loading, concept matching, and escalation state."""

import json
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alleviate.screeners import (
    Alert,
    ConceptMatch,
    QuestionnaireTree,
    TreeState,
    TreeValidationError,
    UnknownNode,
    advance,
    load_tree,
    match_concepts,
)
from oracles import ScreenerOracle, cosine_texts


def bundled_tree_text() -> str:
    return resources.files("alleviate.data").joinpath("severity_tree.json").read_text()


def bundled_corpus() -> list[dict]:
    text = resources.files("alleviate.data").joinpath("screener_corpus.json").read_text()
    return json.loads(text)


@pytest.fixture(scope="module")
def tree() -> QuestionnaireTree:
    return load_tree(bundled_tree_text())


def tree_json(nodes, root="a", tree_id="t"):
    return json.dumps({"tree_id": tree_id, "root": root, "nodes": nodes})


def node(node_id, severity, children=(), phrases=("some phrase",)):
    return {
        "node_id": node_id,
        "label": node_id,
        "severity": severity,
        "concept_phrases": list(phrases),
        "children": list(children),
    }


class TestLoadTree:
    def test_single_node(self):
        tree = load_tree(tree_json([node("a", 1)]))
        assert tree.root == "a" and tree.max_severity() == 1

    def test_bundled_tree_has_six_levels_on_deepest_path(self):
        tree = load_tree(bundled_tree_text())
        # DFS the child lists directly, without the library's helpers
        spec = json.loads(bundled_tree_text())
        children = {n["node_id"]: n["children"] for n in spec["nodes"]}
        severity = {n["node_id"]: n["severity"] for n in spec["nodes"]}

        def deepest(nid):
            if not children[nid]:
                return [severity[nid]]
            return [severity[nid]] + max((deepest(c) for c in children[nid]), key=len)

        assert deepest(spec["root"]) == [1, 2, 3, 4, 5, 6]
        assert tree.max_severity() == 6

    def test_non_increasing_severity_rejected(self):
        doc = tree_json([node("a", 2, children=["b"]), node("b", 2)])
        with pytest.raises(TreeValidationError, match="severity must increase"):
            load_tree(doc)

    def test_orphan_rejected(self):
        doc = tree_json([node("a", 1), node("b", 2)])
        with pytest.raises(TreeValidationError, match="unreachable"):
            load_tree(doc)

    def test_two_parents_rejected(self):
        doc = tree_json(
            [node("a", 1, children=["b", "c"]), node("b", 2, children=["c"]), node("c", 3)]
        )
        with pytest.raises(TreeValidationError, match="two parents"):
            load_tree(doc)

    def test_unknown_root_rejected(self):
        with pytest.raises(TreeValidationError, match="root"):
            load_tree(tree_json([node("a", 1)], root="zzz"))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(TreeValidationError, match="duplicate"):
            load_tree(tree_json([node("a", 1), node("a", 1)]))

    def test_empty_phrases_rejected(self):
        with pytest.raises(TreeValidationError, match="concept_phrases"):
            load_tree(tree_json([node("a", 1, phrases=())]))

    def test_bad_json_rejected(self):
        with pytest.raises(TreeValidationError, match="JSON"):
            load_tree("{nope")


class TestMatchConcepts:
    def test_identical_phrase_scores_one(self, tree):
        matches = match_concepts("i intend to act on these thoughts", tree, 0.70)
        assert matches and matches[0].node_id == "n4_intent"
        assert matches[0].score == pytest.approx(1.0)

    def test_neutral_utterance_matches_nothing(self, tree):
        assert match_concepts("the weather is nice", tree, 0.70) == []

    def test_plan_phrase_ranks_plan_node_first(self, tree):
        matches = match_concepts("I have a plan to kill myself tonight", tree, 0.70)
        assert matches[0].node_id == "n5_plan"
        assert matches[0].phrase == "i have a plan to kill myself tonight"

    def test_matches_sorted_by_severity_then_score(self, tree):
        matches = match_concepts("I want to end my life, I have a plan to end my life", tree, 0.5)
        severities = [tree.node(m.node_id).severity for m in matches]
        assert severities == sorted(severities, reverse=True)

    def test_scores_agree_with_hand_counter(self, tree):
        for utterance in ["Sometimes I wish I was dead", "I exercised 5 days this week"]:
            for node_ in tree.nodes.values():
                want = max(cosine_texts(utterance, p) for p in node_.concept_phrases)
                got = [m for m in match_concepts(utterance, tree, 0.01) if m.node_id == node_.node_id]
                if got:
                    assert got[0].score == pytest.approx(want, abs=1e-9)
                else:
                    assert want < 0.01

    @pytest.mark.parametrize("threshold", [0.0, 1.5, -0.2])
    def test_threshold_bounds(self, tree, threshold):
        with pytest.raises(ValueError):
            match_concepts("anything", tree, threshold)


class TestAdvance:
    def fresh(self) -> TreeState:
        return TreeState(tree_id="suicide-severity-v1", session_id="s-1")

    def test_empty_matches_identity(self, tree):
        state = self.fresh()
        new_state, alert = advance(state, tree, [], "m-1")
        assert new_state == state and alert is None

    def test_severity_five_match_escalates_to_emergency(self, tree):
        match = ConceptMatch("n5_plan", 1.0, "i have a plan to end my life")
        new_state, alert = advance(self.fresh(), tree, [match], "m-1")
        assert new_state.confirmed_level == 5
        assert new_state.escalation == "emergency"
        assert alert is not None and alert.level == "emergency"
        assert alert.triggering_node == "n5_plan"
        assert alert.evidence == ("m-1", "i have a plan to end my life", 1.0)

    def test_lower_match_after_high_state_keeps_level(self, tree):
        match5 = ConceptMatch("n5_plan", 1.0, "p")
        state, _ = advance(self.fresh(), tree, [match5], "m-1")
        match2 = ConceptMatch("n2_ideation", 0.9, "q")
        new_state, alert = advance(state, tree, [match2], "m-2")
        assert new_state.confirmed_level == 5
        assert alert is None

    def test_flag_then_emergency_gives_two_alerts(self, tree):
        state = self.fresh()
        state, alert1 = advance(state, tree, [ConceptMatch("n1_wish", 0.8, "w")], "m-1")
        assert alert1 is not None and alert1.level == "clinician_flag"
        state, alert2 = advance(state, tree, [ConceptMatch("n2_ideation", 0.8, "i")], "m-2")
        assert alert2 is None  # still clinician_flag
        state, alert3 = advance(state, tree, [ConceptMatch("n4_intent", 0.8, "t")], "m-3")
        assert alert3 is not None and alert3.level == "emergency"

    def test_custom_thresholds(self, tree):
        match = ConceptMatch("n2_ideation", 0.8, "i")
        _, alert = advance(
            self.fresh(), tree, [match], "m-1", thresholds={"flag_at": 3, "emergency_at": 6}
        )
        assert alert is None

    def test_unknown_node_raises(self, tree):
        with pytest.raises(UnknownNode):
            advance(self.fresh(), tree, [ConceptMatch("nope", 1.0, "x")], "m-1")

    def test_alert_round_trips_through_json(self, tree):
        match = ConceptMatch("n5_plan", 1.0, "p")
        _, alert = advance(self.fresh(), tree, [match], "m-1", created_at="2026-01-01T00:00:00Z")
        assert Alert.from_json(alert.to_json()) == alert


class TestOracleEquivalence:
    def test_corpus_trace_matches_oracle(self):
        tree = load_tree(bundled_tree_text())
        oracle = ScreenerOracle(json.loads(bundled_tree_text()), 0.70, 1, 4)
        state = TreeState(tree_id=tree.tree_id, session_id="s-1")
        for i, item in enumerate(bundled_corpus()):
            matches = match_concepts(item["text"], tree, 0.70)
            state, alert = advance(state, tree, matches, f"m-{i}")
            confirmed, escalation, oracle_alert = oracle.step(item["text"])
            assert state.confirmed_level == confirmed, item["text"]
            assert state.escalation == escalation, item["text"]
            assert (alert.level if alert else None) == oracle_alert, item["text"]

    def test_corpus_labels_match_per_utterance_severity(self):
        tree = load_tree(bundled_tree_text())
        for item in bundled_corpus():
            matches = match_concepts(item["text"], tree, 0.70)
            got = max((tree.node(m.node_id).severity for m in matches), default=0)
            assert got == item["label"], item["text"]

    @settings(max_examples=50, deadline=None)
    @given(order=st.permutations(list(range(20))))
    def test_final_level_is_permutation_invariant(self, order):
        tree = load_tree(bundled_tree_text())
        corpus = bundled_corpus()
        cached = [match_concepts(item["text"], tree, 0.70) for item in corpus]
        state = TreeState(tree_id=tree.tree_id, session_id="s-1")
        levels = []
        for i in order:
            state, _ = advance(state, tree, cached[i], f"m-{i}")
            levels.append(state.confirmed_level)
        assert levels == sorted(levels)  # monotone along the way
        assert state.confirmed_level == max(item["label"] for item in corpus)

    @settings(max_examples=50, deadline=None)
    @given(
        seq=st.lists(
            st.sampled_from(["n1_wish", "n2_ideation", "n3_method", "n4_intent", "n5_plan", "n6_behavior"]),
            max_size=12,
        )
    )
    def test_at_most_one_emergency_alert(self, seq):
        tree = load_tree(bundled_tree_text())
        state = TreeState(tree_id=tree.tree_id, session_id="s-1")
        emergencies = 0
        for i, node_id in enumerate(seq):
            state, alert = advance(state, tree, [ConceptMatch(node_id, 0.9, "p")], f"m-{i}")
            if alert is not None and alert.level == "emergency":
                emergencies += 1
        assert emergencies <= 1
