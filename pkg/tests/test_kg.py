import random

import pytest

from alleviate.kg import (
    DanglingLink,
    EntityId,
    InvalidTriple,
    KnowledgeGraph,
    Literal,
    Path,
    Provenance,
    Triple,
    UnknownEntity,
    entity,
    find_paths,
    from_tsv,
    merge_into,
    to_tsv,
    union,
)
from oracles import brute_force_paths, path_signature

KB = Provenance.knowledge_base("test-kb", "r1")


def t(s, p, o, conf=1.0, prov=KB):
    obj = entity(o) if isinstance(o, str) and ":" in o else o
    return Triple(entity(s), p, obj, conf, prov)


def graph_of(*triples):
    g = KnowledgeGraph("kb:test")
    for tr in triples:
        g.add_triple(tr)
    return g


class TestEntityId:
    def test_canonical_form(self):
        e = EntityId("patient", "p1")
        assert str(e) == "patient:p1"
        assert entity("patient:p1") == e

    def test_rejects_bad_namespace(self):
        with pytest.raises(InvalidTriple):
            EntityId("bogus", "x")

    def test_rejects_whitespace_and_uppercase(self):
        for bad in ("a b", "Foo", ""):
            with pytest.raises(InvalidTriple):
                EntityId("kb", bad)


class TestTriple:
    def test_confidence_bounds(self):
        with pytest.raises(InvalidTriple) as e:
            t("patient:p1", "takes", "kb:sertraline", conf=1.5)
        assert e.value.field_name == "confidence"

    def test_provenance_required(self):
        with pytest.raises(InvalidTriple):
            Triple(entity("patient:p1"), "takes", entity("kb:sertraline"), 1.0, None)

    def test_json_round_trip(self):
        for trp in (
            t("patient:p1", "takes", "kb:sertraline"),
            t("kb:sertraline", "dosage_mg", Literal(50)),
            t("kb:sertraline", "label", Literal("sertraline 50 mg")),
        ):
            assert Triple.from_json(trp.to_json()) == trp


class TestAddTriple:
    def test_insert_into_empty(self):
        g = KnowledgeGraph("patient:p1")
        assert g.add_triple(t("patient:p1", "takes", "kb:sertraline")) is True
        assert len(g) == 1

    def test_duplicate_is_idempotent(self):
        g = KnowledgeGraph("patient:p1")
        trp = t("patient:p1", "takes", "kb:sertraline")
        assert g.add_triple(trp) is True
        assert g.add_triple(trp) is False
        assert len(g) == 1

    def test_distinct_provenance_both_kept(self):
        g = KnowledgeGraph("patient:p1")
        p1 = Provenance.provider_note("n1", (0, 10))
        p2 = Provenance.provider_note("n2", (5, 15))
        assert g.add_triple(t("patient:p1", "takes", "kb:sertraline", prov=p1))
        assert g.add_triple(t("patient:p1", "takes", "kb:sertraline", prov=p2))
        # set-equality oracle: the two stored triples differ only in provenance
        assert {tr.provenance for tr in g.triples()} == {p1, p2}
        assert len(g) == 2

    def test_index_consistent_after_mutation(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:a", "s", "kb:c"))
        assert {str(tr.object) for tr in g.outgoing(entity("kb:a"))} == {"kb:b", "kb:c"}
        assert g.has_entity(entity("kb:c"))


class TestFindPaths:
    def test_single_edge(self):
        g = graph_of(t("kb:a", "r", "kb:b"))
        paths = find_paths(g, entity("kb:a"), ["r"], entity("kb:b"))
        assert len(paths) == 1
        assert [str(n) for n in paths[0].nodes] == ["kb:a", "kb:b"]

    def test_two_hop_wildcard_end(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:b", "s", "kb:c"))
        paths = find_paths(g, entity("kb:a"), ["r", "s"], "*")
        assert len(paths) == 1
        assert paths[0].predicates == ("r", "s")
        assert [str(n) for n in paths[0].nodes] == ["kb:a", "kb:b", "kb:c"]

    def test_no_matching_predicate(self):
        g = graph_of(t("kb:a", "r", "kb:b"))
        assert find_paths(g, entity("kb:a"), ["q"], entity("kb:b")) == []

    def test_unknown_start_raises(self):
        g = graph_of(t("kb:a", "r", "kb:b"))
        with pytest.raises(UnknownEntity):
            find_paths(g, entity("kb:zzz"), ["r"], "*")

    def test_wildcard_predicate(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:a", "s", "kb:c"))
        paths = find_paths(g, entity("kb:a"), ["*"], "*")
        assert [str(p.nodes[-1]) for p in paths] == ["kb:b", "kb:c"]

    def test_simple_paths_skip_cycles(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:b", "r", "kb:a"))
        assert find_paths(g, entity("kb:a"), ["r", "r"], "*") == []

    def test_literal_objects_not_traversed(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:a", "r", Literal("fifty")))
        paths = find_paths(g, entity("kb:a"), ["r"], "*")
        assert len(paths) == 1

    def test_precondition_bounds(self):
        g = graph_of(t("kb:a", "r", "kb:b"))
        with pytest.raises(ValueError):
            find_paths(g, entity("kb:a"), ["r"], "*", max_len=7)
        with pytest.raises(ValueError):
            find_paths(g, entity("kb:a"), ["r", "r"], "*", max_len=1)

    def test_path_soundness_replay(self):
        g = graph_of(t("kb:a", "r", "kb:b"), t("kb:b", "s", "kb:c"), t("kb:a", "r", "kb:c"))
        for p in find_paths(g, entity("kb:a"), ["r", "*"], "*"):
            assert p.replays_against(g)

    @pytest.mark.parametrize("seed", range(8))
    def test_completeness_vs_brute_force(self, seed):
        rng = random.Random(seed)
        names = [f"kb:n{i}" for i in range(rng.randint(4, 12))]
        preds = ["r", "s", "q"]
        g = KnowledgeGraph("kb:rand")
        for _ in range(rng.randint(5, 40)):
            a, b = rng.sample(names, 2)
            g.add_triple(
                t(a, rng.choice(preds), b, prov=Provenance.knowledge_base("test-kb", f"r{rng.randint(0, 9)}"))
            )
        start = entity(rng.choice(names))
        pattern = [rng.choice(preds + ["*"]) for _ in range(rng.randint(1, 3))]
        end = "*" if rng.random() < 0.5 else entity(rng.choice(names))
        if not g.has_entity(start):
            return
        got = find_paths(g, start, pattern, end)
        want = brute_force_paths(g.triples(), start, pattern, end)
        assert {path_signature(p.nodes, p.predicates, [e.provenance for e in p.edges]) for p in got} == want
        # determinism: re-running yields the identical ordered list
        assert got == find_paths(g, start, pattern, end)

    def test_sorted_output(self):
        g = graph_of(t("kb:a", "r", "kb:c"), t("kb:a", "r", "kb:b"))
        paths = find_paths(g, entity("kb:a"), ["r"], "*")
        assert [str(p.nodes[-1]) for p in paths] == ["kb:b", "kb:c"]


class FakeLink:
    def __init__(self, source, target, score=0.92, link_id="l1"):
        self.source = entity(source)
        self.target = entity(target)
        self.score = score
        self.link_id = link_id


class TestMergeInto:
    def setup_method(self):
        self.pkg = graph_of(t("patient:p1", "takes", "kb:sert"))
        self.kb = graph_of(t("kb:sertraline", "has_side_effect", "kb:dizziness"))

    def test_single_bridge(self):
        before = len(self.pkg)
        report = merge_into(self.pkg, self.kb, [FakeLink("kb:sert", "kb:sertraline")])
        assert (report.added, report.skipped) == (1, 0)
        # triple-set diff oracle: exactly one new triple, a same_as bridge
        new = [tr for tr in self.pkg.triples() if tr.predicate == "same_as"]
        assert len(self.pkg) - before == 1 and len(new) == 1
        assert str(new[0].object) == "kb:sertraline"

    def test_empty_links_identity(self):
        key = self.pkg.content_key()
        report = merge_into(self.pkg, self.kb, [])
        assert (report.added, report.skipped) == (0, 0)
        assert self.pkg.content_key() == key

    def test_merge_idempotent(self):
        link = FakeLink("kb:sert", "kb:sertraline")
        merge_into(self.pkg, self.kb, [link])
        report = merge_into(self.pkg, self.kb, [link])
        assert (report.added, report.skipped) == (0, 1)

    def test_kb_never_mutated(self):
        key = self.kb.content_key()
        merge_into(self.pkg, self.kb, [FakeLink("kb:sert", "kb:sertraline")])
        assert self.kb.content_key() == key

    def test_dangling_link(self):
        with pytest.raises(DanglingLink):
            merge_into(self.pkg, self.kb, [FakeLink("kb:nope", "kb:sertraline")])

    def test_monotone_triple_count(self):
        before = len(self.pkg)
        merge_into(self.pkg, self.kb, [FakeLink("kb:sert", "kb:sertraline")])
        assert len(self.pkg) >= before


class TestSnapshot:
    def test_tsv_round_trip(self):
        g = graph_of(
            t("patient:p1", "takes", "kb:sertraline", prov=Provenance.provider_note("n1", (0, 30))),
            t("kb:sertraline", "dosage_mg", Literal(50)),
            t("kb:sertraline", "label", Literal("sertraline")),
            t("kb:visit", "on_date", Literal(__import__("datetime").date(2026, 1, 15))),
            t("kb:sertraline", "dose", Literal(50, unit="mg"), conf=0.8),
        )
        text = to_tsv(g)
        back = from_tsv(text, g.graph_id)
        assert back.content_key() == g.content_key()
        # second round trip is byte-identical
        assert to_tsv(back) == text

    def test_comments_ignored(self):
        g = from_tsv("# comment only\n\n", "kb:x")
        assert len(g) == 0

    def test_union_keeps_all(self):
        a = graph_of(t("kb:a", "r", "kb:b"))
        b = graph_of(t("kb:b", "s", "kb:c"))
        u = union("kb:u", a, b)
        assert len(u) == 2


class TestPath:
    def test_rejects_mismatched_edges(self):
        e1 = t("kb:a", "r", "kb:b")
        with pytest.raises(ValueError):
            Path((entity("kb:a"), entity("kb:c")), (e1,))

    def test_rejects_repeated_node(self):
        e1 = t("kb:a", "r", "kb:b")
        e2 = t("kb:b", "r", "kb:a")
        with pytest.raises(ValueError):
            Path((entity("kb:a"), entity("kb:b"), entity("kb:a")), (e1, e2))
