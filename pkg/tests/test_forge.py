"""Benchmark generation: sampling, gathering, pairing, assembly, emission."""

import json
from pathlib import Path

import pytest

from chronoqa.forge import (
    Band,
    Forge,
    ForgeError,
    assemble_pseudo,
    band_of,
    emit,
    gather_snippets,
    pair_snippets,
    rephrase,
    sample_topics,
    token_jaccard,
)
from chronoqa.temporal import TemporalSignal

ALICIA_PSEUDO = ("What album Alicia Keys followed up her debut with which was released, "
                 "during, Norah Jones award received Grammy Award for Best New Artist "
                 "follows Alicia Keys?")


@pytest.fixture(scope="module")
def forge(index, pipeline):
    from chronoqa.temporal import TimePoint
    return Forge(index, pipeline.parser, TimePoint(2023, 5, 1), sigma=0.35)


@pytest.fixture(scope="module")
def quotas():
    return {Band.LONG_TAIL: 4, Band.MID: 3, Band.PROMINENT: 3}


class TestSampling:
    def test_band_assignment_thresholds(self, index):
        assert band_of(index.entities["q_mercier"]) is Band.LONG_TAIL      # 9 facts
        assert band_of(index.entities["q_keneally"]) is Band.MID           # 150 facts
        assert band_of(index.entities["q_queen"]) is Band.PROMINENT        # 820 facts

    def test_quota_counts_and_determinism(self, index, forge, quotas):
        eligible = forge.eligible_topics()
        first = sample_topics(index, 10, quotas, seed=7, eligible_ids=eligible)
        second = sample_topics(index, 10, quotas, seed=7, eligible_ids=eligible)
        assert [s.entity.id for s in first] == [s.entity.id for s in second]
        bands = [s.band for s in first]
        assert bands.count(Band.LONG_TAIL) == 4
        assert bands.count(Band.MID) == 3
        assert bands.count(Band.PROMINENT) == 3

    def test_seed_changes_sample_not_counts(self, index, forge, quotas):
        eligible = forge.eligible_topics()
        a = sample_topics(index, 10, quotas, seed=7, eligible_ids=eligible)
        b = sample_topics(index, 10, quotas, seed=8, eligible_ids=eligible)
        assert [s.entity.id for s in a] != [s.entity.id for s in b]
        assert [s.band for s in a].count(Band.MID) == [s.band for s in b].count(Band.MID)

    def test_type_cap_binds(self, index, forge):
        eligible = forge.eligible_topics()
        samples = sample_topics(index, 10, {Band.LONG_TAIL: 4, Band.MID: 3, Band.PROMINENT: 3},
                                type_cap=0.10, seed=7, eligible_ids=eligible)
        primaries = [s.entity.types[0] for s in samples if s.entity.types]
        assert all(primaries.count(t) <= 1 for t in primaries)

    def test_oversized_request_rejected(self, index):
        with pytest.raises(ForgeError, match="eligible entities"):
            sample_topics(index, 10_000)

    def test_unsatisfiable_quota_names_the_constraint(self, index, forge):
        with pytest.raises(ForgeError, match="prominent"):
            sample_topics(index, 12, {Band.LONG_TAIL: 4, Band.MID: 2, Band.PROMINENT: 6},
                          eligible_ids=forge.eligible_topics())


class TestGather:
    def test_alicia_text_snippet_with_value(self, index, forge, ref):
        snippets = gather_snippets(index, index.entities["q_alicia"], forge.parser, ref)
        diary = next(s for s in snippets if "The Diary of Alicia Keys" in s.evidence.text)
        assert diary.value.render() == "2003-12"

    def test_undatable_entity_yields_nothing(self, index, forge, ref):
        assert gather_snippets(index, index.entities["q_veysonnaz"], forge.parser, ref) == []

    def test_only_first_five_sentences_considered(self, index, forge, ref, tmp_path):
        import shutil
        from chronoqa.corpus import ingest
        src = Path(index.paths["entities"]).parent
        for f in src.glob("*.jsonl"):
            shutil.copy(f, tmp_path / f.name)
        with (tmp_path / "text.jsonl").open("a", encoding="utf-8") as fh:
            sentences = " ".join("Event number %d happened in %d." % (i, 1900 + i) for i in range(7))
            fh.write(json.dumps({"entity": "q_veysonnaz", "page_title": "Veysonnaz",
                                 "text": sentences, "anchors": []}) + "\n")
        idx = ingest(tmp_path)
        snippets = gather_snippets(idx, idx.entities["q_veysonnaz"], forge.parser, ref)
        assert len(snippets) == 5

    def test_tables_excluded(self, index, forge, ref):
        snippets = gather_snippets(index, index.entities["q_lautner"], forge.parser, ref)
        assert snippets == []  # the filmography rows are table evidence

    def test_year_page_events_included(self, index, forge, ref):
        snippets = gather_snippets(index, index.entities["q_keneally"], forge.parser, ref)
        assert any(s.evidence.provenance.get("entity") == "yp1982" for s in snippets)


class TestPairing:
    def test_the_during_pair(self, index, forge, ref):
        topic = index.entities["q_alicia"]
        snippets = gather_snippets(index, topic, forge.parser, ref)
        pairs = pair_snippets(snippets, "during", topic, index, sigma=0.5)
        assert len(pairs) == 1
        pair = pairs[0]
        assert "The Diary of Alicia Keys" in pair.main.evidence.text
        assert pair.implicit.evidence.source.value == "kb"
        assert pair.answer.id == "q_diary"
        assert pair.distractors

    def test_reversed_conjunction_rejected(self, index, forge, ref):
        topic = index.entities["q_alicia"]
        snippets = gather_snippets(index, topic, forge.parser, ref)
        before_pairs = pair_snippets(snippets, "before", topic, index, sigma=0.5)
        assert not any("The Diary of Alicia Keys" in p.main.evidence.text
                       and p.implicit.evidence.source.value == "kb" for p in before_pairs)

    def test_no_distractor_no_pair(self, index, forge, ref):
        topic = index.entities["q_norah"]  # all snippets share the 2003 scope
        snippets = gather_snippets(index, topic, forge.parser, ref)
        for conjunction in ("during", "before", "after"):
            assert pair_snippets(snippets, conjunction, topic, index, sigma=0.35) == []

    def test_jaccard(self):
        assert token_jaccard("a b c", "a b d") == pytest.approx(2 / 4)
        assert token_jaccard("", "a") == 0.0


class TestAssembly:
    def test_paper_pseudo_question_byte_exact(self, index, forge, ref):
        topic = index.entities["q_alicia"]
        snippets = gather_snippets(index, topic, forge.parser, ref)
        pair = pair_snippets(snippets, "during", topic, index, sigma=0.5)[0]
        assert assemble_pseudo(pair, index, forge.parser, ref) == ALICIA_PSEUDO

    def test_kb_qualifier_phrases_removed(self, index, forge, ref):
        topic = index.entities["q_mercier"]
        snippets = gather_snippets(index, topic, forge.parser, ref)
        pair = pair_snippets(snippets, "before", topic, index, sigma=0.35)[0]
        pseudo = assemble_pseudo(pair, index, forge.parser, ref)
        assert "start time" not in pseudo and "end time" not in pseudo
        assert not any(ch.isdigit() for ch in pseudo)

    def test_rephrase_passthrough(self):
        got = rephrase(ALICIA_PSEUDO)
        assert not got.natural and got.warning is None
        assert got.text.count(",") == 0
        assert " during " in got.text

    def test_rephrase_endpoint(self):
        got = rephrase(ALICIA_PSEUDO, rephraser=lambda p: "What album did Alicia Keys release "
                       "when Norah Jones won the Grammy Award for Best New Artist?")
        assert got.natural
        assert got.text.startswith("What album did Alicia Keys release")

    def test_rephrase_endpoint_failure_falls_back(self):
        def broken(pseudo):
            raise OSError("connection reset")
        got = rephrase(ALICIA_PSEUDO, rephraser=broken)
        assert not got.natural and "rephraser failed" in got.warning


class TestRunAndEmit:
    def test_every_item_validates(self, index, forge, quotas):
        items, _ = forge.run(10, quotas, seed=7)
        assert len(items) >= 5
        for item in items:
            assert forge.validate_item(item) == []
            assert item.signal is {"during": TemporalSignal.OVERLAP,
                                   "before": TemporalSignal.BEFORE,
                                   "after": TemporalSignal.AFTER}[item.conjunction]

    def test_answer_absent_from_question(self, index, forge, quotas):
        items, _ = forge.run(10, quotas, seed=7)
        for item in items:
            lowered = item.question.lower()
            for form in item.answer.surface_forms():
                assert form.lower() not in lowered

    def test_split_ratios(self, index, forge, quotas, tmp_path):
        items, _ = forge.run(10, quotas, seed=7)
        paths = emit(items, tmp_path, index, (0.6, 0.2, 0.2), seed=7)
        counts = {name: len(Path(p).read_text(encoding="utf-8").splitlines())
                  for name, p in paths.items() if name != "pairs"}
        m = len(items)
        assert counts["train"] == int(0.6 * m)
        assert counts["dev"] == int(0.2 * m)
        assert counts["train"] + counts["dev"] + counts["test"] == m

    def test_all_train_ratio(self, index, forge, quotas, tmp_path):
        items, _ = forge.run(10, quotas, seed=7)
        paths = emit(items, tmp_path, index, (1.0, 0.0, 0.0), seed=7)
        assert len(Path(paths["train"]).read_text(encoding="utf-8").splitlines()) == len(items)
        assert Path(paths["dev"]).read_text(encoding="utf-8") == ""

    def test_emit_is_byte_identical(self, index, forge, quotas, tmp_path):
        items, _ = forge.run(10, quotas, seed=7)
        first = emit(items, tmp_path / "a", index, seed=7)
        second = emit(items, tmp_path / "b", index, seed=7)
        for name in first:
            assert Path(first[name]).read_bytes() == Path(second[name]).read_bytes()

    def test_training_pairs_follow_interval_rule(self, index, forge, quotas, tmp_path):
        items, _ = forge.run(10, quotas, seed=7)
        paths = emit(items, tmp_path, index, seed=7)
        pairs = [json.loads(line) for line in
                 Path(paths["pairs"]).read_text(encoding="utf-8").splitlines()]
        n_interval = sum(1 for item in items if item.temporal_value.is_interval)
        n_point = len(items) - n_interval
        assert len(pairs) == 2 * n_interval + n_point
        for pair in pairs:
            assert pair["question"].startswith("when ")

    def test_provenance_resolves_for_all_items(self, index, forge, quotas):
        from chronoqa.corpus import reverbalize
        items, _ = forge.run(10, quotas, seed=7)
        for item in items:
            assert reverbalize(index, item.main_evidence.id) == item.main_evidence.text
            assert reverbalize(index, item.implicit_evidence.id) == item.implicit_evidence.text

    def test_generated_questions_are_answerable(self, index, forge, quotas, pipeline):
        # self-consistency: the engine answers its own benchmark at rank 1
        from chronoqa.evaluation import GoldAnswer, match_answer
        items, _ = forge.run(10, quotas, seed=7)
        for item in items:
            result = pipeline.answer(item.question, item.reference_time)
            assert result.answers, item.question
            gold = GoldAnswer((item.answer.label,), item.answer.aliases, item.answer.id)
            assert match_answer(result.answers[0], gold), item.question

    def test_bad_ratios_rejected(self, index, forge, quotas, tmp_path):
        items, _ = forge.run(10, quotas, seed=7)
        with pytest.raises(ForgeError):
            emit(items, tmp_path, index, (0.5, 0.2, 0.2), seed=7)
