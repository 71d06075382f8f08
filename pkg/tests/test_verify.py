"""Four-part faithfulness verification."""

import dataclasses

import pytest

from chronoqa.answering import AnswerCandidate, CandidateKind, Mode, QAResult
from chronoqa.temporal import TemporalSignal, parse_value
from chronoqa.understand import Category, TSF
from chronoqa.verify import Verifier, aggregate_reports, stem

LAUTNER_Q = "What movies starring Taylor Lautner in 2011?"


@pytest.fixture(scope="module")
def verifier(index):
    return Verifier(index)


def lautner_tsf(ref):
    return TSF(("Taylor Lautner",), "What movies starring in 2011", "movies",
               TemporalSignal.OVERLAP, Category.NON_IMPLICIT,
               (parse_value("2011"),), ref)


def unfaithful_lautner_result(index, pipeline, ref):
    """The anecdote shape: answer Abduction supported only by the undated
    KB snippet, as an unpruned run's answering stage can select it."""
    kb = next(ev for ev in index.all_evidence() if ev.text == "Abduction, cast member, Taylor Lautner")
    kb = kb.with_mentions(pipeline.parser.extract_mentions(kb.text, ref))
    candidate = AnswerCandidate(CandidateKind.ENTITY, "Abduction", (kb.id,),
                                entity_id="q_abduction", type_labels=("film",), score=1.0)
    return QAResult(question=LAUTNER_Q, tsf=lautner_tsf(ref), answers=(candidate,),
                    refused=False, mode=Mode.UNFAITHFUL, fallback_used=False,
                    evidence={kb.id: kb})


class TestVerify:
    def test_faithful_run_passes_all_four(self, pipeline, verifier, ref):
        result = pipeline.answer(LAUTNER_Q, ref)
        report = verifier.verify(result)
        assert report.answer_present
        assert report.entities_present
        assert report.predicate_present
        assert report.temporal_satisfied
        assert report.faithful

    def test_unfaithful_kb_evidence_fails_the_temporal_criterion(self, index, pipeline, verifier, ref):
        report = verifier.verify(unfaithful_lautner_result(index, pipeline, ref))
        assert report.answer_present
        assert report.entities_present
        assert not report.temporal_satisfied
        assert not report.faithful

    def test_empty_evidence_fails_all_four(self, index, pipeline, verifier, ref):
        result = unfaithful_lautner_result(index, pipeline, ref)
        result = dataclasses.replace(result, evidence={})
        report = verifier.verify(result)
        assert not (report.answer_present or report.entities_present
                    or report.predicate_present or report.temporal_satisfied)

    def test_refused_result_rejected(self, pipeline, verifier, ref):
        refused = pipeline.answer("Who did Lady Jane Grey marry on the 25th of May 1533?", ref)
        with pytest.raises(ValueError):
            verifier.verify(refused)

    def test_rank_out_of_bounds(self, pipeline, verifier, ref):
        result = pipeline.answer(LAUTNER_Q, ref)
        with pytest.raises(ValueError):
            verifier.verify(result, rank=len(result.answers) + 1)

    def test_alias_accepted_for_answer_presence(self, pipeline, verifier, ref):
        result = pipeline.answer("What award did Thomas Keneally receive in the year 1982?", ref)
        report = verifier.verify(result)
        assert report.answer_present  # table row says "Booker Prize", label is "Man Booker Prize"
        assert report.faithful

    def test_temporal_answer_verification(self, pipeline, verifier, ref):
        result = pipeline.answer("When was Bohemian Rhapsody recorded?", ref)
        report = verifier.verify(result)
        assert report.answer_present and report.temporal_satisfied

    def test_monotone_in_evidence(self, index, pipeline, verifier, ref):
        sparse = unfaithful_lautner_result(index, pipeline, ref)
        table = next(ev for ev in index.all_evidence()
                     if ev.text == "Taylor Lautner, Year is 2011, Title is Abduction, Role is Nathan Harper")
        table = table.with_mentions(pipeline.parser.extract_mentions(table.text, ref))
        candidate = dataclasses.replace(
            sparse.answers[0],
            supporting_evidence=sparse.answers[0].supporting_evidence + (table.id,))
        richer = dataclasses.replace(sparse, answers=(candidate,),
                                     evidence={**sparse.evidence, table.id: table})
        before = verifier.verify(sparse)
        after = verifier.verify(richer)
        for name in ("answer_present", "entities_present", "predicate_present", "temporal_satisfied"):
            assert getattr(after, name) >= getattr(before, name)
        assert after.temporal_satisfied  # the dated row flips criterion (iv) on

    def test_synonym_table_rescues_predicate(self, index, pipeline, ref):
        result = unfaithful_lautner_result(index, pipeline, ref)
        strict = Verifier(index, theta=1.0)
        lenient = Verifier(index, theta=1.0,
                           synonyms={"movies": frozenset({"abduction"}),
                                     "starring": frozenset({"cast"}),
                                     "2011": frozenset({"cast"})})
        assert not strict.verify(result).predicate_present
        assert lenient.verify(result).predicate_present


class TestStem:
    @pytest.mark.parametrize("a,b", [
        ("movies", "movie"), ("awards", "award"), ("received", "receive"),
        ("starring", "star"), ("stories", "story"), ("recording", "recorded"),
    ])
    def test_equivalent_forms_share_a_stem(self, a, b):
        assert stem(a) == stem(b)

    def test_short_tokens_untouched(self):
        assert stem("is") == "is"
        assert stem("1982") == "1982"


def test_aggregate_reports(index, pipeline, ref):
    verifier = Verifier(index)
    faithful = verifier.verify(pipeline.answer(LAUTNER_Q, ref))
    unfaithful = verifier.verify(unfaithful_lautner_result(index, pipeline, ref))
    got = aggregate_reports([faithful, unfaithful])
    assert got["verified"] == 2
    assert got["faithful"] == 0.5
    assert got["temporally_unfaithful"] == 0.5
    assert aggregate_reports([]) == {"verified": 0, "faithful": 0.0, "temporally_unfaithful": 0.0}
