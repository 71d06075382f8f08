"""Acceptance suite: one test per criterion, with a pass/fail summary line.

Oracles here are independent of the code paths they check: the temporal
oracle enumerates calendar days with datetime, the metrics oracle scans
full ranked lists, and forge items are re-validated against the
day-enumeration oracle rather than the pipeline's own algebra.
"""

import datetime
import random
import time
from fractions import Fraction
from pathlib import Path

from chronoqa.answering import FallbackPolicy, Mode
from chronoqa.corpus import reverbalize
from chronoqa.evaluation import (
    EvalItem,
    GoldAnswer,
    build_run_record,
    corrupt_questions,
    first_match_rank,
    match_answer,
    metrics,
    presence_trace,
)
from chronoqa.forge import Band, Forge, emit, gather_snippets, token_jaccard
from chronoqa.retrieval import temporal_prune
from chronoqa.corpus import Evidence, Source
from chronoqa.tempex import TemporalMention
from chronoqa.temporal import (
    TemporalConstraint,
    TemporalSignal,
    TemporalValue,
    TimePoint,
    intersect,
    parse_value,
    satisfies,
)
from chronoqa.understand import Category, TSF, parse_tsf, serialize_tsf
from chronoqa.verify import Verifier

from tests.conftest import REFERENCE_TIME


def record(log, number: int, description: str, ok: bool):
    log.append("[%d] %s - %s" % (number, "PASS" if ok else "FAIL", description))
    assert ok, "acceptance criterion %d failed: %s" % (number, description)


# -- independent oracles ---------------------------------------------------------


def enumerate_days(value: TemporalValue) -> set[int]:
    start = value.begin.first_day()
    end = value.last.last_day()
    out = set()
    day = start
    while day <= end:
        out.add(day.toordinal())
        day += datetime.timedelta(days=1)
    return out


class DayOracle:
    def __init__(self):
        self._cache = {}

    def days(self, value: TemporalValue) -> set[int]:
        key = value.render()
        if key not in self._cache:
            self._cache[key] = enumerate_days(value)
        return self._cache[key]

    def satisfies(self, evidence: TemporalValue, constraint: TemporalConstraint) -> bool:
        e = self.days(evidence)
        if constraint.signal is TemporalSignal.OVERLAP:
            return bool(e & self.days(constraint.value))
        if constraint.signal is TemporalSignal.AFTER:
            return min(e) >= min(self.days(TemporalValue(constraint.value.last)))
        return max(e) <= max(self.days(TemporalValue(constraint.value.begin)))

    def intersect(self, a: TemporalValue, b: TemporalValue):
        shared = self.days(a) & self.days(b)
        if not shared:
            return None
        return (min(shared), max(shared))


def value_pool(seed: int = 41) -> list[TemporalValue]:
    """YEAR/MONTH/DAY points and intervals within 1990-1995."""
    rng = random.Random(seed)
    points = [TimePoint(y) for y in range(1990, 1996)]
    points += [TimePoint(y, m) for y in range(1990, 1996) for m in range(1, 13)]
    day_points = []
    for _ in range(30):
        day_points.append(TimePoint(rng.randint(1990, 1995), rng.randint(1, 12), rng.randint(1, 28)))
    pool = [TemporalValue(p) for p in points + day_points]
    anchors = points + day_points
    intervals = []
    while len(intervals) < 20:
        a, b = rng.choice(anchors), rng.choice(anchors)
        if a.first_day() <= b.last_day():
            intervals.append(TemporalValue(a, b))
    return pool + intervals


def test_criterion_1_temporal_algebra_oracle_equivalence(acceptance_log):
    started = time.monotonic()
    pool = value_pool()
    oracle = DayOracle()
    pairs = 0
    agree = True
    signals = (TemporalSignal.OVERLAP, TemporalSignal.BEFORE, TemporalSignal.AFTER)
    for a in pool:
        for b in pool:
            pairs += 1
            for signal in signals:
                constraint = TemporalConstraint(signal, b)
                if satisfies(a, constraint) != oracle.satisfies(a, constraint):
                    agree = False
            got = intersect(a, b)
            expected = oracle.intersect(a, b)
            if (got is None) != (expected is None):
                agree = False
            elif got is not None and (got.start_day, got.end_day) != expected:
                agree = False
    elapsed = time.monotonic() - started
    record(acceptance_log, 1, "algebra agrees with the day-enumeration oracle on %d pairs in %.1fs"
              % (pairs, elapsed),
           agree and pairs >= 10_000 and elapsed < 60)


def test_criterion_2_bit_exact_verbalization(acceptance_log, index):
    targets = [
        "Man Booker Prize, winner, Thomas Keneally, point in time, 1982, for work, Schindler's Ark",
        "Thomas Keneally, Awards is Booker Prize, is Schindler's Ark, winner 1982",
        "Antoine Raab, Managerial career, 1946–1949, FC Nantes",
        "Antoine Raab, After the liberation of Nantes in 1944 Raab joined FC Nantes "
        "and played for the club until 1949.",
        "Taylor Lautner, Year is 2011, Title is Abduction, Role is Nathan Harper",
    ]
    by_text = {ev.text: ev.id for ev in index.all_evidence()}
    ok = all(t in by_text for t in targets)
    # and each one reproduces byte-identically from its provenance locator
    ok = ok and all(reverbalize(index, by_text[t]) == t for t in targets if t in by_text)
    record(acceptance_log, 2, "five anecdote evidence strings reproduce character-for-character", ok)


def test_criterion_3_tsf_serialization(acceptance_log, pipeline):
    tsf = pipeline.understand("Record company of Queen in 1975?", REFERENCE_TIME)
    exact = serialize_tsf(tsf) == \
        "Queen||Record company of in 1975||record company||overlap||non-implicit"
    rng = random.Random(9)
    words = ["band", "label", "award", "winner", "club", "member", "captain", "release"]
    signals = [TemporalSignal.OVERLAP, TemporalSignal.BEFORE, TemporalSignal.AFTER,
               TemporalSignal.NONE]
    round_trips = 0
    for _ in range(100):
        signal = rng.choice(signals)
        category = Category.NON_IMPLICIT if signal is TemporalSignal.NONE else \
            rng.choice([Category.IMPLICIT, Category.NON_IMPLICIT])
        frame = TSF(tuple(rng.sample(words, rng.randint(0, 3))),
                    " ".join(rng.sample(words, 4)), rng.choice(words), signal, category,
                    (), REFERENCE_TIME)
        if serialize_tsf(parse_tsf(serialize_tsf(frame), REFERENCE_TIME)) == serialize_tsf(frame):
            round_trips += 1
    record(acceptance_log, 3, "q1 frame serializes exactly and 100/100 generated frames round-trip",
           exact and round_trips == 100)


def test_criterion_4_recursive_resolution(acceptance_log, pipeline, index):
    raab = pipeline.answer(
        "After managing FC Nantes, which football club did Antoine Raab take on next?",
        REFERENCE_TIME)
    raab_ok = (
        not raab.refused
        and [v.render() for v in raab.tsf.temporal_values] == ["1946/1949"]
        and raab.answers[0].label == "Stade Lavallois"
        and any(index.evidence[eid].text ==
                "Antoine Raab, Managerial career, 1949–1950, Stade Lavallois"
                for eid in raab.answers[0].supporting_evidence)
    )
    keneally = pipeline.answer("What award did Thomas Keneally receive in the year 1982?",
                               REFERENCE_TIME)
    keneally_ok = (
        not keneally.refused
        and match_answer(keneally.answers[0],
                         GoldAnswer(("Booker Prize",), ("Man Booker Prize",), "q_booker"))
        and len(keneally.answers[0].supporting_evidence) >= 2
    )
    record(acceptance_log, 4, "Raab resolves to [1946, 1949] with the infobox snippet; "
              "Keneally answers the prize at rank 1 with >= 2 snippets",
           raab_ok and keneally_ok)


def _co_mention_entities(index):
    out = []
    for eid in sorted(index.entities):
        entity = index.entities[eid]
        if entity.types and entity.types[0] == "calendar year":
            continue
        for ev in index.retrieve_by_entity(eid):
            if ev.entity_ids() - {eid}:
                out.append(entity)
                break
    return out


def test_criterion_5_refusal_on_corrupted_questions(acceptance_log, pipeline, index):
    pool = _co_mention_entities(index)
    items = []
    for i in range(200):
        entity = pool[i % len(pool)]
        year = 1950 + (i % 60)
        items.append(EvalItem(
            "corrupt-%03d" % i,
            "Which entity was linked to %s in %d?" % (entity.label, year),
            GoldAnswer((entity.label,)), REFERENCE_TIME))
    corrupted, warnings = corrupt_questions(items, seed=23, pipeline=pipeline)
    n = len(corrupted)
    refused = 0
    unfaithful_answered = 0
    fallback_flagged = 0
    for item in corrupted:
        faithful = pipeline.answer(item.question, item.reference_time)
        refused += faithful.refused
        unfaithful = pipeline.answer(item.question, item.reference_time, mode=Mode.UNFAITHFUL)
        unfaithful_answered += bool(unfaithful.answers)
        fallback = pipeline.answer(item.question, item.reference_time,
                                   fallback=FallbackPolicy.ON_REFUSAL)
        fallback_flagged += (fallback.fallback_used and bool(fallback.answers)
                             and any("fallback" in w for w in fallback.warnings))
    record(acceptance_log, 5, "%d/%d corrupted questions refused faithfully; %d answered unfaithfully; "
              "%d flagged fallback answers" % (refused, n, unfaithful_answered, fallback_flagged),
           not warnings and n == 200 and refused == n
           and unfaithful_answered >= 1 and fallback_flagged == n)


def test_criterion_6_faithfulness_soundness(acceptance_log, pipeline, index):
    verifier = Verifier(index)
    constrained_questions = [
        "What award did Thomas Keneally receive in the year 1982?",
        "Record company of Queen in 1975?",
        "Queen's record company when recording Bohemian Rhapsody?",
        "Queen's lead singer after Freddie Mercury?",
        "What movies starring Taylor Lautner in 2011?",
        "After managing FC Nantes, which football club did Antoine Raab take on next?",
    ]
    sound = 0
    answered = 0
    for question in constrained_questions:
        result = pipeline.answer(question, REFERENCE_TIME)
        if result.refused or not result.tsf.has_constraint:
            continue
        answered += 1
        sound += verifier.verify(result, rank=1).temporal_satisfied

    # the unfaithful anecdote shape: the same answer supported only by the
    # undated KB snippet fails exactly the temporal criterion
    from chronoqa.answering import AnswerCandidate, CandidateKind, QAResult
    kb = next(ev for ev in index.all_evidence()
              if ev.text == "Abduction, cast member, Taylor Lautner")
    kb = kb.with_mentions(pipeline.parser.extract_mentions(kb.text, REFERENCE_TIME))
    lautner_frame = pipeline.understand("What movies starring Taylor Lautner in 2011?",
                                        REFERENCE_TIME)
    unfaithful = QAResult(
        question="What movies starring Taylor Lautner in 2011?", tsf=lautner_frame,
        answers=(AnswerCandidate(CandidateKind.ENTITY, "Abduction", (kb.id,),
                                 entity_id="q_abduction", type_labels=("film",)),),
        refused=False, mode=Mode.UNFAITHFUL, fallback_used=False, evidence={kb.id: kb})
    unfaithful_report = verifier.verify(unfaithful, rank=1)
    record(acceptance_log, 6, "temporal criterion passes for %d/%d faithful answers and fails for the "
              "unfaithful KB-only evidence" % (sound, answered),
           answered == len(constrained_questions) and sound == answered
           and unfaithful_report.answer_present and not unfaithful_report.temporal_satisfied)


def test_criterion_7_metrics_against_oracle(acceptance_log):
    from chronoqa.answering import AnswerCandidate, CandidateKind, QAResult
    from chronoqa.evaluation import RunRecord

    rng = random.Random(99)
    gold = GoldAnswer(("gold",))

    def synthetic_record(qid, rank, n):
        labels = ["decoy-%s-%d" % (qid, i) for i in range(n)]
        if rank is not None:
            labels[rank - 1] = "gold"
        answers = tuple(
            AnswerCandidate(CandidateKind.ENTITY, label, ("ev",)) for label in labels)
        tsf = TSF((), "r", "t", TemporalSignal.NONE, Category.NON_IMPLICIT, (), REFERENCE_TIME)
        result = QAResult(question=qid, tsf=tsf, answers=answers, refused=False,
                          mode=Mode.FAITHFUL, fallback_used=False)
        found = first_match_rank(result, gold)
        return RunRecord(qid, result, gold,
                         retrieved=rank is not None, survived_prune=rank is not None,
                         survived_cut=rank is not None,
                         in_top5=found is not None and found <= 5,
                         at_rank1=found == 1)

    records = []
    for i in range(1000):
        n = rng.randint(1, 12)
        rank = rng.choice([None] + list(range(1, n + 1)))
        records.append(synthetic_record("s%04d" % i, rank, n))

    got = metrics(records)

    # brute-force oracle: scan every full ranked list independently
    p1 = Fraction(0)
    mrr = Fraction(0)
    hit5 = Fraction(0)
    for rec in records:
        rank = None
        for position, candidate in enumerate(rec.result.answers, 1):
            if candidate.label.lower() in [l.lower() for l in rec.gold.surface_forms()]:
                rank = position
                break
        if rank is not None:
            p1 += int(rank == 1)
            mrr += Fraction(1, rank)
            hit5 += int(rank <= 5)
    n = len(records)
    oracle = {"P@1": p1 / n, "MRR": mrr / n, "Hit@5": hit5 / n}

    worked = metrics([synthetic_record("w1", 1, 6), synthetic_record("w2", 2, 6),
                      synthetic_record("w3", None, 6), synthetic_record("w4", 4, 6)])
    record(acceptance_log, 7, "P@1/MRR/Hit@5 equal the oracle exactly on 1000 runs; worked MRR = 0.4375",
           got == oracle and worked["MRR"] == Fraction(7, 16))


def test_criterion_8_forge_validity(acceptance_log, index, pipeline, tmp_path):
    oracle = DayOracle()
    forge = Forge(index, pipeline.parser, REFERENCE_TIME, sigma=0.35)
    quotas = {Band.LONG_TAIL: 4, Band.MID: 3, Band.PROMINENT: 3}
    items, _ = forge.run(10, quotas, seed=7)

    all_valid = bool(items)
    for item in items:
        main_mentions = pipeline.parser.extract_mentions(item.main_evidence.text, REFERENCE_TIME)
        impl_mentions = pipeline.parser.extract_mentions(item.implicit_evidence.text, REFERENCE_TIME)
        main_value, impl_value = main_mentions[0].value, impl_mentions[0].value
        if item.conjunction == "during":
            consistent = oracle.intersect(main_value, impl_value) is not None
        else:
            constraint = TemporalConstraint(
                TemporalSignal.BEFORE if item.conjunction == "before" else TemporalSignal.AFTER,
                impl_value)
            consistent = oracle.satisfies(main_value, constraint)
        leak = any(form.lower() in item.question.lower() for form in item.answer.surface_forms())
        provenance_ok = (reverbalize(index, item.main_evidence.id) == item.main_evidence.text
                         and reverbalize(index, item.implicit_evidence.id) == item.implicit_evidence.text)
        snippets = gather_snippets(index, item.topic, pipeline.parser, REFERENCE_TIME)
        distractor_ok = any(
            s.evidence.id not in (item.main_evidence.id, item.implicit_evidence.id)
            and token_jaccard(s.evidence.text, item.main_evidence.text) >= forge.sigma
            and oracle.intersect(s.value, main_value) is None
            for s in snippets)
        all_valid = all_valid and consistent and not leak and provenance_ok and distractor_ok

    paths_a = emit(items, tmp_path / "a", index, (0.6, 0.2, 0.2), seed=7)
    paths_b = emit(items, tmp_path / "b", index, (0.6, 0.2, 0.2), seed=7)
    identical = all(Path(paths_a[k]).read_bytes() == Path(paths_b[k]).read_bytes() for k in paths_a)
    m = len(items)
    counts = {k: len(Path(p).read_text(encoding="utf-8").splitlines())
              for k, p in paths_a.items() if k != "pairs"}
    splits_ok = (counts["train"] == int(0.6 * m) and counts["dev"] == int(0.2 * m)
                 and sum(counts.values()) == m)
    record(acceptance_log, 8, "%d/%d forge items re-validate; splits %s; re-runs byte-identical"
              % (m if all_valid else -1, m, tuple(counts.values())),
           all_valid and identical and splits_ok and m >= 5)


def _random_evidence(rng, eid):
    granularity = rng.choice(["year", "month", "day", "interval"])
    year = rng.randint(1940, 2020)
    if granularity == "year":
        value = TemporalValue(TimePoint(year))
    elif granularity == "month":
        value = TemporalValue(TimePoint(year, rng.randint(1, 12)))
    elif granularity == "day":
        value = TemporalValue(TimePoint(year, rng.randint(1, 12), rng.randint(1, 28)))
    else:
        value = TemporalValue(TimePoint(year), TimePoint(year + rng.randint(0, 5)))
    mentions = []
    if rng.random() < 0.85:  # some snippets stay undated
        mentions.append(TemporalMention((0, 4), value.render(), value))
        if rng.random() < 0.3:
            other = TemporalValue(TimePoint(rng.randint(1940, 2020)))
            mentions.append(TemporalMention((5, 9), other.render(), other))
    return Evidence(eid, "synthetic snippet %s" % eid, Source.TEXT, (),
                    {"file": "synthetic", "line": 0}, tuple(mentions))


def test_criterion_9_pruning_soundness(acceptance_log, pipeline, index):
    rng = random.Random(515)
    sound = True
    for i in range(1000):
        evidences = [_random_evidence(rng, "syn-%04d-%02d" % (i, j))
                     for j in range(rng.randint(1, 8))]
        signal = rng.choice([TemporalSignal.OVERLAP, TemporalSignal.BEFORE, TemporalSignal.AFTER])
        year = rng.randint(1940, 2020)
        value = TemporalValue(TimePoint(year)) if rng.random() < 0.5 else \
            TemporalValue(TimePoint(year), TimePoint(year + rng.randint(0, 4)))
        frame = TSF((), "r", "t", signal, Category.NON_IMPLICIT, (value,), REFERENCE_TIME)
        survivors = temporal_prune(evidences, frame)
        ids = [ev.id for ev in evidences]
        surviving_ids = [ev.id for ev in survivors]
        if surviving_ids != [eid for eid in ids if eid in set(surviving_ids)]:
            sound = False  # not a subsequence
        constraint = TemporalConstraint(signal, value)
        for ev in survivors:
            if not any(satisfies(m.value, constraint) for m in ev.temporal_mentions):
                sound = False

    benchmark = [
        ("What award did Thomas Keneally receive in the year 1982?",
         GoldAnswer(("Booker Prize",), ("Man Booker Prize",), "q_booker")),
        ("Record company of Queen in 1975?", GoldAnswer(("EMI",), (), "q_emi")),
        ("Queen's record company when recording Bohemian Rhapsody?",
         GoldAnswer(("EMI",), (), "q_emi")),
        ("Queen's lead singer after Freddie Mercury?", GoldAnswer(("Brian May",), (), "q_brianmay")),
        ("When was Bohemian Rhapsody recorded?",
         GoldAnswer(("August to September 1975",), temporal=parse_value("1975-08/1975-09"))),
        ("What movies starring Taylor Lautner in 2011?", GoldAnswer(("Abduction",), (), "q_abduction")),
        ("After managing FC Nantes, which football club did Antoine Raab take on next?",
         GoldAnswer(("Stade Lavallois",), (), "q_laval")),
        ("Who did Lady Jane Grey marry on the 25th of May 1533?",
         GoldAnswer(("Guildford Dudley",), (), "q_dudley")),
    ]
    records = []
    for qid, (question, gold) in enumerate(benchmark):
        result = pipeline.answer(question, REFERENCE_TIME, collect_stages=True)
        records.append(build_run_record("fx%d" % qid, result, gold, index, pipeline.parser))
    trace = presence_trace(records)
    presence = list(trace["presence"].values())
    monotone = all(a >= b for a, b in zip(presence, presence[1:]))
    record(acceptance_log, 9, "1000 randomized prune instances sound; fixture presence fractions "
              "monotone %s" % [str(p) for p in presence],
           sound and monotone)
