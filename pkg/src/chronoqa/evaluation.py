"""Metrics, corrupted-constraint experiment, and stage-presence analysis.

Answer matching accepts a label or any alias (case-insensitive), an entity
id, or day-expansion equality for temporal answers.  Metrics use exact
rational arithmetic internally; refusals score zero.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .answering import AnswerCandidate, QAResult
from .corpus import CorpusIndex, Evidence
from .retrieval import link
from .temporal import (
    TemporalConstraint,
    TemporalSignal,
    TemporalValue,
    TimePoint,
    parse_point,
    parse_value,
    same_extent,
    satisfies,
)

_MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July",
                "August", "September", "October", "November", "December")


@dataclass(frozen=True)
class GoldAnswer:
    labels: tuple[str, ...]
    aliases: tuple[str, ...] = ()
    entity_id: str | None = None
    temporal: TemporalValue | None = None

    def __post_init__(self):
        if not self.labels:
            raise ValueError("a gold answer needs at least one label")

    def surface_forms(self) -> tuple[str, ...]:
        return (*self.labels, *self.aliases)


def match_answer(candidate: AnswerCandidate, gold: GoldAnswer) -> bool:
    """Whether a ranked candidate counts as correct for this gold answer."""
    label = candidate.label.strip().lower()
    if any(label == form.strip().lower() for form in gold.surface_forms()):
        return True
    if candidate.entity_id is not None and candidate.entity_id == gold.entity_id:
        return True
    if candidate.temporal_value is not None and gold.temporal is not None:
        return same_extent(candidate.temporal_value, gold.temporal)
    return False


def answer_present_in(gold: GoldAnswer, evidences: list[Evidence]) -> bool:
    """Whether the gold answer occurs in any snippet (text, annotation, or
    temporal mention)."""
    for ev in evidences:
        if gold.entity_id is not None and gold.entity_id in ev.entity_ids():
            return True
        lowered = ev.text.lower()
        for form in gold.surface_forms():
            if re.search(r"(?<!\w)%s(?!\w)" % re.escape(form.strip().lower()), lowered):
                return True
        if gold.temporal is not None:
            if any(same_extent(m.value, gold.temporal) for m in ev.temporal_mentions):
                return True
    return False


def first_match_rank(result: QAResult, gold: GoldAnswer) -> int | None:
    for position, candidate in enumerate(result.answers, 1):
        if match_answer(candidate, gold):
            return position
    return None


@dataclass(frozen=True)
class RunRecord:
    """One evaluated question with stage-presence flags.

    Flags are monotone non-increasing in pipeline order: an answer absent
    from a stage cannot reappear later.
    """

    question_id: str
    result: QAResult
    gold: GoldAnswer
    retrieved: bool
    survived_prune: bool
    survived_cut: bool
    in_top5: bool
    at_rank1: bool

    def __post_init__(self):
        flags = (self.retrieved, self.survived_prune, self.survived_cut, self.in_top5, self.at_rank1)
        if any(flags[i] < flags[i + 1] for i in range(len(flags) - 1)):
            raise ValueError("stage flags must be monotone non-increasing: %r" % (flags,))


def build_run_record(question_id: str, result: QAResult, gold: GoldAnswer,
                     index: CorpusIndex, parser=None) -> RunRecord:
    """Derive stage flags from a result answered with instrumentation on."""
    if result.stages is None:
        raise ValueError("pipeline must run with stage instrumentation enabled")

    def present(evidence_ids) -> bool:
        evs = []
        for eid in evidence_ids:
            ev = index.evidence.get(eid)
            if ev is None:
                continue
            if parser is not None and gold.temporal is not None and not ev.temporal_mentions:
                ev = ev.with_mentions(parser.extract_mentions(ev.text, result.tsf.reference_time))
            evs.append(ev)
        return answer_present_in(gold, evs)

    rank = first_match_rank(result, gold)
    retrieved = present(result.stages.retrieved)
    survived_prune = retrieved and present(result.stages.after_prune)
    survived_cut = survived_prune and present(result.stages.after_cut)
    in_top5 = survived_cut and rank is not None and rank <= 5
    at_rank1 = in_top5 and rank == 1
    return RunRecord(question_id, result, gold, retrieved, survived_prune, survived_cut,
                     in_top5, at_rank1)


def metrics(records: list[RunRecord]) -> dict[str, Fraction]:
    """P@1, MRR and Hit@5 as exact fractions; refusals count zero."""
    if not records:
        raise ValueError("metrics need at least one record")
    n = len(records)
    p1 = Fraction(0)
    mrr = Fraction(0)
    hit5 = Fraction(0)
    for record in records:
        rank = None if record.result.refused else first_match_rank(record.result, record.gold)
        if rank is not None:
            mrr += Fraction(1, rank)
            if rank == 1:
                p1 += 1
            if rank <= 5:
                hit5 += 1
    return {"P@1": p1 / n, "MRR": mrr / n, "Hit@5": hit5 / n}


_STAGES = ("retrieved", "survived_prune", "survived_cut", "in_top5", "at_rank1")
_ERROR_CATEGORIES = (
    "answer not found in the initial retrieval",
    "answer lost during temporal pruning",
    "answer lost during scoring cutoff",
    "answer not among the top-5 answers",
    "answer among top candidates but not at rank 1",
)


def presence_trace(records: list[RunRecord]) -> dict:
    """Answer presence per stage plus the error breakdown over failures."""
    if not records:
        raise ValueError("presence_trace needs at least one record")
    n = len(records)
    presence = {stage: Fraction(sum(1 for r in records if getattr(r, stage)), n) for stage in _STAGES}
    failures = [r for r in records if not r.at_rank1]
    breakdown = {}
    for category_index, category in enumerate(_ERROR_CATEGORIES):
        def lost_at(record, i=category_index):
            flags = [getattr(record, stage) for stage in _STAGES]
            return not flags[i] and all(flags[:i])
        count = sum(1 for r in failures if lost_at(r))
        breakdown[category] = Fraction(count, len(failures)) if failures else Fraction(0)
    return {"presence": presence, "failures": len(failures), "error_breakdown": breakdown}


# -- corrupted-constraint experiment ------------------------------------------


def corrupt_questions(items: list["EvalItem"], seed: int, pipeline, max_draws: int = 64):
    """Replace each item's temporal value with a corpus-verified
    unsatisfiable date, rewriting the question surface.

    Returns (corrupted items, warnings for skipped items).  Dates are drawn
    inside the plausibility window so refusal, not date parsing, is what
    the experiment exercises.
    """
    rng = random.Random(seed)
    lo, hi = pipeline.config.window
    corrupted = []
    warnings = []
    for item in items:
        mentions = pipeline.parser.extract_mentions(item.question, item.reference_time)
        if not mentions:
            warnings.append("item %s has no explicit temporal value; skipped" % item.question_id)
            continue
        mention = mentions[0]
        tsf = pipeline.understand(item.question, item.reference_time)
        signal = tsf.signal if tsf.signal is not TemporalSignal.NONE else TemporalSignal.OVERLAP
        linked = link(tsf, pipeline.index)
        evidences = []
        seen = set()
        for entity in linked:
            for ev in pipeline.index.retrieve_by_entity(entity.id):
                if ev.id not in seen:
                    seen.add(ev.id)
                    evidences.append(ev.with_mentions(
                        pipeline.parser.extract_mentions(ev.text, item.reference_time)))
        replacement = None
        for _ in range(max_draws):
            day = TimePoint(rng.randint(lo, hi), rng.randint(1, 12), rng.randint(1, 28))
            constraint = TemporalConstraint(signal, TemporalValue(day))
            if not any(satisfies(m.value, constraint) for ev in evidences for m in ev.temporal_mentions):
                replacement = day
                break
        if replacement is None:
            warnings.append("item %s: no unsatisfiable date found in %d draws; skipped"
                            % (item.question_id, max_draws))
            continue
        surface = "%d %s %d" % (replacement.day, _MONTH_NAMES[replacement.month - 1], replacement.year)
        start, end = mention.span
        question = item.question[:start] + surface + item.question[end:]
        corrupted.append(EvalItem(
            question_id=item.question_id,
            question=question,
            gold=item.gold,
            reference_time=item.reference_time,
            temporal_value=TemporalValue(replacement),
            metadata={**item.metadata, "corrupted_from": item.question},
        ))
    return corrupted, warnings


# -- distant supervision -------------------------------------------------------


@dataclass(frozen=True)
class TSFAnnotation:
    question: str
    entity_spans: tuple[tuple[int, int], ...]
    entity_phrases: tuple[str, ...]
    relation: str
    expected_type: str
    signal: TemporalSignal
    category: str
    unresolved: bool

    def serialize(self) -> str:
        return "||".join([
            ", ".join(self.entity_phrases), self.relation, self.expected_type,
            self.signal.value, self.category,
        ])


def distant_supervision_annotate(question: str, gold: GoldAnswer, index: CorpusIndex,
                                 parser, reference_time: TimePoint,
                                 signal: TemporalSignal | None = None,
                                 category: str | None = None) -> TSFAnnotation:
    """Label question-entity mentions whose snippets contain the gold answer."""
    spans = index.aliases.find_spans(question)
    qualifying = []
    for es in spans:
        snippets = index.retrieve_by_entity(es.entity_id)
        if gold.temporal is not None:
            snippets = [ev.with_mentions(parser.extract_mentions(ev.text, reference_time))
                        for ev in snippets]
        if answer_present_in(gold, snippets):
            qualifying.append(es)
    phrases = tuple(question[es.span[0]:es.span[1]] for es in qualifying)
    kept = []
    pos = 0
    for es in qualifying:
        kept.append(question[pos:es.span[0]])
        pos = es.span[1]
    kept.append(question[pos:])
    relation = re.sub(r"\s+", " ", "".join(kept)).strip().rstrip("?.! ").strip()
    expected = ""
    if gold.entity_id and gold.entity_id in index.entities:
        types = index.entities[gold.entity_id].types
        expected = types[0] if types else ""
    if signal is None:
        signal = parser.detect_signal(question).signal
    if category is None:
        category = "non-implicit"
    return TSFAnnotation(question, tuple(es.span for es in qualifying), phrases, relation,
                         expected, signal, category, unresolved=not qualifying)


# -- benchmark files -----------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    """One benchmark question in the normalized internal form."""

    question_id: str
    question: str
    gold: GoldAnswer
    reference_time: TimePoint
    temporal_value: TemporalValue | None = None
    signal: TemporalSignal | None = None
    metadata: dict = field(default_factory=dict)


def _gold_from_record(record: dict) -> GoldAnswer:
    answers = record.get("answers") or record.get("answer")
    if answers is None:
        raise ValueError("benchmark record %r has no answers" % record.get("id"))
    if isinstance(answers, dict):
        answers = [answers]
    labels: list[str] = []
    aliases: list[str] = []
    entity_id = None
    temporal = None
    for ans in answers:
        if isinstance(ans, str):
            labels.append(ans)
            continue
        if "label" in ans:
            labels.append(str(ans["label"]))
        aliases.extend(str(a) for a in ans.get("aliases", ()))
        entity_id = ans.get("entity_id", ans.get("id", entity_id))
        if ans.get("temporal_value"):
            temporal = parse_value(str(ans["temporal_value"]))
    return GoldAnswer(tuple(labels), tuple(aliases), entity_id, temporal)


def load_benchmark(path: str | Path) -> list[EvalItem]:
    """Read a benchmark JSONL file (full or minimal schema)."""
    items = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        reference = record.get("reference_time", "2025-01-01")
        value = record.get("temporal_value")
        signal = record.get("temporal_signal") or record.get("signal")
        items.append(EvalItem(
            question_id=str(record.get("id", "q%04d" % lineno)),
            question=str(record["question"]),
            gold=_gold_from_record(record),
            reference_time=parse_point(str(reference)),
            temporal_value=parse_value(str(value)) if value else None,
            signal=TemporalSignal(signal) if signal else None,
            metadata={k: v for k, v in record.items()
                      if k not in ("id", "question", "answers", "answer", "reference_time")},
        ))
    return items
