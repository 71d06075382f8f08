"""Implicit-question generation from a corpus.

Topics are sampled with prominence banding and a per-type cap; dated
snippets are gathered from KB facts, infoboxes, page-lead text and
year-page events; conjunction-consistent snippet pairs become
pseudo-questions whose answer entity is replaced by "What <type>"; an
optional rephraser endpoint turns them into natural questions.  Every
emitted item re-validates against the temporal algebra.
"""

from __future__ import annotations

import enum
import json
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import CorpusIndex, Entity, Evidence, Source, reverbalize
from .temporal import TemporalSignal, TemporalValue, TimePoint, expand, intersect
from .tempex import TempexParser

_TOKEN_RX = re.compile(r"\w+")

_PREPOSITIONS = {"in", "on", "at", "during", "since", "until", "from", "by"}
_QUALIFIER_PHRASES = (
    "point in time", "start time", "end time", "publication date",
    "date of birth", "date of death", "inception",
)

CONJUNCTIONS = ("during", "before", "after")
_SIGNAL_FOR = {
    "during": TemporalSignal.OVERLAP,
    "before": TemporalSignal.BEFORE,
    "after": TemporalSignal.AFTER,
}


class ForgeError(Exception):
    pass


class Band(enum.Enum):
    LONG_TAIL = "long-tail"
    MID = "mid"
    PROMINENT = "prominent"


LONG_TAIL_MAX_FACTS = 20   # exclusive upper bound
PROMINENT_MIN_FACTS = 500  # exclusive lower bound


def band_of(entity: Entity) -> Band:
    if entity.fact_count < LONG_TAIL_MAX_FACTS:
        return Band.LONG_TAIL
    if entity.fact_count > PROMINENT_MIN_FACTS:
        return Band.PROMINENT
    return Band.MID


@dataclass(frozen=True)
class TopicSample:
    entity: Entity
    band: Band


@dataclass(frozen=True)
class ForgeSnippet:
    evidence: Evidence
    value: TemporalValue  # dominant (first) temporal value of the snippet


@dataclass(frozen=True)
class SnippetPair:
    main: ForgeSnippet
    implicit: ForgeSnippet
    conjunction: str
    answer: Entity
    distractors: tuple[ForgeSnippet, ...]

    def __post_init__(self):
        if not self.distractors:
            raise ForgeError("a snippet pair needs at least one distractor")


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    question: str
    natural: bool
    answer: Entity
    topic: Entity
    main_evidence: Evidence
    implicit_evidence: Evidence
    temporal_value: TemporalValue
    signal: TemporalSignal
    conjunction: str
    question_entities: tuple[str, ...]
    reference_time: TimePoint
    pseudo_question: str
    warnings: tuple[str, ...] = ()

    def to_dict(self, index: CorpusIndex) -> dict:
        return {
            "id": self.item_id,
            "question": self.question,
            "natural": self.natural,
            "answers": [{
                "label": self.answer.label,
                "aliases": list(self.answer.aliases),
                "entity_id": self.answer.id,
            }],
            "topic_entity": {"id": self.topic.id, "label": self.topic.label},
            "question_entities": [
                {"id": eid, "label": index.entities[eid].label} for eid in self.question_entities
            ],
            "temporal_value": self.temporal_value.render(),
            "temporal_signal": self.signal.value,
            "conjunction": self.conjunction,
            "main_snippet": {
                "source": self.main_evidence.source.value,
                "provenance": self.main_evidence.provenance,
                "text": self.main_evidence.text,
            },
            "implicit_snippet": {
                "source": self.implicit_evidence.source.value,
                "provenance": self.implicit_evidence.provenance,
                "text": self.implicit_evidence.text,
            },
            "pseudo_question": self.pseudo_question,
            "reference_time": self.reference_time.render(),
            "warnings": list(self.warnings),
        }


def token_set(text: str) -> frozenset[str]:
    return frozenset(m.group(0).lower() for m in _TOKEN_RX.finditer(text))


def token_jaccard(a: str, b: str) -> float:
    sa, sb = token_set(a), token_set(b)
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def sample_topics(index: CorpusIndex, n: int, band_quotas: dict[Band, int] | None = None,
                  type_cap: float = 0.10, seed: int = 0,
                  eligible_ids: set[str] | None = None) -> list[TopicSample]:
    """Seeded topic sampling honoring band quotas and the per-type cap."""
    entities = [e for e in index.entities.values()
                if not (e.types and e.types[0] == "calendar year")]
    if eligible_ids is not None:
        entities = [e for e in entities if e.id in eligible_ids]
    if len(entities) < n:
        raise ForgeError("corpus has %d eligible entities, need %d" % (len(entities), n))
    if band_quotas is None:
        third = n // 3
        band_quotas = {Band.LONG_TAIL: third, Band.MID: third, Band.PROMINENT: n - 2 * third}
    if sum(band_quotas.values()) != n:
        raise ForgeError("band quotas %r do not sum to n=%d" % (band_quotas, n))

    pools = {band: sorted((e for e in entities if band_of(e) is band), key=lambda e: e.id)
             for band in Band}
    rng = random.Random(seed)
    cap_count = max(1, math.floor(type_cap * n))
    type_counts: dict[str, int] = {}
    samples: list[TopicSample] = []
    for band in (Band.LONG_TAIL, Band.MID, Band.PROMINENT):
        quota = band_quotas.get(band, 0)
        pool = list(pools[band])
        rng.shuffle(pool)
        taken = 0
        for entity in pool:
            if taken == quota:
                break
            primary = entity.types[0] if entity.types else ""
            if type_counts.get(primary, 0) >= cap_count:
                continue
            type_counts[primary] = type_counts.get(primary, 0) + 1
            samples.append(TopicSample(entity, band))
            taken += 1
        if taken < quota:
            raise ForgeError(
                "quota unsatisfiable for band %s: need %d, found %d eligible "
                "(type cap %.0f%% = %d per type is the binding constraint)"
                % (band.value, quota, taken, type_cap * 100, cap_count))
    return samples


def gather_snippets(index: CorpusIndex, topic: Entity, parser: TempexParser,
                    reference_time: TimePoint, first_sentences: int = 5) -> list[ForgeSnippet]:
    """Dated KB/infobox/lead-text snippets for a topic, plus year-page events."""
    snippets = []
    for ev in index.retrieve_by_entity(topic.id):
        if ev.source is Source.TABLE:
            continue
        if ev.source is Source.TEXT:
            page = ev.provenance.get("entity")
            page_entity = index.entities.get(page)
            is_year_page = bool(page_entity and page_entity.types
                                and page_entity.types[0] == "calendar year")
            if not is_year_page:
                if page != topic.id or ev.provenance.get("item", 0) >= first_sentences:
                    continue
        mentions = parser.extract_mentions(ev.text, reference_time)
        if not mentions:
            continue
        snippets.append(ForgeSnippet(ev.with_mentions(mentions), mentions[0].value))
    return snippets


def _consistent(main: ForgeSnippet, implicit: ForgeSnippet, conjunction: str) -> bool:
    """Strict conjunction consistency for generation.

    Answering uses granule-lenient before/after so pruning never drops
    boundary evidence; generation is the opposite concern, so a "before"
    (or "after") pair requires strictly disjoint scopes.  Strictly
    consistent pairs always re-validate under the lenient algebra.
    """
    if conjunction == "during":
        return intersect(main.value, implicit.value) is not None
    main_days, implicit_days = expand(main.value), expand(implicit.value)
    if conjunction == "before":
        return main_days.end_day < implicit_days.start_day
    return main_days.start_day > implicit_days.end_day


def pair_snippets(snippets: list[ForgeSnippet], conjunction: str, topic: Entity,
                  index: CorpusIndex, sigma: float = 0.5) -> list[SnippetPair]:
    """All pairs whose temporal scopes are consistent with the conjunction.

    A pair also needs an answer entity other than the topic in the main
    snippet, and at least one distractor snippet lexically close to the
    main one but with a non-intersecting temporal value (so the question
    is not trivially answerable without the constraint).
    """
    pairs = []
    for main in snippets:
        answer_id = next((es.entity_id for es in main.evidence.entities
                          if es.entity_id != topic.id), None)
        if answer_id is None:
            continue
        distract_pool = [
            s for s in snippets
            if s.evidence.id != main.evidence.id
            and token_jaccard(s.evidence.text, main.evidence.text) >= sigma
            and intersect(s.value, main.value) is None
        ]
        for implicit in snippets:
            if implicit.evidence.id == main.evidence.id:
                continue
            if not _consistent(main, implicit, conjunction):
                continue
            distractors = tuple(s for s in distract_pool if s.evidence.id != implicit.evidence.id)
            if not distractors:
                continue
            pairs.append(SnippetPair(main, implicit, conjunction, index.entities[answer_id], distractors))
    return pairs


# -- pseudo-question assembly --------------------------------------------------


def _strip_text_prefix(ev: Evidence, index: CorpusIndex) -> tuple[str, int]:
    """Text snippets drop their page-label prefix for question assembly."""
    if ev.source is Source.TEXT:
        page = ev.provenance.get("entity")
        if page and page in index.entities:
            prefix = index.entities[page].label + ", "
            if ev.text.startswith(prefix):
                return ev.text[len(prefix):], len(prefix)
    return ev.text, 0


def _extend_temporal_span(text: str, start: int) -> int:
    """Grow a mention span leftwards over its preposition or KB qualifier."""
    left = text[:start]
    trimmed = left.rstrip()
    # ", point in time, " style qualifier before the mention
    without_comma = trimmed[:-1].rstrip() if trimmed.endswith(",") else trimmed
    for phrase in _QUALIFIER_PHRASES:
        if without_comma.lower().endswith(phrase):
            cut = len(without_comma) - len(phrase)
            before = without_comma[:cut].rstrip()
            if before.endswith(","):
                before = before[:-1]
            return len(before)
    last_word = re.search(r"(\w+)\s*$", trimmed)
    if last_word and last_word.group(1).lower() in _PREPOSITIONS:
        return last_word.start(1)
    return start


def _clean_part(ev: Evidence, index: CorpusIndex, parser: TempexParser,
                reference_time: TimePoint, drop_span: tuple[int, int] | None = None) -> str:
    """Render a snippet as question material: no temporal phrases, no commas."""
    text, shift = _strip_text_prefix(ev, index)
    removals = []
    if drop_span is not None:
        removals.append((drop_span[0] - shift, drop_span[1] - shift))
    for mention in parser.extract_mentions(text, reference_time):
        start = _extend_temporal_span(text, mention.span[0])
        removals.append((start, mention.span[1]))
    removals = [(max(0, s), min(len(text), e)) for s, e in removals if e > 0 and s < len(text)]
    removals.sort()
    kept = []
    pos = 0
    for start, end in removals:
        if start < pos:
            pos = max(pos, end)
            continue
        kept.append(text[pos:start])
        pos = end
    kept.append(text[pos:])
    out = "".join(kept).replace(",", " ")
    out = re.sub(r"\s+", " ", out).strip()
    return out.rstrip(".?! ").strip()


def assemble_pseudo(pair: SnippetPair, index: CorpusIndex, parser: TempexParser,
                    reference_time: TimePoint) -> str:
    """Concatenate main part, conjunction and implicit part into the
    ungrammatical pseudo-question, substituting the answer with "What <type>"."""
    answer_span = next((es.span for es in pair.main.evidence.entities
                        if es.entity_id == pair.answer.id), None)
    main_text = _clean_part(pair.main.evidence, index, parser, reference_time, answer_span)
    implicit_text = _clean_part(pair.implicit.evidence, index, parser, reference_time)
    answer_type = pair.answer.types[0] if pair.answer.types else "entity"
    return "What %s %s, %s, %s?" % (answer_type, main_text, pair.conjunction, implicit_text)


@dataclass(frozen=True)
class RephraseOutcome:
    text: str
    natural: bool
    warning: str | None = None


def rephrase(pseudo: str, rephraser=None) -> RephraseOutcome:
    """Use the configured endpoint, or fall back to punctuation collapse."""
    passthrough = re.sub(r"\s*,\s*", " ", pseudo)
    passthrough = re.sub(r"\s+", " ", passthrough).strip()
    if rephraser is None:
        return RephraseOutcome(passthrough, natural=False)
    try:
        text = rephraser(pseudo).strip()
        if not text:
            raise ValueError("rephraser returned empty output")
        return RephraseOutcome(text, natural=True)
    except Exception as exc:  # endpoint failure falls back with a warning
        return RephraseOutcome(passthrough, natural=False,
                               warning="rephraser failed (%s); using pseudo-question" % exc)


# -- generation driver ---------------------------------------------------------


@dataclass
class Forge:
    index: CorpusIndex
    parser: TempexParser
    reference_time: TimePoint
    sigma: float = 0.5
    rephraser: object = None
    first_sentences: int = 5

    def eligible_topics(self) -> set[str]:
        """Entities with at least two dated snippets (a pair needs two)."""
        eligible = set()
        for entity in self.index.entities.values():
            if entity.types and entity.types[0] == "calendar year":
                continue
            if len(gather_snippets(self.index, entity, self.parser, self.reference_time,
                                   self.first_sentences)) >= 2:
                eligible.add(entity.id)
        return eligible

    def _answer_leaks(self, question: str, answer: Entity) -> bool:
        lowered = question.lower()
        return any(form.lower() in lowered for form in answer.surface_forms())

    def build_item(self, topic: Entity, item_id: str) -> BenchmarkItem | None:
        """First valid (conjunction, pair) for a topic, or None."""
        snippets = gather_snippets(self.index, topic, self.parser, self.reference_time,
                                   self.first_sentences)
        if len(snippets) < 2:
            return None
        for conjunction in CONJUNCTIONS:
            for pair in pair_snippets(snippets, conjunction, topic, self.index, self.sigma):
                pseudo = assemble_pseudo(pair, self.index, self.parser, self.reference_time)
                outcome = rephrase(pseudo, self.rephraser)
                if self._answer_leaks(outcome.text, pair.answer):
                    continue
                question_entities = tuple(sorted(
                    (pair.main.evidence.entity_ids() | pair.implicit.evidence.entity_ids())
                    - {pair.answer.id}))
                return BenchmarkItem(
                    item_id=item_id,
                    question=outcome.text,
                    natural=outcome.natural,
                    answer=pair.answer,
                    topic=topic,
                    main_evidence=pair.main.evidence,
                    implicit_evidence=pair.implicit.evidence,
                    temporal_value=pair.implicit.value,
                    signal=_SIGNAL_FOR[conjunction],
                    conjunction=conjunction,
                    question_entities=question_entities,
                    reference_time=self.reference_time,
                    pseudo_question=pseudo,
                    warnings=(outcome.warning,) if outcome.warning else (),
                )
        return None

    def run(self, n: int, band_quotas: dict[Band, int] | None = None,
            type_cap: float = 0.10, seed: int = 0) -> tuple[list[BenchmarkItem], list[str]]:
        topics = sample_topics(self.index, n, band_quotas, type_cap, seed,
                               eligible_ids=self.eligible_topics())
        items = []
        warnings = []
        for pos, sample in enumerate(topics, 1):
            item = self.build_item(sample.entity, "gen-%04d" % pos)
            if item is None:
                warnings.append("topic %s (%s) yielded no consistent snippet pair"
                                % (sample.entity.id, sample.entity.label))
            else:
                items.append(item)
        return items, warnings

    def validate_item(self, item: BenchmarkItem) -> list[str]:
        """Re-validation failures for an emitted item (empty means valid)."""
        failures = []
        main_mentions = self.parser.extract_mentions(item.main_evidence.text, item.reference_time)
        impl_mentions = self.parser.extract_mentions(item.implicit_evidence.text, item.reference_time)
        if not main_mentions or not impl_mentions:
            failures.append("snippet lost its temporal mention")
        else:
            main = ForgeSnippet(item.main_evidence, main_mentions[0].value)
            implicit = ForgeSnippet(item.implicit_evidence, impl_mentions[0].value)
            if not _consistent(main, implicit, item.conjunction):
                failures.append("conjunction %r inconsistent with snippet values" % item.conjunction)
            if impl_mentions[0].value.render() != item.temporal_value.render():
                failures.append("stored temporal value drifted from the implicit snippet")
        if self._answer_leaks(item.question, item.answer):
            failures.append("answer surface occurs in the question")
        if _SIGNAL_FOR[item.conjunction] is not item.signal:
            failures.append("stored signal does not match the conjunction")
        for ev in (item.main_evidence, item.implicit_evidence):
            if reverbalize(self.index, ev.id) != ev.text:
                failures.append("provenance of %s does not reproduce the snippet" % ev.id)
        snippets = gather_snippets(self.index, item.topic, self.parser, item.reference_time,
                                   self.first_sentences)
        pairs = pair_snippets(snippets, item.conjunction, item.topic, self.index, self.sigma)
        if not any(p.main.evidence.id == item.main_evidence.id
                   and p.implicit.evidence.id == item.implicit_evidence.id for p in pairs):
            failures.append("pair no longer validates (answer or distractor missing)")
        return failures


def emit(items: list[BenchmarkItem], out_dir: str | Path, index: CorpusIndex,
         split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2), seed: int = 0) -> dict[str, Path]:
    """Seeded shuffle-and-split into train/dev/test JSONL, plus the
    <intermediate question, temporal value> training pairs file."""
    if abs(sum(split_ratios) - 1.0) > 1e-9:
        raise ForgeError("split ratios must sum to 1: %r" % (split_ratios,))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shuffled = list(items)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    n_train = math.floor(split_ratios[0] * n)
    n_dev = math.floor(split_ratios[1] * n)
    splits = {
        "train": shuffled[:n_train],
        "dev": shuffled[n_train:n_train + n_dev],
        "test": shuffled[n_train + n_dev:],
    }
    paths = {}
    for name, split_items in splits.items():
        path = out_dir / ("%s.jsonl" % name)
        with path.open("w", encoding="utf-8") as handle:
            for item in split_items:
                handle.write(json.dumps(item.to_dict(index), ensure_ascii=False) + "\n")
        paths[name] = path

    pairs_path = out_dir / "intermediate_question_pairs.jsonl"
    with pairs_path.open("w", encoding="utf-8") as handle:
        for item in shuffled:
            handle.write("".join(json.dumps(p, ensure_ascii=False) + "\n"
                                 for p in _training_pairs(item, index)))
    paths["pairs"] = pairs_path
    return paths


def _training_pairs(item: BenchmarkItem, index: CorpusIndex) -> list[dict]:
    parser = TempexParser()
    base = "when " + _clean_part(item.implicit_evidence, index, parser, item.reference_time)
    if item.temporal_value.is_interval:
        return [
            {"question": base + " start date", "value": item.temporal_value.begin.render()},
            {"question": base + " end date", "value": item.temporal_value.last.render()},
        ]
    return [{"question": base, "value": item.temporal_value.render()}]
