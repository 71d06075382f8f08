"""Time-aware structured frames and the implicit-constraint resolver.

A question is understood into a six-slot frame: entity phrases, relation
phrase, expected answer type, temporal signal, temporal category, and
temporal values.  Implicit constraints carry no value at construction
time; they are resolved by generating intermediate questions and running
them through the full pipeline as a recursive call (depth capped at one).

Frames are immutable values; the resolver re-enters the pipeline through a
handle, so the pipeline must be re-entrant for read-only processing.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, replace

from .corpus import CorpusIndex
from .config import DEFAULT_STOPWORDS
from .temporal import TemporalSignal, TemporalValue, TimePoint
from .tempex import TempexParser, strip_temporal

_TOKEN_RX = re.compile(r"\w+(?:'\w+)?")

_WH_WORDS = {"what", "which", "who", "whom", "whose", "where"}
_AUXILIARIES = {"did", "do", "does", "was", "were", "is", "are", "be", "been", "am", "has", "have", "had"}

# Punctual event verbs; anything else verb-like defaults to punctual too.
_VERB_WORDS = {
    "died", "born", "won", "joined", "became", "released", "built", "wrote",
    "signed", "moved", "married", "graduated", "reached", "began", "left",
    "retired", "elected", "founded", "met", "made", "got", "took", "ended",
    "happened", "occurred", "dissolved", "replaced",
}

# Membership/tenure vocabulary whose events span time rather than a date.
_SPAN_WORDS = {
    "recording", "recorded", "managing", "managed", "manager", "playing",
    "played", "player", "serving", "served", "working", "worked", "studying",
    "studied", "member", "membership", "career", "tenure", "reign", "singer",
    "president", "presidency", "chairman", "chairperson", "ceo", "captain",
    "coach", "professor", "director", "governor", "minister", "officeholder",
    "spouse", "starring", "located", "leading", "lead",
}


class Category(enum.Enum):
    IMPLICIT = "implicit"
    NON_IMPLICIT = "non-implicit"


class AnswerKind(enum.Enum):
    DATE = "date"
    TIME_INTERVAL = "time interval"


class Role(enum.Enum):
    WHOLE = "whole"
    START = "start"
    END = "end"


class FrameFormatError(ValueError):
    pass


class GenerationError(Exception):
    """The implicit clause cannot be turned into an intermediate question."""


class ResolutionError(Exception):
    """No temporal candidate resolved the implicit constraint."""


class RecursionDepthError(Exception):
    """An intermediate question was classified implicit again."""


@dataclass(frozen=True)
class TSF:
    """The time-aware structured frame for one question."""

    entity_phrases: tuple[str, ...]
    relation_phrase: str
    expected_answer_type: str
    signal: TemporalSignal
    category: Category
    temporal_values: tuple[TemporalValue, ...]
    reference_time: TimePoint

    def __post_init__(self):
        if self.category is Category.IMPLICIT and self.signal is TemporalSignal.NONE:
            raise ValueError("an implicit frame must carry a signal")

    @property
    def wants_temporal_answer(self) -> bool:
        return self.expected_answer_type in ("date", "time interval", "year")

    @property
    def interval_bound(self) -> Role:
        """Whether the question asks for the start or end of an interval."""
        tail = self.relation_phrase.rstrip(" ?.").lower()
        if tail.endswith("start date"):
            return Role.START
        if tail.endswith("end date"):
            return Role.END
        return Role.WHOLE

    @property
    def has_constraint(self) -> bool:
        return self.signal is not TemporalSignal.NONE and bool(self.temporal_values)

    def query_text(self) -> str:
        """Concatenation of entity phrases, relation and expected type."""
        return " ".join((*self.entity_phrases, self.relation_phrase, self.expected_answer_type)).strip()


@dataclass(frozen=True)
class FrameSlots:
    """Raw extractor output: the five learned/derived slots."""

    entity_phrases: tuple[str, ...]
    relation_phrase: str
    expected_answer_type: str
    signal: TemporalSignal
    category: Category


@dataclass(frozen=True)
class IntermediateQuestion:
    text: str
    expected_answer_kind: AnswerKind
    role: Role

    def __post_init__(self):
        bounded = self.role in (Role.START, Role.END)
        if bounded != (self.expected_answer_kind is AnswerKind.TIME_INTERVAL):
            raise ValueError("start/end roles pair with interval questions only")


def _tokens(text: str) -> list[str]:
    return [m.group(0).lower() for m in _TOKEN_RX.finditer(text)]


def _is_verbish(token: str) -> bool:
    if token in _VERB_WORDS:
        return True
    return (token.endswith("ing") and len(token) >= 5) or (token.endswith("ed") and len(token) >= 5)


def _normalize_possessive(text: str) -> str:
    m = re.match(r"^(.*?)'s\s+(.*)$", text)
    if m and m.group(1).strip() and m.group(2).strip():
        return "%s of %s" % (m.group(2).strip(), m.group(1).strip())
    return text


class RuleFrameExtractor:
    """Deterministic alias-and-rule baseline for the frame slots."""

    def __init__(self, index: CorpusIndex, parser: TempexParser | None = None,
                 stopwords: frozenset[str] = DEFAULT_STOPWORDS):
        self.index = index
        self.parser = parser or TempexParser()
        self.stopwords = stopwords

    def _entity_spans(self, question: str) -> list[tuple[int, int, str]]:
        spans = []
        for es in self.index.aliases.find_spans(question):
            start, end = es.span
            if question[end:end + 2] == "'s":
                end += 2  # the possessive clitic belongs to the entity span
            spans.append((start, end, question[es.span[0]:es.span[1]]))
        return spans

    def _relation(self, question: str, spans: list[tuple[int, int, str]]) -> str:
        kept = []
        pos = 0
        for start, end, _ in sorted(spans):
            kept.append(question[pos:start])
            pos = end
        kept.append(question[pos:])
        text = re.sub(r"\s+", " ", "".join(kept)).strip()
        text = re.sub(r"\s+([?,.!])", r"\1", text)
        return text.rstrip("?.! ").strip()

    def _expected_type(self, question: str, relation: str) -> str:
        q_tokens = _tokens(question)
        tail = relation.rstrip(" ?.").lower()
        if tail.endswith("start date") or tail.endswith("end date"):
            return "date"
        if q_tokens and q_tokens[0] == "when":
            if any(t in _SPAN_WORDS for t in q_tokens):
                return "time interval"
            return "date"
        head = self._head_noun(relation)
        if not head:
            head = self._head_noun(question)
        if not head:
            return ""
        matched = self.index.aliases.lookup(head)
        if matched:
            counts = Counter()
            for entity_id in matched:
                counts.update(self.index.entities[entity_id].types)
            if counts:
                return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        return head

    def _head_noun(self, text: str) -> str:
        tokens = _tokens(text)
        start = 0
        for i, tok in enumerate(tokens):
            if tok in _WH_WORDS:
                start = i + 1
                break
        collected: list[str] = []
        for tok in tokens[start:]:
            if tok in _AUXILIARIES or tok in ("a", "an", "the"):
                if collected:
                    break
                continue
            if tok in self.stopwords or not tok.isalpha() or _is_verbish(tok):
                break
            collected.append(tok)
            if len(collected) == 3:
                break
        return " ".join(collected)

    def __call__(self, question: str, reference_time: TimePoint) -> FrameSlots:
        spans = self._entity_spans(question)
        phrases = tuple(surface for _, _, surface in sorted(spans))
        relation = self._relation(question, spans)
        detection = self.parser.detect_signal(question)
        mentions = self.parser.extract_mentions(question, reference_time)
        signal = detection.signal
        if signal is TemporalSignal.NONE and mentions:
            # a stated date with no cue still reads as an overlap constraint
            signal = TemporalSignal.OVERLAP
        strip = strip_temporal(question, mentions, detection)
        if detection.signal is not TemporalSignal.NONE and strip.implicit_clause is not None:
            category = Category.IMPLICIT
        else:
            category = Category.NON_IMPLICIT
        if category is Category.IMPLICIT and _tokens(question)[:1] == ["when"]:
            # a sentence-initial "when" question is a date lookup; cue words
            # inside verbalized predicates ("follows", "until") must not
            # re-classify it as implicit, or intermediate questions would
            # recurse past the depth cap
            category = Category.NON_IMPLICIT
            signal = TemporalSignal.OVERLAP if mentions else TemporalSignal.NONE
        expected = self._expected_type(question, relation)
        return FrameSlots(phrases, relation, expected, signal, category)


def build_tsf(question: str, reference_time: TimePoint, extractor, parser: TempexParser | None = None) -> TSF:
    """Build the frame for a question; a frame is always produced."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    slots = extractor(question, reference_time)
    parser = parser or getattr(extractor, "parser", None) or TempexParser()
    values: tuple[TemporalValue, ...] = ()
    if slots.category is Category.NON_IMPLICIT and slots.signal is not TemporalSignal.NONE:
        mentions = parser.extract_mentions(question, reference_time)
        detection = parser.detect_signal(question)
        strip = strip_temporal(question, mentions, detection)
        in_removed = [
            m.value for m in mentions
            if any(r0 <= m.span[0] and m.span[1] <= r1 for r0, r1 in strip.removed_spans)
        ]
        chosen = in_removed or [m.value for m in mentions]
        if chosen:
            # questions with several constraints keep the first one (v1)
            values = (chosen[0],)
    return TSF(slots.entity_phrases, slots.relation_phrase, slots.expected_answer_type,
               slots.signal, slots.category, values, reference_time)


class RuleIntermediateGenerator:
    """Baseline generator for intermediate questions.

    An implicit clause with a verb becomes "when <entities not already in
    the clause> <clause>"; a verbless clause naming an entity borrows the
    stripped main remainder instead ("when Freddie Mercury lead singer of
    Queen").
    """

    def __init__(self, parser: TempexParser | None = None):
        self.parser = parser or TempexParser()

    def __call__(self, question: str, tsf: TSF) -> tuple[str, AnswerKind]:
        mentions = self.parser.extract_mentions(question, tsf.reference_time)
        detection = self.parser.detect_signal(question)
        strip = strip_temporal(question, mentions, detection)
        clause = strip.implicit_clause
        if not clause:
            raise GenerationError("question has no implicit clause to resolve: %r" % question)
        clause_tokens = _tokens(clause)
        clause_lower = clause.lower()
        has_verb = any(_is_verbish(t) for t in clause_tokens)
        clause_entities = [p for p in tsf.entity_phrases if p.lower() in clause_lower]
        if has_verb:
            prefix = [p for p in tsf.entity_phrases if p.lower() not in clause_lower]
            base = " ".join(["when", *prefix, clause])
            span = any(t in _SPAN_WORDS for t in clause_tokens)
            return base, AnswerKind.TIME_INTERVAL if span else AnswerKind.DATE
        if clause_entities:
            remainder = strip.text.rstrip("?.! ").strip()
            remainder = _normalize_possessive(remainder)
            base = " ".join(["when", clause, remainder]).strip()
            relation_tokens = _tokens(tsf.relation_phrase)
            span = any(t in _SPAN_WORDS for t in relation_tokens + clause_tokens)
            return base, AnswerKind.TIME_INTERVAL if span else AnswerKind.DATE
        raise GenerationError("implicit clause %r has neither a verb nor a known entity" % clause)


def generate_intermediate(question: str, tsf: TSF, generator) -> list[IntermediateQuestion]:
    """Turn an implicit frame into one or two explicit lookup questions."""
    if tsf.category is not Category.IMPLICIT:
        raise ValueError("only implicit frames take intermediate questions")
    base, kind = generator(question, tsf)
    if kind is AnswerKind.DATE:
        return [IntermediateQuestion(base + "?", kind, Role.WHOLE)]
    return [
        IntermediateQuestion(base + " start date?", kind, Role.START),
        IntermediateQuestion(base + " end date?", kind, Role.END),
    ]


def resolve_implicit(tsf: TSF, pipeline_handle, top_k: int, intermediates: list[IntermediateQuestion]):
    """Answer the intermediate questions and fill in explicit values.

    Returns the resolved frame plus the recursion trace.  Start/end pairs
    combine into one interval; a start without an end falls back to the
    reference year as the interval end.  Raises ResolutionError when no
    temporal candidate appears within the top ``top_k``.
    """
    if tsf.category is not Category.IMPLICIT:
        raise ValueError("only implicit frames are resolved")
    starts: list[TemporalValue] = []
    ends: list[TemporalValue] = []
    wholes: list[TemporalValue] = []
    trace = []
    for iq in intermediates:
        result = pipeline_handle(iq.text)
        trace.append((iq, result))
        picked = [
            cand.temporal_value for cand in result.answers[:top_k]
            if cand.temporal_value is not None
        ]
        {Role.WHOLE: wholes, Role.START: starts, Role.END: ends}[iq.role].extend(picked)

    values: list[TemporalValue] = []
    if wholes:
        values.extend(wholes)
    paired = min(len(starts), len(ends))
    for s, e in zip(starts[:paired], ends[:paired]):
        try:
            values.append(TemporalValue(s.begin, e.last))
        except ValueError as exc:
            error = ResolutionError("resolved interval is inverted: %s .. %s" % (s.render(), e.render()))
            error.trace = tuple(trace)
            raise error from exc
    for s in starts[paired:]:
        # start answered but end missing: read the fact as ongoing
        values.append(TemporalValue(s.begin, TimePoint(tsf.reference_time.year)))
    for e in ends[paired:]:
        values.append(e)

    deduped: list[TemporalValue] = []
    for v in values:
        if all(v.render() != other.render() for other in deduped):
            deduped.append(v)
    if not deduped:
        error = ResolutionError("no temporal candidate within the top %d answers" % top_k)
        error.trace = tuple(trace)
        raise error
    return replace(tsf, temporal_values=tuple(deduped)), trace


def serialize_tsf(tsf: TSF) -> str:
    """Render the five learned slots separated by two pipes."""
    return "||".join([
        ", ".join(tsf.entity_phrases),
        tsf.relation_phrase,
        tsf.expected_answer_type,
        tsf.signal.value,
        tsf.category.value,
    ])


def parse_tsf(serialized: str, reference_time: TimePoint, parser: TempexParser | None = None) -> TSF:
    """Invert serialize_tsf; temporal values are re-derived from the relation."""
    fields = serialized.split("||")
    if len(fields) != 5:
        raise FrameFormatError("expected 5 pipe-separated fields, got %d: %r" % (len(fields), serialized))
    entity_field, relation, expected, signal_field, category_field = fields
    try:
        signal = TemporalSignal(signal_field.strip().lower()) if signal_field.strip() else TemporalSignal.NONE
        category = Category(category_field.strip().lower())
    except ValueError:
        raise FrameFormatError("bad signal or category in %r" % serialized) from None
    phrases = tuple(p for p in (s.strip() for s in entity_field.split(",")) if p)
    parser = parser or TempexParser()
    values: tuple[TemporalValue, ...] = ()
    if category is Category.NON_IMPLICIT and signal is not TemporalSignal.NONE:
        mentions = parser.extract_mentions(relation, reference_time)
        if mentions:
            values = (mentions[0].value,)
    return TSF(phrases, relation.strip(), expected.strip(), signal, category, values, reference_time)
