"""Answer candidate extraction, deterministic ranking, and result records.

The ranker is a transparent stand-in for a learned answering model: support
count, lexical overlap with the frame query, and an expected-type bonus,
with configurable weights.  Results carry the full recursion trace and the
supporting snippets so an answer derivation can be verified end to end.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

from .corpus import CorpusIndex, Evidence, Source
from .retrieval import LexicalScorer
from .temporal import TemporalConstraint, TemporalValue, expand, satisfies
from .understand import TSF, IntermediateQuestion, Role, serialize_tsf


class Mode(enum.Enum):
    FAITHFUL = "faith"
    UNFAITHFUL = "unfaith"


class FallbackPolicy(enum.Enum):
    NEVER = "never"
    ON_REFUSAL = "on-refusal"


class CandidateKind(enum.Enum):
    ENTITY = "entity"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class AnswerCandidate:
    kind: CandidateKind
    label: str
    supporting_evidence: tuple[str, ...]
    entity_id: str | None = None
    temporal_value: TemporalValue | None = None
    type_labels: tuple[str, ...] = ()
    score: float = 0.0

    def __post_init__(self):
        if not self.supporting_evidence:
            raise ValueError("a candidate needs at least one supporting snippet")

    @property
    def sort_id(self) -> str:
        return self.entity_id if self.entity_id is not None else self.label


@dataclass(frozen=True)
class StageTrace:
    """Evidence ids surviving each pipeline stage (for presence analysis)."""

    retrieved: tuple[str, ...]
    after_prune: tuple[str, ...]
    after_cut: tuple[str, ...]


@dataclass(frozen=True)
class QAResult:
    question: str
    tsf: TSF
    answers: tuple[AnswerCandidate, ...]
    refused: bool
    mode: Mode
    fallback_used: bool
    trace: tuple[tuple[IntermediateQuestion, "QAResult"], ...] = ()
    evidence: dict[str, Evidence] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()
    stages: StageTrace | None = None

    def __post_init__(self):
        if self.refused and self.answers:
            raise ValueError("a refused result cannot carry answers")


def extract_candidates(
    evidences: list[Evidence],
    tsf: TSF,
    index: CorpusIndex,
    exclude_entities: frozenset[str] = frozenset(),
) -> list[AnswerCandidate]:
    """Collect candidates from post-pruning, post-cut evidence.

    Temporal questions yield the temporal mentions of the kept snippets,
    merged when equal after day expansion; interval mentions project to
    their start or end point when the question asks for one.  Other
    questions yield the entity annotations minus the linked question
    entities.
    """
    if tsf.wants_temporal_answer:
        bound = tsf.interval_bound
        groups: dict[tuple[int, int], tuple[TemporalValue, list[str]]] = {}
        for ev in evidences:
            for mention in ev.temporal_mentions:
                value = mention.value
                if value.is_interval and bound is not Role.WHOLE:
                    point = value.begin if bound is Role.START else value.last
                    value = TemporalValue(point)
                interval = expand(value)
                key = (interval.start_day, interval.end_day)
                if key not in groups:
                    groups[key] = (value, [])
                if ev.id not in groups[key][1]:
                    groups[key][1].append(ev.id)
        return [
            AnswerCandidate(CandidateKind.TEMPORAL, value.render(), tuple(ids),
                            temporal_value=value, type_labels=(value.kind_label,))
            for value, ids in groups.values()
        ]

    support: dict[str, list[str]] = {}
    for ev in evidences:
        for entity_id in sorted(ev.entity_ids()):
            if entity_id in exclude_entities:
                continue
            ids = support.setdefault(entity_id, [])
            if ev.id not in ids:
                ids.append(ev.id)
    candidates = []
    for entity_id, ids in support.items():
        entity = index.entities[entity_id]
        candidates.append(AnswerCandidate(CandidateKind.ENTITY, entity.label, tuple(ids),
                                          entity_id=entity_id, type_labels=entity.types))
    return candidates


def rank(
    candidates: list[AnswerCandidate],
    tsf: TSF,
    evidence_by_id: dict[str, Evidence],
    weights: tuple[float, float, float] = (0.5, 0.4, 0.1),
    scorer=None,
) -> list[AnswerCandidate]:
    """Score and order candidates; a permutation of the input.

    score = w_support * support_fraction + w_lexical * best snippet overlap
    with the frame query + w_type * expected-type match.  Ties break by
    label, then id.
    """
    if not candidates:
        return []
    scorer = scorer or LexicalScorer()
    query = tsf.query_text()
    max_support = max(len(c.supporting_evidence) for c in candidates)
    expected = tsf.expected_answer_type.strip().lower()
    w_support, w_lexical, w_type = weights
    scored = []
    for cand in candidates:
        support_part = len(cand.supporting_evidence) / max_support if max_support else 0.0
        lexical_part = max(
            (scorer(query, evidence_by_id[eid].text) for eid in cand.supporting_evidence if eid in evidence_by_id),
            default=0.0,
        )
        type_part = 1.0 if expected and any(t.lower() == expected for t in cand.type_labels) else 0.0
        score = w_support * support_part + w_lexical * lexical_part + w_type * type_part
        scored.append(replace(cand, score=score))
    scored.sort(key=lambda c: (-c.score, c.label, c.sort_id))
    return scored


# -- serialization and trace rendering ----------------------------------------


def _tsf_to_dict(tsf: TSF) -> dict:
    return {
        "entity_phrases": list(tsf.entity_phrases),
        "relation_phrase": tsf.relation_phrase,
        "expected_answer_type": tsf.expected_answer_type,
        "signal": tsf.signal.value,
        "category": tsf.category.value,
        "temporal_values": [v.render() for v in tsf.temporal_values],
        "reference_time": tsf.reference_time.render(),
        "serialized": serialize_tsf(tsf),
    }


def result_to_dict(result: QAResult) -> dict:
    """Stable-order dictionary form of a result, ready for JSON output."""
    return {
        "question": result.question,
        "mode": result.mode.value,
        "refused": result.refused,
        "fallback_used": result.fallback_used,
        "tsf": _tsf_to_dict(result.tsf),
        "answers": [
            {
                "kind": cand.kind.value,
                "label": cand.label,
                "entity_id": cand.entity_id,
                "temporal_value": cand.temporal_value.render() if cand.temporal_value else None,
                "score": round(cand.score, 6),
                "supporting_evidence": list(cand.supporting_evidence),
            }
            for cand in result.answers
        ],
        "trace": [
            {
                "intermediate_question": iq.text,
                "expected_answer_kind": iq.expected_answer_kind.value,
                "role": iq.role.value,
                "result": result_to_dict(sub),
            }
            for iq, sub in result.trace
        ],
        "evidence": {
            eid: {
                "text": ev.text,
                "source": ev.source.value,
                "provenance": ev.provenance,
                "temporal_mentions": [
                    {"surface": m.surface, "value": m.value.render()} for m in ev.temporal_mentions
                ],
            }
            for eid, ev in sorted(result.evidence.items())
        },
        "warnings": list(result.warnings),
    }


def result_to_json(result: QAResult) -> str:
    return json.dumps(result_to_dict(result), ensure_ascii=False, indent=2)


def result_from_dict(payload: dict) -> QAResult:
    """Rebuild a result from its JSON form, e.g. for batch verification.

    Entity span annotations and candidate type labels are not serialized;
    textual and temporal-mention matching still drive verification.
    """
    from dataclasses import replace as _replace

    from .tempex import TemporalMention
    from .temporal import parse_point, parse_value
    from .understand import AnswerKind, IntermediateQuestion, Role, parse_tsf

    raw_tsf = payload["tsf"]
    tsf = parse_tsf(raw_tsf["serialized"], parse_point(raw_tsf["reference_time"]))
    tsf = _replace(tsf, temporal_values=tuple(parse_value(v) for v in raw_tsf["temporal_values"]))

    evidence = {}
    for eid, raw in payload.get("evidence", {}).items():
        mentions = []
        for m in raw.get("temporal_mentions", ()):
            start = max(0, raw["text"].find(m["surface"]))
            mentions.append(TemporalMention((start, start + len(m["surface"])),
                                            m["surface"], parse_value(m["value"])))
        evidence[eid] = Evidence(eid, raw["text"], Source(raw["source"]), (),
                                 raw.get("provenance", {}), tuple(mentions))

    answers = tuple(
        AnswerCandidate(
            kind=CandidateKind(raw["kind"]),
            label=raw["label"],
            supporting_evidence=tuple(raw["supporting_evidence"]),
            entity_id=raw.get("entity_id"),
            temporal_value=parse_value(raw["temporal_value"]) if raw.get("temporal_value") else None,
            score=float(raw.get("score", 0.0)),
        )
        for raw in payload.get("answers", ())
    )
    trace = tuple(
        (IntermediateQuestion(step["intermediate_question"],
                              AnswerKind(step["expected_answer_kind"]),
                              Role(step["role"])),
         result_from_dict(step["result"]))
        for step in payload.get("trace", ())
    )
    return QAResult(
        question=payload["question"], tsf=tsf, answers=answers,
        refused=bool(payload["refused"]), mode=Mode(payload["mode"]),
        fallback_used=bool(payload.get("fallback_used", False)), trace=trace,
        evidence=evidence, warnings=tuple(payload.get("warnings", ())),
    )


def _highlight(ev: Evidence, constraints: list[TemporalConstraint]) -> str:
    """Mark temporal mentions in a snippet; satisfying ones get a star."""
    text = ev.text
    for mention in sorted(ev.temporal_mentions, key=lambda m: -m.span[0]):
        star = "*" if any(satisfies(mention.value, c) for c in constraints) else ""
        marked = "«%s%s»" % (mention.surface, star)
        text = text[:mention.span[0]] + marked + text[mention.span[1]:]
    return text


def render_trace(result: QAResult, indent: str = "") -> str:
    """Human-readable answer derivation, including intermediate questions."""
    tsf = result.tsf
    constraints = (
        [TemporalConstraint(tsf.signal, v) for v in tsf.temporal_values] if tsf.has_constraint else []
    )
    lines = [
        indent + "question: %s" % result.question,
        indent + "frame: %s" % serialize_tsf(tsf),
        indent + "temporal values: %s" % (", ".join(v.render() for v in tsf.temporal_values) or "-"),
        indent + "mode: %s%s" % (result.mode.value, " (fallback)" if result.fallback_used else ""),
    ]
    if result.trace:
        lines.append(indent + "intermediate questions:")
        for iq, sub in result.trace:
            lines.append(indent + "  - %s  [%s]" % (iq.text, iq.expected_answer_kind.value))
            lines.append(render_trace(sub, indent + "    "))
    if result.refused:
        lines.append(indent + "refused: no constraint-satisfying evidence")
        if tsf.has_constraint:
            lines.append(indent + "violated constraint: %s %s"
                         % (tsf.signal.value, ", ".join(v.render() for v in tsf.temporal_values)))
    else:
        lines.append(indent + "answers:")
        for pos, cand in enumerate(result.answers, 1):
            lines.append(indent + "  %d. %s  (score %.4f)" % (pos, cand.label, cand.score))
            for eid in cand.supporting_evidence:
                ev = result.evidence.get(eid)
                if ev is not None:
                    lines.append(indent + "     [%s] %s" % (ev.source.value.upper(), _highlight(ev, constraints)))
    for warning in result.warnings:
        lines.append(indent + "note: %s" % warning)
    return "\n".join(lines)
