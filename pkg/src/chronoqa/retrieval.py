"""Entity linking, heterogeneous retrieval, temporal pruning and the cutoff.

Pruning is the faithfulness mechanism: evidence that cannot support a
temporally consistent answer is removed before answering.  Everything here
is read-only over the immutable index and order-deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .config import DEFAULT_STOPWORDS
from .corpus import CorpusIndex, Entity, Evidence
from .temporal import TemporalConstraint, TemporalSignal, satisfies
from .tempex import TempexParser
from .understand import TSF

_TOKEN_RX = re.compile(r"\w+")


@dataclass(frozen=True)
class LinkerResult:
    span: tuple[int, int]
    entity_id: str
    match_length: int


def content_tokens(text: str, stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> set[str]:
    return {m.group(0).lower() for m in _TOKEN_RX.finditer(text)} - stopwords


class LexicalScorer:
    """Baseline scorer: shared content tokens over query content tokens."""

    def __init__(self, stopwords: frozenset[str] = DEFAULT_STOPWORDS):
        self.stopwords = stopwords

    def __call__(self, query: str, evidence_text: str) -> float:
        query_tokens = content_tokens(query, self.stopwords)
        if not query_tokens:
            return 0.0
        shared = query_tokens & content_tokens(evidence_text, self.stopwords)
        return len(shared) / len(query_tokens)


def link(tsf: TSF, index: CorpusIndex) -> list[Entity]:
    """Longest-match alias linking over the concatenated frame text."""
    text = tsf.query_text()
    results = [
        LinkerResult(es.span, es.entity_id, es.span[1] - es.span[0])
        for es in index.aliases.find_spans(text)
    ]
    seen: set[str] = set()
    entities = []
    for res in sorted(results, key=lambda r: r.span):
        if res.entity_id not in seen:
            seen.add(res.entity_id)
            entities.append(index.entities[res.entity_id])
    return entities


def retrieve(tsf: TSF, index: CorpusIndex, parser: TempexParser,
             linked: list[Entity] | None = None) -> list[Evidence]:
    """Union of per-entity evidence, de-duplicated, with temporal mentions.

    Mentions are computed against the frame's reference time.  An empty
    linking yields an empty retrieval.
    """
    if linked is None:
        linked = link(tsf, index)
    seen: set[str] = set()
    merged: list[Evidence] = []
    for entity in linked:
        for ev in index.retrieve_by_entity(entity.id):
            if ev.id not in seen:
                seen.add(ev.id)
                merged.append(ev)
    merged.sort(key=lambda e: (e.source_rank, e.id))
    return [ev.with_mentions(parser.extract_mentions(ev.text, tsf.reference_time)) for ev in merged]


def temporal_prune(evidences: list[Evidence], tsf: TSF) -> list[Evidence]:
    """Drop evidence that cannot satisfy the frame's temporal intent.

    Time lookups without a constraint keep only dated snippets; frames
    with a constraint keep only snippets with at least one satisfying
    mention (any resolved value counts); other frames pass through.
    """
    if tsf.has_constraint:
        constraints = [TemporalConstraint(tsf.signal, v) for v in tsf.temporal_values]
        return [
            ev for ev in evidences
            if any(satisfies(m.value, c) for m in ev.temporal_mentions for c in constraints)
        ]
    if tsf.wants_temporal_answer and tsf.signal is TemporalSignal.NONE:
        return [ev for ev in evidences if ev.temporal_mentions]
    return list(evidences)


def score_and_cut(evidences: list[Evidence], tsf: TSF, k: int = 100, scorer=None) -> list[Evidence]:
    """Keep the k best snippets by scorer; ties break by evidence id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scorer = scorer or LexicalScorer()
    query = tsf.query_text()
    scored = sorted(evidences, key=lambda ev: (-scorer(query, ev.text), ev.id))
    return scored[:k]
