"""Four-part faithfulness check for answered questions.

An answer is faithful when the union of its supporting snippets contains
(i) the answer, (ii) every question entity under any surface form,
(iii) the question predicate at least in overlapping-token form, and
(iv) a temporal expression satisfying the question's constraint.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .answering import CandidateKind, QAResult
from .config import DEFAULT_STOPWORDS
from .corpus import CorpusIndex, Evidence
from .evaluation import GoldAnswer, answer_present_in
from .temporal import TemporalConstraint, TemporalSignal, satisfies

_TOKEN_RX = re.compile(r"\w+")

_SUFFIXES = (("ies", "i"), ("ing", ""), ("ed", ""), ("es", ""), ("s", ""), ("ly", ""))


def stem(token: str) -> str:
    """Tiny suffix-stripping stemmer; both sides of a comparison use it."""
    t = token.lower()
    for suffix, replacement in _SUFFIXES:
        if t.endswith(suffix) and len(t) - len(suffix) + len(replacement) >= 3:
            t = t[: -len(suffix)] + replacement
            break
    if len(t) > 3 and t.endswith("e"):
        t = t[:-1]
    if len(t) > 3 and t.endswith("y"):
        t = t[:-1] + "i"
    if len(t) > 3 and t[-1] == t[-2] and t[-1] not in "aeiou":
        t = t[:-1]
    return t


@dataclass(frozen=True)
class FaithfulnessReport:
    answer_present: bool
    entities_present: bool
    predicate_present: bool
    temporal_satisfied: bool
    justifications: dict

    @property
    def faithful(self) -> bool:
        return (self.answer_present and self.entities_present
                and self.predicate_present and self.temporal_satisfied)

    def to_dict(self) -> dict:
        return {
            "answer_present": self.answer_present,
            "entities_present": self.entities_present,
            "predicate_present": self.predicate_present,
            "temporal_satisfied": self.temporal_satisfied,
            "faithful": self.faithful,
            "justifications": dict(self.justifications),
        }


class Verifier:
    """Checks results against the corpus they were answered from."""

    def __init__(self, index: CorpusIndex, theta: float = 0.3,
                 synonyms: dict[str, frozenset[str]] | None = None,
                 stopwords: frozenset[str] = DEFAULT_STOPWORDS):
        self.index = index
        self.theta = theta
        self.synonyms = synonyms or {}
        self.stopwords = stopwords

    def verify(self, result: QAResult, rank: int = 1) -> FaithfulnessReport:
        """Verify the candidate at ``rank`` over its supporting snippets."""
        if result.refused:
            raise ValueError("cannot verify a refused result")
        if not 1 <= rank <= len(result.answers):
            raise ValueError("rank %d out of bounds (1..%d)" % (rank, len(result.answers)))
        candidate = result.answers[rank - 1]
        snippets = [result.evidence[eid] for eid in candidate.supporting_evidence
                    if eid in result.evidence]
        union_text = "\n".join(ev.text for ev in snippets)
        just = {}

        answer_present = self._answer_present(candidate, snippets)
        just["answer"] = ("answer %r found in evidence" if answer_present
                          else "answer %r not found in evidence") % candidate.label

        missing = [p for p in result.tsf.entity_phrases if not self._phrase_present(p, snippets, union_text)]
        entities_present = not missing
        just["entities"] = ("all %d question entities present" % len(result.tsf.entity_phrases)
                            if entities_present else "missing question entities: %s" % ", ".join(missing))

        predicate_present, detail = self._predicate_present(result.tsf.relation_phrase, union_text)
        just["predicate"] = detail

        temporal_satisfied, detail = self._temporal_satisfied(result, snippets)
        just["temporal"] = detail

        return FaithfulnessReport(answer_present, entities_present, predicate_present,
                                  temporal_satisfied, just)

    def _answer_present(self, candidate, snippets: list[Evidence]) -> bool:
        if candidate.kind is CandidateKind.TEMPORAL:
            gold = GoldAnswer(labels=(candidate.label,), temporal=candidate.temporal_value)
        else:
            entity = self.index.entities.get(candidate.entity_id)
            aliases = entity.aliases if entity else ()
            gold = GoldAnswer(labels=(candidate.label,), aliases=aliases, entity_id=candidate.entity_id)
        return answer_present_in(gold, snippets)

    def _phrase_present(self, phrase: str, snippets: list[Evidence], union_text: str) -> bool:
        lowered = union_text.lower()
        linked = self.index.aliases.lookup(phrase)
        if linked:
            entity = self.index.entities[linked[0]]
            if any(entity.id in ev.entity_ids() for ev in snippets):
                return True
            return any(form.lower() in lowered for form in entity.surface_forms())
        return phrase.lower() in lowered

    def _predicate_present(self, relation: str, union_text: str) -> tuple[bool, str]:
        tokens = [t for t in (m.group(0).lower() for m in _TOKEN_RX.finditer(relation))
                  if t not in self.stopwords]
        if not tokens:
            return True, "relation has no content tokens (vacuously present)"
        evidence_tokens = {stem(m.group(0)) for m in _TOKEN_RX.finditer(union_text)}
        evidence_raw = {m.group(0).lower() for m in _TOKEN_RX.finditer(union_text)}
        hits = []
        for token in tokens:
            if stem(token) in evidence_tokens:
                hits.append(token)
            elif self.synonyms.get(token) and self.synonyms[token] & evidence_raw:
                hits.append(token + " (synonym)")
        required = math.ceil(self.theta * len(tokens))
        ok = len(hits) >= required
        return ok, "%d/%d relation tokens in evidence (need %d): %s" % (
            len(hits), len(tokens), required, ", ".join(hits) or "-")

    def _temporal_satisfied(self, result: QAResult, snippets: list[Evidence]) -> tuple[bool, str]:
        tsf = result.tsf
        if tsf.has_constraint:
            constraints = [TemporalConstraint(tsf.signal, v) for v in tsf.temporal_values]
            for ev in snippets:
                for mention in ev.temporal_mentions:
                    for constraint in constraints:
                        if satisfies(mention.value, constraint):
                            return True, "mention %r in %s satisfies %s" % (
                                mention.surface, ev.id, constraint.render())
            return False, "no evidence mention satisfies %s" % " / ".join(c.render() for c in constraints)
        if tsf.wants_temporal_answer and tsf.signal is TemporalSignal.NONE:
            if any(ev.temporal_mentions for ev in snippets):
                return True, "evidence carries temporal mentions for the date lookup"
            return False, "date lookup but evidence carries no temporal mention"
        return True, "no temporal constraint (vacuously satisfied)"


def aggregate_reports(reports: list[FaithfulnessReport]) -> dict:
    """Faithful / temporally-unfaithful rates over a batch of reports."""
    n = len(reports)
    if n == 0:
        return {"verified": 0, "faithful": 0.0, "temporally_unfaithful": 0.0}
    return {
        "verified": n,
        "faithful": sum(1 for r in reports if r.faithful) / n,
        "temporally_unfaithful": sum(1 for r in reports if not r.temporal_satisfied) / n,
    }
