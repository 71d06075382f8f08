"""End-to-end question answering: understand, resolve, retrieve, prune,
cut, extract, rank, and refuse when nothing satisfies the constraint.

The pipeline is re-entrant and read-only over the corpus index; the
implicit-question resolver re-enters it through the same path with a
recursion depth capped at one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .answering import (
    AnswerCandidate,
    FallbackPolicy,
    Mode,
    QAResult,
    StageTrace,
    extract_candidates,
    rank,
)
from .config import PipelineConfig
from .corpus import CorpusIndex, Evidence
from .retrieval import LexicalScorer, link, retrieve, score_and_cut, temporal_prune
from .temporal import TemporalConstraint, TimePoint, expand
from .tempex import DEFAULT_CUES, TempexParser, load_cue_lexicon
from .understand import (
    TSF,
    Category,
    GenerationError,
    RecursionDepthError,
    ResolutionError,
    RuleFrameExtractor,
    RuleIntermediateGenerator,
    build_tsf,
    generate_intermediate,
    resolve_implicit,
)


class PipelineError(Exception):
    pass


@dataclass
class Pipeline:
    """A configured QA engine over one corpus index."""

    index: CorpusIndex
    config: PipelineConfig = PipelineConfig()
    extractor: object = None
    generator: object = None
    scorer: object = None

    def __post_init__(self):
        if self.index is None:
            raise PipelineError("a corpus index must be loaded before answering")
        cues = DEFAULT_CUES
        if self.config.cue_lexicon_path:
            cues = load_cue_lexicon(self.config.cue_lexicon_path)
        self.parser = TempexParser(self.config.window, cues)
        if self.extractor is None:
            self.extractor = RuleFrameExtractor(self.index, self.parser, self.config.stopwords)
        if self.generator is None:
            self.generator = RuleIntermediateGenerator(self.parser)
        if self.scorer is None:
            self.scorer = LexicalScorer(self.config.stopwords)

    # -- public surface ------------------------------------------------------

    def understand(self, question: str, reference_time: TimePoint) -> TSF:
        return build_tsf(question, reference_time, self.extractor, self.parser)

    def answer(
        self,
        question: str,
        reference_time: TimePoint,
        mode: Mode | None = None,
        fallback: FallbackPolicy | None = None,
        resolver_top_k: int | None = None,
        collect_stages: bool = False,
    ) -> QAResult:
        """Answer one question; refusal is an ordinary, non-error outcome."""
        mode = mode if mode is not None else Mode(self.config.mode)
        fallback = fallback if fallback is not None else FallbackPolicy(self.config.fallback)
        top_k = resolver_top_k if resolver_top_k is not None else self.config.resolver_top_k
        result = self._answer(question, reference_time, mode, top_k, 0, collect_stages)
        if result.refused and fallback is FallbackPolicy.ON_REFUSAL and mode is Mode.FAITHFUL:
            retry = self._answer(question, reference_time, Mode.UNFAITHFUL, top_k, 0, collect_stages)
            warning = "fallback: no temporally consistent evidence; unfaithful answer, verify manually"
            return QAResult(
                question=retry.question, tsf=retry.tsf, answers=retry.answers,
                refused=retry.refused, mode=Mode.UNFAITHFUL, fallback_used=True,
                trace=retry.trace, evidence=retry.evidence,
                warnings=retry.warnings + (warning,), stages=retry.stages,
            )
        return result

    # -- internal ------------------------------------------------------------

    def _answer(self, question, reference_time, mode, top_k, depth, collect_stages) -> QAResult:
        tsf = self.understand(question, reference_time)
        if depth > 0 and tsf.category is Category.IMPLICIT:
            raise RecursionDepthError("intermediate question was classified implicit: %r" % question)

        warnings: list[str] = []
        trace: tuple = ()
        if tsf.category is Category.IMPLICIT:
            try:
                intermediates = generate_intermediate(question, tsf, self.generator)
                handle = lambda q: self._answer(q, reference_time, mode, top_k, depth + 1, collect_stages)
                tsf, steps = resolve_implicit(tsf, handle, top_k, intermediates)
                trace = tuple(steps)
            except (GenerationError, ResolutionError) as exc:
                trace = tuple(getattr(exc, "trace", ()))
                if mode is Mode.FAITHFUL:
                    return self._refusal(question, tsf, mode, trace, [str(exc)], collect_stages)
                warnings.append("implicit constraint unresolved, answering without it: %s" % exc)

        linked = link(tsf, self.index)
        retrieved = retrieve(tsf, self.index, self.parser, linked)
        pruned = temporal_prune(retrieved, tsf) if mode is Mode.FAITHFUL else list(retrieved)
        cut = score_and_cut(pruned, tsf, self.config.k, self.scorer)
        by_id = {ev.id: ev for ev in cut}
        candidates = extract_candidates(cut, tsf, self.index, frozenset(e.id for e in linked))
        ranked = rank(candidates, tsf, by_id, self.config.weights, self.scorer)

        stages = None
        if collect_stages:
            stages = StageTrace(
                tuple(ev.id for ev in retrieved),
                tuple(ev.id for ev in pruned),
                tuple(ev.id for ev in cut),
            )

        if mode is Mode.FAITHFUL:
            refused = not ranked
        else:
            refused = not retrieved
        if refused:
            if tsf.has_constraint:
                miss = self._nearest_miss(retrieved, tsf)
                if miss:
                    warnings.append(miss)
            return self._refusal(question, tsf, mode, trace, warnings, collect_stages, stages)

        evidence_map = self._referenced_evidence(ranked, by_id)
        return QAResult(
            question=question, tsf=tsf, answers=tuple(ranked), refused=False, mode=mode,
            fallback_used=False, trace=trace, evidence=evidence_map,
            warnings=tuple(warnings), stages=stages,
        )

    def _refusal(self, question, tsf, mode, trace, warnings, collect_stages, stages=None) -> QAResult:
        if stages is None and collect_stages:
            stages = StageTrace((), (), ())
        return QAResult(
            question=question, tsf=tsf, answers=(), refused=True, mode=mode,
            fallback_used=False, trace=tuple(trace), evidence={},
            warnings=tuple(warnings), stages=stages,
        )

    @staticmethod
    def _referenced_evidence(ranked: list[AnswerCandidate], by_id: dict[str, Evidence]) -> dict[str, Evidence]:
        referenced: dict[str, Evidence] = {}
        for cand in ranked:
            for eid in cand.supporting_evidence:
                if eid in by_id:
                    referenced[eid] = by_id[eid]
        return dict(sorted(referenced.items()))

    @staticmethod
    def _nearest_miss(retrieved: list[Evidence], tsf: TSF) -> str | None:
        """Describe the closest non-matching evidence for refusal traces."""
        constraints = [TemporalConstraint(tsf.signal, v) for v in tsf.temporal_values]
        best = None
        for ev in retrieved:
            for mention in ev.temporal_mentions:
                e = expand(mention.value)
                for constraint in constraints:
                    v = expand(constraint.value)
                    gap = max(0, e.start_day - v.end_day, v.start_day - e.end_day)
                    if best is None or gap < best[0]:
                        best = (gap, mention.surface, ev)
        if best is None:
            return "no retrieved evidence carries a temporal mention"
        gap, surface, ev = best
        return (
            "violated constraint %s; nearest non-matching evidence %s (%s, mention '%s', %d days away): %s"
            % (
                " / ".join(c.render() for c in constraints),
                ev.id, ev.source.value, surface, gap, ev.text,
            )
        )
