"""HTTP clients for the pluggable model endpoints.

Every endpoint speaks a small JSON contract: the scorer takes
{"query", "evidence"} and returns {"score"}; the text-to-text endpoints
(frame extractor, intermediate-question generator, rephraser) take
{"input"} and return {"output"} in the pipe-separated formats the
deterministic baselines also use.
"""

from __future__ import annotations

import requests

from .temporal import TemporalSignal, TimePoint
from .understand import AnswerKind, Category, FrameSlots

DEFAULT_TIMEOUT = 10.0


class EndpointError(Exception):
    pass


def _post(url: str, payload: dict, timeout: float) -> dict:
    try:
        response = requests.post(url, json=payload, timeout=timeout)
        response.raise_for_status()
        return response.json()
    except requests.RequestException as exc:
        raise EndpointError("endpoint %s failed: %s" % (url, exc)) from exc


class HttpScorer:
    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        self.url = url
        self.timeout = timeout

    def __call__(self, query: str, evidence_text: str) -> float:
        data = _post(self.url, {"query": query, "evidence": evidence_text}, self.timeout)
        if "score" not in data:
            raise EndpointError("scorer response lacks 'score': %r" % data)
        return float(data["score"])


class HttpTextEndpoint:
    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        self.url = url
        self.timeout = timeout

    def generate(self, text: str) -> str:
        data = _post(self.url, {"input": text}, self.timeout)
        if "output" not in data:
            raise EndpointError("endpoint response lacks 'output': %r" % data)
        return str(data["output"])


class HttpRephraser(HttpTextEndpoint):
    def __call__(self, pseudo: str) -> str:
        return self.generate(pseudo)


class HttpFrameExtractor(HttpTextEndpoint):
    """Frame extractor over the five-slot pipe format."""

    def __call__(self, question: str, reference_time: TimePoint) -> FrameSlots:
        raw = self.generate(question)
        fields = raw.split("||")
        if len(fields) != 5:
            raise EndpointError("extractor output must have 5 fields: %r" % raw)
        entities, relation, expected, signal, category = (f.strip() for f in fields)
        phrases = tuple(p for p in (s.strip() for s in entities.split(",")) if p)
        try:
            parsed_signal = TemporalSignal(signal.lower()) if signal else TemporalSignal.NONE
            parsed_category = Category(category.lower())
        except ValueError:
            raise EndpointError("extractor output has bad signal/category: %r" % raw) from None
        return FrameSlots(phrases, relation, expected, parsed_signal, parsed_category)


class HttpIntermediateGenerator(HttpTextEndpoint):
    """Intermediate-question generator over the "question||kind" format."""

    def __call__(self, question: str, tsf) -> tuple[str, AnswerKind]:
        raw = self.generate(question)
        base, _, kind = raw.partition("||")
        base = base.strip().rstrip("?")
        try:
            parsed = AnswerKind(kind.strip().lower())
        except ValueError:
            raise EndpointError("generator output has bad answer kind: %r" % raw) from None
        if not base:
            raise EndpointError("generator output has no question text: %r" % raw)
        return base, parsed
