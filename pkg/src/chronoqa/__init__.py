"""Faithful temporal question answering over heterogeneous local corpora."""

from .answering import AnswerCandidate, FallbackPolicy, Mode, QAResult, render_trace, result_to_json
from .config import PipelineConfig, load_config
from .corpus import CorpusIndex, Entity, Evidence, Source, ingest
from .pipeline import Pipeline
from .temporal import (
    DayInterval,
    TemporalConstraint,
    TemporalSignal,
    TemporalValue,
    TimePoint,
    expand,
    intersect,
    parse_point,
    parse_value,
    satisfies,
)
from .tempex import TempexParser, strip_temporal
from .understand import TSF, build_tsf, parse_tsf, serialize_tsf
from .verify import FaithfulnessReport, Verifier

__version__ = "0.1.0"

__all__ = [
    "AnswerCandidate", "CorpusIndex", "DayInterval", "Entity", "Evidence",
    "FaithfulnessReport", "FallbackPolicy", "Mode", "Pipeline", "PipelineConfig",
    "QAResult", "Source", "TSF", "TempexParser", "TemporalConstraint",
    "TemporalSignal", "TemporalValue", "TimePoint", "Verifier", "build_tsf",
    "expand", "ingest", "intersect", "load_config", "parse_point", "parse_tsf",
    "parse_value", "render_trace", "result_to_json", "satisfies", "serialize_tsf",
    "strip_temporal",
]
