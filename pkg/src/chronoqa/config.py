"""Pipeline configuration: documented defaults and key=value files."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

# 50 English function words; config-loadable, used by the lexical scorer and
# by the predicate-overlap check in the faithfulness verifier.
DEFAULT_STOPWORDS = frozenset("""
a an the of in on at for by with from to and or but is are was were be been
do does did have has had he she it they them his her its their this that
these those who whom which what when where why how not as while during
before after until since
""".split())


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration knobs; defaults reproduce the documented settings
    (evidence cutoff 100, resolver top-1, ranking weights 0.5/0.4/0.1)."""

    corpus: str | None = None
    window: tuple[int, int] = (1000, 2100)
    cue_lexicon_path: str | None = None
    stopword_path: str | None = None
    synonym_path: str | None = None
    scorer_endpoint: str | None = None
    extractor_endpoint: str | None = None
    generator_endpoint: str | None = None
    rephraser_endpoint: str | None = None
    k: int = 100
    resolver_top_k: int = 1
    mode: str = "faith"
    fallback: str = "never"
    weights: tuple[float, float, float] = (0.5, 0.4, 0.1)
    sigma: float = 0.5
    theta: float = 0.3
    seed: int = 13
    stopwords: frozenset[str] = field(default=DEFAULT_STOPWORDS, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1, got %r" % (self.k,))
        if self.resolver_top_k < 1:
            raise ConfigError("resolver_top_k must be >= 1, got %r" % (self.resolver_top_k,))
        if self.mode not in ("faith", "unfaith"):
            raise ConfigError("mode must be 'faith' or 'unfaith', got %r" % (self.mode,))
        if self.fallback not in ("never", "on-refusal"):
            raise ConfigError("fallback must be 'never' or 'on-refusal', got %r" % (self.fallback,))
        if self.window[0] > self.window[1]:
            raise ConfigError("plausibility window is reversed: %r" % (self.window,))
        if len(self.weights) != 3 or any(w < 0 for w in self.weights):
            raise ConfigError("weights must be three non-negative numbers: %r" % (self.weights,))
        if not 0 <= self.sigma <= 1 or not 0 <= self.theta <= 1:
            raise ConfigError("sigma and theta must lie in [0, 1]")


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words if w)


def load_synonyms(path: str | Path) -> dict[str, frozenset[str]]:
    """Synonym table file: "token: alt1, alt2" per line."""
    table: dict[str, frozenset[str]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        token, _, rest = line.partition(":")
        table[token.strip().lower()] = frozenset(t.strip().lower() for t in rest.split(",") if t.strip())
    return table


_TUPLE_KEYS = {"window", "weights"}
_INT_KEYS = {"k", "resolver_top_k", "seed"}
_FLOAT_KEYS = {"sigma", "theta"}


def parse_config_file(path: str | Path) -> dict:
    """Parse a line-oriented key=value config file into constructor kwargs."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key=value, got %r" % (path, lineno, line))
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        try:
            if key in _TUPLE_KEYS:
                parts = [p.strip() for p in raw.split(",")]
                values[key] = tuple(int(p) if key == "window" else float(p) for p in parts)
            elif key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            else:
                values[key] = raw
        except ValueError:
            raise ConfigError("%s:%d: bad value for %s: %r" % (path, lineno, key, raw)) from None
    return values


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Build a config from an optional file plus keyword overrides."""
    values = parse_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = PipelineConfig(**values)
    if config.stopword_path:
        config = replace(config, stopwords=load_stopwords(config.stopword_path))
    return config
