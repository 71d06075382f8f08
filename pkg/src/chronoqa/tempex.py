"""Rule-based extraction of temporal expressions and signal cues.

The extractor recognizes full dates, month-year combinations, bare years,
ranges in several surface variants, and deictic phrases resolved against a
reference time.  Bare numbers count as years only inside a configurable
plausibility window, which keeps identifiers like "SFOS number, 6267" from
being read as dates.

The rule engine is stateless after construction and safe for unrestricted
parallel use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .temporal import TemporalSignal, TemporalValue, TimePoint

DEFAULT_WINDOW = (1000, 2100)

# Seed cue lexicon; loadable from a "CUE<TAB>SIGNAL" file via load_cue_lexicon.
DEFAULT_CUES: tuple[tuple[str, TemporalSignal], ...] = (
    ("in", TemporalSignal.OVERLAP),
    ("during", TemporalSignal.OVERLAP),
    ("when", TemporalSignal.OVERLAP),
    ("while", TemporalSignal.OVERLAP),
    ("at the time of", TemporalSignal.OVERLAP),
    ("before", TemporalSignal.BEFORE),
    ("prior to", TemporalSignal.BEFORE),
    ("until", TemporalSignal.BEFORE),
    ("after", TemporalSignal.AFTER),
    ("follows", TemporalSignal.AFTER),
    ("since", TemporalSignal.AFTER),
    ("next", TemporalSignal.AFTER),
)

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11,
    "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}

_MONTH_RX = r"(?:%s)\.?" % "|".join(sorted(_MONTHS, key=len, reverse=True))
_DAY_RX = r"[0-3]?\d(?:st|nd|rd|th)?"
_YEAR_RX = r"\d{3,4}"

# A single date-like unit, used standalone and inside range patterns.
_UNIT_RX = (
    r"(?:{day}\s+(?:of\s+)?{mon}\s+{yr}"  # 24 November 1991 / 25th of May 1553
    r"|{mon}\s+{day},?\s+{yr}"            # November 24, 1991
    r"|{mon}\s+{yr}"                      # August 1975
    r"|{yr})"                             # 1975
).format(day=_DAY_RX, mon=_MONTH_RX, yr=_YEAR_RX)

_PATTERNS: tuple[tuple[str, re.Pattern], ...] = tuple(
    (name, re.compile(rx, re.IGNORECASE))
    for name, rx in (
        ("between", r"\bbetween\s+(%s)\s+and\s+(%s)\b" % (_UNIT_RX, _UNIT_RX)),
        ("fromto", r"\bfrom\s+(%s)\s+(?:to|until|through)\s+(%s)\b" % (_UNIT_RX, _UNIT_RX)),
        ("iso", r"\b(\d{4})-(\d{2})-(\d{2})\b"),
        ("range", r"\b(%s)\s*(?:[–—-]|\bto\b)\s*(%s)\b" % (_UNIT_RX, _UNIT_RX)),
        ("unit", r"\b(%s)\b" % _UNIT_RX),
        ("deictic", r"\b(today|now|currently|current)\b"),
    )
)

_UNIT_DMY = re.compile(
    r"(?P<d>[0-3]?\d)(?:st|nd|rd|th)?\s+(?:of\s+)?(?P<m>%s)\s+(?P<y>\d{3,4})$" % _MONTH_RX,
    re.IGNORECASE,
)
_UNIT_MDY = re.compile(
    r"(?P<m>%s)\s+(?P<d>[0-3]?\d)(?:st|nd|rd|th)?,?\s+(?P<y>\d{3,4})$" % _MONTH_RX,
    re.IGNORECASE,
)
_UNIT_MY = re.compile(r"(?P<m>%s)\s+(?P<y>\d{3,4})$" % _MONTH_RX, re.IGNORECASE)
_UNIT_Y = re.compile(r"(?P<y>\d{3,4})$")

_TOKEN_RX = re.compile(r"\w+(?:'\w+)?")


@dataclass(frozen=True)
class TemporalMention:
    """One temporal expression found in text."""

    span: tuple[int, int]
    surface: str
    value: TemporalValue


@dataclass(frozen=True)
class SignalDetection:
    """Detected signal cue; cue_span is present iff the signal is not NONE."""

    signal: TemporalSignal
    cue_span: tuple[int, int] | None = None

    def __post_init__(self):
        if (self.signal is TemporalSignal.NONE) != (self.cue_span is None):
            raise ValueError("cue_span must be present exactly when a cue matched")


@dataclass(frozen=True)
class StripResult:
    """Question text with the temporal phrase removed.

    ``removed_spans`` together with the kept characters cover the original
    question exactly once.  ``implicit_clause`` carries the event phrase of
    an implicit constraint ("Harding died"), when there is one.
    """

    text: str
    removed_spans: tuple[tuple[int, int], ...]
    implicit_clause: str | None = None


def load_cue_lexicon(path: str | Path) -> tuple[tuple[str, TemporalSignal], ...]:
    """Read a cue lexicon file with one "CUE<TAB>SIGNAL" entry per line."""
    cues = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            cue, signal = line.split("\t")
            cues.append((cue.strip().lower(), TemporalSignal(signal.strip().lower())))
        except ValueError:
            raise ValueError("%s:%d: expected 'CUE<TAB>SIGNAL', got %r" % (path, lineno, line)) from None
    return tuple(cues)


def _month_number(token: str) -> int:
    return _MONTHS[token.lower().rstrip(".")]


class TempexParser:
    """Extraction and signal-detection engine with a fixed configuration."""

    def __init__(
        self,
        window: tuple[int, int] = DEFAULT_WINDOW,
        cues: tuple[tuple[str, TemporalSignal], ...] = DEFAULT_CUES,
    ):
        self.window = window
        self.cues = tuple(sorted(cues, key=lambda c: -len(c[0].split())))

    # -- mention extraction -------------------------------------------------

    def _year_ok(self, year: int) -> bool:
        lo, hi = self.window
        return lo <= year <= hi

    def _parse_unit(self, text: str) -> TimePoint | None:
        text = text.strip()
        for rx, has_day, has_month in ((_UNIT_DMY, True, True), (_UNIT_MDY, True, True),
                                       (_UNIT_MY, False, True), (_UNIT_Y, False, False)):
            m = rx.fullmatch(text)
            if not m:
                continue
            year = int(m.group("y"))
            if not self._year_ok(year):
                return None
            try:
                if has_day:
                    return TimePoint(year, _month_number(m.group("m")), int(m.group("d")))
                if has_month:
                    return TimePoint(year, _month_number(m.group("m")))
                return TimePoint(year)
            except ValueError:
                return None
        return None

    def _build_value(self, name: str, m: re.Match, reference_time: TimePoint) -> TemporalValue | None:
        if name == "deictic":
            if reference_time.granularity.value != "day":
                raise ValueError("reference time must have day granularity")
            return TemporalValue(reference_time)
        if name == "iso":
            year = int(m.group(1))
            if not self._year_ok(year):
                return None
            try:
                return TemporalValue(TimePoint(year, int(m.group(2)), int(m.group(3))))
            except ValueError:
                return None
        if name == "unit":
            point = self._parse_unit(m.group(1))
            return TemporalValue(point) if point is not None else None
        # range variants with two units
        begin = self._parse_unit(m.group(1))
        end = self._parse_unit(m.group(2))
        if begin is None or end is None:
            return None
        try:
            return TemporalValue(begin, end)
        except ValueError:
            return None

    def extract_mentions(self, text: str, reference_time: TimePoint) -> list[TemporalMention]:
        """Return non-overlapping mentions, left to right.

        Unparseable text yields an empty list; extraction is deterministic
        and idempotent.
        """
        mentions: list[TemporalMention] = []
        pos = 0
        while pos < len(text):
            candidates = []
            for prio, (name, rx) in enumerate(_PATTERNS):
                m = rx.search(text, pos)
                if m:
                    candidates.append((m.start(), prio, name, m))
            if not candidates:
                break
            candidates.sort(key=lambda c: (c[0], c[1]))
            # only candidates at the earliest start may fire this round;
            # accepting a later one would skip text other patterns still cover
            first_start = candidates[0][0]
            matched = None
            for start, _, name, m in candidates:
                if start != first_start:
                    break
                value = self._build_value(name, m, reference_time)
                if value is not None:
                    matched = TemporalMention((m.start(), m.end()), m.group(0), value)
                    break
            if matched is not None:
                mentions.append(matched)
                pos = matched.span[1]
            else:
                pos = first_start + 1
        return mentions

    # -- signal detection ----------------------------------------------------

    def detect_signal(self, question: str) -> SignalDetection:
        """First matching cue scanning left to right; NONE when none match.

        A sentence-initial "when" marks a lookup question asking for a date,
        not an overlap constraint, and is skipped.
        """
        tokens = [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RX.finditer(question)]
        for i, (tok, start, _) in enumerate(tokens):
            for cue, signal in self.cues:
                parts = cue.split()
                if tok != parts[0] or i + len(parts) > len(tokens):
                    continue
                if [t[0] for t in tokens[i:i + len(parts)]] != parts:
                    continue
                if cue == "when" and i == 0:
                    continue  # interrogative, not a constraint cue
                end = tokens[i + len(parts) - 1][2]
                return SignalDetection(signal, (start, end))
        return SignalDetection(TemporalSignal.NONE)


# Boundary tokens that terminate an implicit clause.
_CLAUSE_BREAK = {"which", "what", "who", "whom", "whose", "where", "how"}
_MAX_CUE_MENTION_GAP = 3


def strip_temporal(
    question: str,
    mentions: list[TemporalMention],
    detection: SignalDetection,
) -> StripResult:
    """Remove the matched temporal phrase (cue plus mention or clause).

    For explicit constraints the cue and its adjacent mention are removed;
    for implicit ones the cue and its trailing clause are removed and the
    clause is reported separately.  Questions without anything to strip are
    returned unchanged.
    """
    removed: list[tuple[int, int]] = []
    implicit_clause = None

    if detection.signal is TemporalSignal.NONE:
        if mentions:
            removed.append(mentions[0].span)
    else:
        cue_start, cue_end = detection.cue_span
        tokens = [(m.group(0), m.start(), m.end()) for m in _TOKEN_RX.finditer(question)]
        after_cue = [t for t in tokens if t[1] >= cue_end]
        mention = next((mn for mn in mentions if mn.span[0] >= cue_end), None)
        gap = None
        if mention is not None:
            gap = len([t for t in after_cue if t[2] <= mention.span[0]])
        if mention is not None and gap <= _MAX_CUE_MENTION_GAP:
            removed.append((cue_start, mention.span[1]))
        else:
            # implicit: clause runs to a comma, a clause-break token, or the end
            end = len(question)
            comma = question.find(",", cue_end)
            if comma != -1:
                end = comma + 1  # the comma goes with the removed phrase
            for tok, start, _ in after_cue:
                if tok.lower() in _CLAUSE_BREAK and start < end:
                    end = start
                    break
            qmark = question.find("?", cue_end)
            if qmark != -1 and qmark < end:
                end = qmark
            clause = question[cue_end:end].strip().strip(",").strip()
            if clause:
                implicit_clause = clause
            removed.append((cue_start, end))

    if not removed:
        return StripResult(question, ())

    removed.sort()
    kept = []
    pos = 0
    for start, end in removed:
        kept.append(question[pos:start])
        pos = end
    kept.append(question[pos:])
    text = re.sub(r"\s+", " ", "".join(kept)).strip()
    text = re.sub(r"\s+([?,.!])", r"\1", text)
    return StripResult(text, tuple(removed), implicit_clause)
