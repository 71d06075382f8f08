"""Temporal values at year/month/day granularity and the constraint algebra.

All pruning and consistency checks in the engine reduce to the three
operations defined here: expansion to a day interval, constraint
satisfaction, and intersection.  Values are immutable and every operation
is a pure function, so the module is safe for unrestricted parallel use.

Comparison semantics for BEFORE/AFTER are granule-lenient: AFTER compares
the evidence start against the start of the constraint end's granule (and
dually for BEFORE), so that e.g. the interval 1949-1950 counts as "after"
the interval [1946, 1949].
"""

from __future__ import annotations

import calendar
import datetime
import enum
from dataclasses import dataclass


class Granularity(enum.Enum):
    YEAR = "year"
    MONTH = "month"
    DAY = "day"


class TemporalSignal(enum.Enum):
    """Relation a constraint imposes between evidence time and its value."""

    OVERLAP = "overlap"
    BEFORE = "before"
    AFTER = "after"
    NONE = "none"


@dataclass(frozen=True, order=True)
class TimePoint:
    """A point in time at year, month, or day granularity.

    ``month`` must be present whenever ``day`` is, and a full date must be
    valid under the proleptic Gregorian calendar.
    """

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self):
        if self.day is not None and self.month is None:
            raise ValueError("day requires month: %r" % (self,))
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError("month out of range: %r" % (self,))
        if self.day is not None:
            # raises ValueError for impossible dates (e.g. Feb 30)
            datetime.date(self.year, self.month, self.day)
        elif self.year < datetime.MINYEAR or self.year > datetime.MAXYEAR:
            raise ValueError("year out of range: %r" % (self,))

    @property
    def granularity(self) -> Granularity:
        if self.day is not None:
            return Granularity.DAY
        if self.month is not None:
            return Granularity.MONTH
        return Granularity.YEAR

    def first_day(self) -> datetime.date:
        """First calendar day covered by this point's granule."""
        if self.granularity is Granularity.YEAR:
            return datetime.date(self.year, 1, 1)
        if self.granularity is Granularity.MONTH:
            return datetime.date(self.year, self.month, 1)
        return datetime.date(self.year, self.month, self.day)

    def last_day(self) -> datetime.date:
        """Last calendar day covered by this point's granule."""
        if self.granularity is Granularity.YEAR:
            return datetime.date(self.year, 12, 31)
        if self.granularity is Granularity.MONTH:
            return datetime.date(self.year, self.month, calendar.monthrange(self.year, self.month)[1])
        return datetime.date(self.year, self.month, self.day)

    def render(self) -> str:
        if self.granularity is Granularity.YEAR:
            return "%04d" % self.year
        if self.granularity is Granularity.MONTH:
            return "%04d-%02d" % (self.year, self.month)
        return "%04d-%02d-%02d" % (self.year, self.month, self.day)


@dataclass(frozen=True)
class TemporalValue:
    """A single time point, or an ordered (begin, end) pair of points.

    For pairs the day-expansion of ``begin`` must start no later than the
    day-expansion of ``end`` ends.
    """

    begin: TimePoint
    end: TimePoint | None = None

    def __post_init__(self):
        if self.end is not None:
            if self.begin.first_day() > self.end.last_day():
                raise ValueError("interval begins after it ends: %r" % (self,))

    @property
    def is_interval(self) -> bool:
        return self.end is not None

    @property
    def last(self) -> TimePoint:
        """The end point of a pair, or the point itself."""
        return self.end if self.end is not None else self.begin

    def render(self) -> str:
        if self.end is None:
            return self.begin.render()
        return "%s/%s" % (self.begin.render(), self.end.render())

    @property
    def kind_label(self) -> str:
        """Coarse label used for expected-answer-type matching."""
        if self.is_interval:
            return "time interval"
        return {Granularity.YEAR: "year", Granularity.MONTH: "month", Granularity.DAY: "date"}[
            self.begin.granularity
        ]


@dataclass(frozen=True, order=True)
class DayInterval:
    """Closed interval of proleptic Gregorian day numbers (normal form)."""

    start_day: int
    end_day: int

    def __post_init__(self):
        if self.start_day > self.end_day:
            raise ValueError("start_day > end_day: %r" % (self,))

    @property
    def start_date(self) -> datetime.date:
        return datetime.date.fromordinal(self.start_day)

    @property
    def end_date(self) -> datetime.date:
        return datetime.date.fromordinal(self.end_day)


@dataclass(frozen=True)
class TemporalConstraint:
    """A temporal signal together with the value it relates to."""

    signal: TemporalSignal
    value: TemporalValue

    def __post_init__(self):
        if self.signal is TemporalSignal.NONE:
            raise ValueError("a constraint needs a concrete signal")

    def render(self) -> str:
        return "%s %s" % (self.signal.value, self.value.render())


def expand(value: TemporalValue) -> DayInterval:
    """Expand a value to the full day extent it covers.

    A YEAR point covers Jan 1 - Dec 31, a MONTH point its whole month, and
    a pair expands from the begin granule's start to the end granule's end.
    """
    return DayInterval(value.begin.first_day().toordinal(), value.last.last_day().toordinal())


def satisfies(evidence_value: TemporalValue, constraint: TemporalConstraint) -> bool:
    """Whether a value found in evidence satisfies a temporal constraint."""
    e = expand(evidence_value)
    v = expand(constraint.value)
    if constraint.signal is TemporalSignal.OVERLAP:
        return max(e.start_day, v.start_day) <= min(e.end_day, v.end_day)
    if constraint.signal is TemporalSignal.AFTER:
        # lenient: compare against the start of the constraint end's granule
        return e.start_day >= constraint.value.last.first_day().toordinal()
    if constraint.signal is TemporalSignal.BEFORE:
        # dually: compare against the end of the constraint begin's granule
        return e.end_day <= constraint.value.begin.last_day().toordinal()
    raise ValueError("unsupported signal: %r" % constraint.signal)


def intersect(a: TemporalValue, b: TemporalValue) -> DayInterval | None:
    """Non-empty intersection of the two expansions, or None."""
    ea, eb = expand(a), expand(b)
    start = max(ea.start_day, eb.start_day)
    end = min(ea.end_day, eb.end_day)
    if start > end:
        return None
    return DayInterval(start, end)


def same_extent(a: TemporalValue, b: TemporalValue) -> bool:
    """Whether two values cover exactly the same days."""
    return expand(a) == expand(b)


def year_point(year: int) -> TimePoint:
    return TimePoint(year)


def month_point(year: int, month: int) -> TimePoint:
    return TimePoint(year, month)


def day_point(year: int, month: int, day: int) -> TimePoint:
    return TimePoint(year, month, day)


def parse_point(text: str) -> TimePoint:
    """Parse the canonical renderings YYYY, YYYY-MM and YYYY-MM-DD."""
    parts = text.strip().split("-")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise ValueError("not a canonical time point: %r" % text) from None
    if len(nums) == 1:
        return TimePoint(nums[0])
    if len(nums) == 2:
        return TimePoint(nums[0], nums[1])
    if len(nums) == 3:
        return TimePoint(nums[0], nums[1], nums[2])
    raise ValueError("not a canonical time point: %r" % text)


def parse_value(text: str) -> TemporalValue:
    """Parse the canonical value rendering, including "A/B" intervals."""
    if "/" in text:
        left, _, right = text.partition("/")
        return TemporalValue(parse_point(left), parse_point(right))
    return TemporalValue(parse_point(text))
