"""Closed real intervals used as enclosures of estimated quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi) and not (math.isnan(self.lo) or math.isnan(self.hi)):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(value, value)

    @classmethod
    def hull(cls, values) -> "Interval":
        values = list(values)
        return cls(min(values), max(values))

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def overlaps(self, other: "Interval", tol: float = 0.0) -> bool:
        return self.lo <= other.hi + tol and other.lo <= self.hi + tol

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def scale(self, lo_factor: float, hi_factor: float | None = None) -> "Interval":
        """Multiply endpoints of a nonnegative interval by positive factors."""
        if hi_factor is None:
            hi_factor = lo_factor
        return Interval(self.lo * lo_factor, self.hi * hi_factor)

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo - other.hi, self.hi - other.lo)
        return Interval(self.lo - other, self.hi - other)

    def __mul__(self, other):
        if isinstance(other, Interval):
            products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
            return Interval(min(products), max(products))
        if other >= 0:
            return Interval(self.lo * other, self.hi * other)
        return Interval(self.hi * other, self.lo * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Interval):
            if other.lo <= 0.0 <= other.hi:
                raise ZeroDivisionError("division by an interval containing 0")
            return self * Interval(1.0 / other.hi, 1.0 / other.lo)
        return self * (1.0 / other)

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]

    def __repr__(self) -> str:
        return f"[{self.lo:.12g}, {self.hi:.12g}]"


ZERO = Interval(0.0, 0.0)


def interval_sum(items) -> Interval:
    """Sum intervals with compensated summation on each endpoint."""
    items = list(items)
    if not items:
        return ZERO
    return Interval(math.fsum(i.lo for i in items), math.fsum(i.hi for i in items))
