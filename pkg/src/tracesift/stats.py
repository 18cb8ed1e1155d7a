"""Mergeable streaming moments (count, mean, squared-deviation sum, min, max).

Single-value updates use Welford's recurrence; two accumulators combine
with the pairwise formula, so per-rank partial statistics can be folded
into a global view in any order.

Internally the mean is kept as an anchor (the first observation) plus a
small residual, so all deviation arithmetic happens at the data's spread
scale. Without this, lists with a large common offset (e.g. mean 1e9,
spread 1) lose most of m2's precision to cancellation.
"""

from __future__ import annotations

import math


class RunStats:
    """Streaming accumulator for one function's execution times.

    Population convention: variance = m2 / n.
    """

    __slots__ = ("n", "_anchor", "_resid", "m2", "min", "max")

    def __init__(self, n: int = 0, mean: float = 0.0, m2: float = 0.0,
                 min: float = math.inf, max: float = -math.inf):
        self.n = n
        self._anchor = mean
        self._resid = 0.0
        self.m2 = m2
        self.min = min
        self.max = max

    @property
    def mean(self) -> float:
        return self._anchor + self._resid

    def push(self, x: float) -> None:
        """Welford single-observation update, in place."""
        if self.n == 0:
            self._anchor = x
            self._resid = 0.0
        n = self.n = self.n + 1
        y = x - self._anchor  # exact when x is near the anchor
        delta = y - self._resid
        self._resid += delta / n
        self.m2 += delta * (y - self._resid)
        if x < self.min:
            self.min = x
        if x > self.max:
            self.max = x

    @property
    def variance(self) -> float:
        return self.m2 / self.n if self.n > 0 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance) if self.m2 > 0 else 0.0

    def copy(self) -> "RunStats":
        out = RunStats(self.n, self._anchor, self.m2, self.min, self.max)
        out._resid = self._resid
        return out

    def to_dict(self) -> dict:
        d = {"n": self.n, "mean": self.mean, "m2": self.m2}
        if self.n > 0:
            d["min"] = self.min
            d["max"] = self.max
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunStats":
        n = int(d.get("n", 0))
        if n == 0:
            return cls()
        return cls(n, float(d["mean"]), float(d["m2"]),
                   float(d.get("min", math.inf)), float(d.get("max", -math.inf)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunStats):
            return NotImplemented
        if self.n == 0 and other.n == 0:
            return True
        return (self.n, self.mean, self.m2, self.min, self.max) == \
               (other.n, other.mean, other.m2, other.min, other.max)

    def __repr__(self) -> str:
        return (f"RunStats(n={self.n}, mean={self.mean!r}, m2={self.m2!r}, "
                f"min={self.min!r}, max={self.max!r})")


def update_stats(s: RunStats, x: float) -> RunStats:
    """Functional form of the single-observation update."""
    out = s.copy()
    out.push(x)
    return out


def merge_stats(a: RunStats, b: RunStats) -> RunStats:
    """Pairwise combination; empty stats is the identity element."""
    if a.n == 0:
        return b.copy()
    if b.n == 0:
        return a.copy()
    n = a.n + b.n
    # work in a's anchor frame; anchors of same-function stats are close,
    # so the anchor difference is computed without cancellation loss
    b_resid = (b._anchor - a._anchor) + b._resid
    delta = b_resid - a._resid
    out = RunStats(n, a._anchor,
                   a.m2 + b.m2 + delta * delta * (a.n * (b.n / n)),
                   a.min if a.min < b.min else b.min,
                   a.max if a.max > b.max else b.max)
    out._resid = a._resid + delta * (b.n / n)
    return out


def merged_moments(a: RunStats, b: RunStats) -> tuple:
    """(n, mean, m2) of merge_stats(a, b) without allocating a RunStats.

    Hot path for per-span threshold checks against local + global views.
    """
    if a.n == 0:
        return b.n, b.mean, b.m2
    if b.n == 0:
        return a.n, a.mean, a.m2
    n = a.n + b.n
    b_resid = (b._anchor - a._anchor) + b._resid
    delta = b_resid - a._resid
    return (n,
            a._anchor + a._resid + delta * (b.n / n),
            a.m2 + b.m2 + delta * delta * (a.n * (b.n / n)))
