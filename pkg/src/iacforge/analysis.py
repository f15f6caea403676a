"""Edit-distance based mutation complexity."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import EmptyDataset, SizeLimit

MAX_INPUT_BYTES = 1 << 20

LOW_UPPER = 160
MEDIUM_UPPER = 1200


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (insert, delete, substitute; unit costs).

    Bit-parallel over the shorter string, so memory is O(min(len)) bits and
    time is O(len(a) * len(b) / word) with Python's big integers.
    """
    for s in (a, b):
        if len(s) > MAX_INPUT_BYTES or len(s.encode("utf-8")) > MAX_INPUT_BYTES:
            raise SizeLimit("levenshtein inputs are limited to 1 MiB")
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if m == 0:
        return len(a)
    peq: dict[str, int] = {}
    for i, ch in enumerate(b):
        peq[ch] = peq.get(ch, 0) | (1 << i)
    full = (1 << m) - 1
    high = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for ch in a:
        eq = peq.get(ch, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & full)
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = ((ph << 1) | 1) & full
        mh = (mh << 1) & full
        pv = mh | (~(xv | ph) & full)
        mv = ph & xv
    return score


class ComplexityClass(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @property
    def rank(self) -> int:
        return ("Low", "Medium", "High").index(self.value)


def classify_mutation(distance: int) -> ComplexityClass:
    """Half-open bands: [0,160) Low, [160,1200) Medium, [1200,inf) High."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance < LOW_UPPER:
        return ComplexityClass.LOW
    if distance < MEDIUM_UPPER:
        return ComplexityClass.MEDIUM
    return ComplexityClass.HIGH


@dataclass(frozen=True)
class ComplexitySummary:
    distances: tuple[int, ...]
    counts: dict[str, int]
    percentages: dict[str, float]
    cdf: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "n": len(self.distances),
            "counts": self.counts,
            "percentages": self.percentages,
            "cdf": [{"distance": x, "fraction": f} for x, f in self.cdf],
        }


def summarize_distances(distances: Sequence[int], cdf_points: Iterable[float] = ()) -> ComplexitySummary:
    if not distances:
        raise EmptyDataset("no distances to summarize")
    counts = {c.value: 0 for c in ComplexityClass}
    for d in distances:
        counts[classify_mutation(d).value] += 1
    n = len(distances)
    percentages = {k: 100.0 * v / n for k, v in counts.items()}
    ordered = sorted(distances)
    cdf = tuple((float(x), bisect.bisect_right(ordered, x) / n) for x in cdf_points)
    return ComplexitySummary(tuple(distances), counts, percentages, cdf)


def mutation_distance(record) -> int:
    return levenshtein(record.initial, record.mutated)


def complexity_distribution(records: Sequence, cdf_points: Iterable[float] = ()) -> ComplexitySummary:
    """Per-class counts, percentages and an empirical CDF over mutation records.

    Distances are measured on the stored (not canonicalized) texts.
    """
    if not records:
        raise EmptyDataset("no mutation records")
    return summarize_distances([mutation_distance(r) for r in records], cdf_points)
