"""Scoring metrics: binary F1 for yes/no answers, chance-corrected Jaccard
for multiple-choice selections.

The multiple-choice null model treats the gold set and the predicted set as
independent uniform random subsets (of their observed sizes) of the item's
variant list, so the intersection size is hypergeometric and its mean is
``size_a * size_b / universe_size``.  ``expected_jaccard`` is the first-order
ratio-of-expectations approximation used for chance correction; the
enumeration routines compute the exact null values for small universes and
serve as independent test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Collection, Sequence

ENUMERATION_LIMIT = 12
_DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class BinaryConfusion:
    """Confusion counts for binary verdicts; positive class = predominant."""

    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_pairs(cls, gold: Sequence[bool], pred: Sequence[bool]) -> "BinaryConfusion":
        if len(gold) != len(pred):
            raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
        tp = fp = fn = tn = 0
        for g, p in zip(gold, pred):
            if g and p:
                tp += 1
            elif not g and p:
                fp += 1
            elif g and not p:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, fn, tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0


def f1_binary(gold: Sequence[bool], pred: Sequence[bool]) -> float:
    """Binary F1 = 2*tp / (2*tp + fp + fn); 0.0 when the denominator is 0."""
    return BinaryConfusion.from_pairs(gold, pred).f1


def jaccard(a: Collection, b: Collection) -> float:
    """|A n B| / |A u B|; two empty sets count as identical (1.0)."""
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    if union == 0:
        return 1.0
    return len(sa & sb) / union


def _check_sizes(universe_size: int, size_a: int, size_b: int) -> None:
    if universe_size < 1:
        raise ValueError(f"universe size must be >= 1, got {universe_size}")
    for name, size in (("first", size_a), ("second", size_b)):
        if not 1 <= size <= universe_size:
            raise ValueError(
                f"{name} set size must be in 1..{universe_size}, got {size}"
            )


def expected_intersection(universe_size: int, size_a: int, size_b: int) -> float:
    """Mean intersection size of two independent uniform random subsets."""
    _check_sizes(universe_size, size_a, size_b)
    return size_a * size_b / universe_size


def expected_jaccard(universe_size: int, size_a: int, size_b: int) -> float:
    """First-order approximation of the null-model mean Jaccard.

    E[X] / E[|A u B|] = s*t / (N*(s+t) - s*t).  This is the chance term the
    adjusted score corrects with; it is deliberately not the exact E[J]
    (see ``exact_expected_jaccard`` for that).
    """
    _check_sizes(universe_size, size_a, size_b)
    st = size_a * size_b
    return st / (universe_size * (size_a + size_b) - st)


def adjusted_jaccard(a: Collection, b: Collection, universe_size: int) -> float:
    """Chance-corrected Jaccard (J - E[J]) / (1 - E[J]), clipped to [0, 1].

    Equals 1.0 exactly when A == B, 0.0 when the observed overlap does not
    exceed chance level.  When both sets fill the universe the correction is
    degenerate (E[J] = 1) and the score is 1.0 since J is necessarily 1.
    """
    sa, sb = set(a), set(b)
    if not sa or not sb:
        raise ValueError("adjusted_jaccard requires non-empty sets")
    if universe_size < max(len(sa), len(sb)):
        raise ValueError(
            f"universe size {universe_size} smaller than a set ({len(sa)}, {len(sb)})"
        )
    if sa == sb:
        return 1.0
    chance = expected_jaccard(universe_size, len(sa), len(sb))
    if 1.0 - chance < _DEGENERATE_EPS:
        return 1.0
    value = (jaccard(sa, sb) - chance) / (1.0 - chance)
    return max(value, 0.0)


def _enumerate_null(universe_size: int, size_a: int, size_b: int):
    """Yield (intersection size, count) over all subset pairs of the null model."""
    _check_sizes(universe_size, size_a, size_b)
    if universe_size > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration supports universe sizes up to {ENUMERATION_LIMIT}, got {universe_size}"
        )
    masks_a = [_mask(c) for c in combinations(range(universe_size), size_a)]
    masks_b = [_mask(c) for c in combinations(range(universe_size), size_b)]
    for ma in masks_a:
        for mb in masks_b:
            yield (ma & mb).bit_count()


def _mask(positions) -> int:
    m = 0
    for p in positions:
        m |= 1 << p
    return m


def exact_expected_intersection(universe_size: int, size_a: int, size_b: int) -> float:
    """Exact null-model E[|A n B|] by brute-force enumeration of subset pairs."""
    total = 0
    count = 0
    for x in _enumerate_null(universe_size, size_a, size_b):
        total += x
        count += 1
    return float(Fraction(total, count))


def exact_expected_jaccard(universe_size: int, size_a: int, size_b: int) -> float:
    """Exact null-model E[J] by brute-force enumeration of subset pairs.

    Averages X / (s + t - X) over all C(N,s) * C(N,t) subset pairs with
    rational arithmetic; the first-order formula in ``expected_jaccard``
    under-estimates this for small universes.
    """
    total = Fraction(0)
    count = 0
    for x in _enumerate_null(universe_size, size_a, size_b):
        total += Fraction(x, size_a + size_b - x)
        count += 1
    return float(total / count)
