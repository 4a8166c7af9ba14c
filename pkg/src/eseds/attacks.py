"""Snapshot attacks against the legacy layouts.

Every attack consumes only adversary-visible material: equality-class
histograms, leaked orders, and auxiliary knowledge about the plaintext
distribution.  An attack returns an :class:`AttackMapping`, either one
guess per ciphertext class ("class" kind) or one guess per table position
("position" kind).  :func:`score` compares a mapping against the matching
shape of ground truth: a label-to-value dict for class mappings, a
per-position value sequence for position mappings.

Costs in the assignment attacks are kept exact.  With an integer exponent
every cost is an integer; cumulative terms compare count ratios with
different denominators by cross-multiplying instead of dividing, so no
float rounding can flip an argmin.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment


class AttackError(Exception):
    """Attack preconditions not met (wrong shapes, inapplicable target)."""


@dataclass(frozen=True)
class Histogram:
    """Occurrence counts per label, in a fixed significant order."""

    labels: tuple
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.counts):
            raise AttackError("labels and counts must align")
        if any(c < 0 for c in self.counts):
            raise AttackError("negative count")
        if len(set(self.labels)) != len(self.labels):
            raise AttackError("duplicate label")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_labels(cls, labels) -> "Histogram":
        """Count occurrences; label order is ascending label."""
        seen: dict = {}
        for l in labels:
            seen[l] = seen.get(l, 0) + 1
        ordered = sorted(seen)
        return cls(tuple(ordered), tuple(seen[l] for l in ordered))


@dataclass(frozen=True)
class Cdf:
    """Running totals over a histogram's label order, exact by construction.

    ``cum_counts[i]`` is the number of items with label at or before
    position i; the last entry equals ``total``, so the final cumulative
    fraction is exactly 1.
    """

    cum_counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        prev = 0
        for c in self.cum_counts:
            if c < prev:
                raise AttackError("cumulative counts must be non-decreasing")
            prev = c
        if self.cum_counts and self.cum_counts[-1] != self.total:
            raise AttackError("cumulative counts must end at the total")

    @classmethod
    def from_histogram(cls, hist: Histogram) -> "Cdf":
        cum, run = [], 0
        for c in hist.counts:
            run += c
            cum.append(run)
        return cls(tuple(cum), run)

    @property
    def fractions(self) -> tuple[Fraction, ...]:
        if self.total == 0:
            return tuple(Fraction(0) for _ in self.cum_counts)
        return tuple(Fraction(c, self.total) for c in self.cum_counts)


@dataclass(frozen=True)
class AttackMapping:
    """Guesses produced by an attack.

    kind "class": ``guesses`` pairs each ciphertext class label with a
    guessed value (None = no guess).  kind "position": pairs position
    indices 0..n-1 with guessed values.
    """

    kind: str
    guesses: tuple

    def __post_init__(self):
        if self.kind not in ("class", "position"):
            raise AttackError(f"unknown mapping kind {self.kind!r}")

    def as_dict(self) -> dict:
        return dict(self.guesses)

    def guess(self, label):
        return self.as_dict().get(label)

    def expand(self, class_labels) -> "AttackMapping":
        """Per-position mapping from a class mapping, given each position's
        class label.  Lets class attacks be scored per cell."""
        if self.kind != "class":
            raise AttackError("only class mappings expand")
        guesses = self.as_dict()
        return AttackMapping(
            "position", tuple((i, guesses.get(l)) for i, l in enumerate(class_labels))
        )


def score(mapping: AttackMapping, truth) -> float:
    """Fraction of truth entries the mapping guesses correctly.

    ``truth`` is a dict (label -> value) for class mappings and a sequence
    of per-position values for position mappings.  Labels the mapping does
    not cover count as misses.
    """
    if mapping.kind == "position":
        truth = dict(enumerate(truth))
    elif not isinstance(truth, dict):
        raise AttackError("class mapping needs a label -> value truth dict")
    if not truth:
        raise AttackError("empty truth")
    guesses = mapping.as_dict()
    hit = sum(1 for label, value in truth.items() if guesses.get(label) == value)
    return hit / len(truth)


# ---------------------------------------------------------------------------
# assignment machinery
# ---------------------------------------------------------------------------

_PAD = object()  # sentinel label for padding the shorter histogram


def _padded(c_hist: Histogram, m_hist: Histogram):
    """Equalize lengths by appending zero-count entries.

    Padding sits at the end of each order; a padded cumulative entry keeps
    the running total, so it behaves like an empty trailing class.
    """
    c_labels, c_counts = list(c_hist.labels), list(c_hist.counts)
    m_labels, m_counts = list(m_hist.labels), list(m_hist.counts)
    while len(c_labels) < len(m_labels):
        c_labels.append(_PAD)
        c_counts.append(0)
    while len(m_labels) < len(c_labels):
        m_labels.append(_PAD)
        m_counts.append(0)
    return c_labels, c_counts, m_labels, m_counts


def _assign(cost_rows) -> list[int]:
    """Column index per row minimizing the total cost."""
    matrix = np.asarray(cost_rows)
    if matrix.dtype == object:  # ints too large for int64: scale down safely
        matrix = np.asarray(cost_rows, dtype=np.float64)
    _, cols = linear_sum_assignment(matrix)
    return list(cols)


def _finish(c_labels, m_labels, cols) -> AttackMapping:
    guesses = []
    for i, label in enumerate(c_labels):
        if label is _PAD:
            continue
        target = m_labels[cols[i]]
        guesses.append((label, None if target is _PAD else target))
    return AttackMapping("class", tuple(guesses))


# ---------------------------------------------------------------------------
# attacks
# ---------------------------------------------------------------------------


def frequency_analysis(c_hist: Histogram, m_hist: Histogram) -> AttackMapping:
    """Match classes to values by descending frequency.

    Ties break toward the smaller label on both sides.  When there are
    more ciphertext classes than known values, the least frequent classes
    get no guess.
    """
    c_order = sorted(zip(c_hist.labels, c_hist.counts), key=lambda t: (-t[1], t[0]))
    m_order = sorted(zip(m_hist.labels, m_hist.counts), key=lambda t: (-t[1], t[0]))
    guesses = [(c, m) for (c, _), (m, _) in zip(c_order, m_order)]
    for c, _ in c_order[len(m_order):]:
        guesses.append((c, None))
    return AttackMapping("class", tuple(guesses))


def lp_optimization(c_hist: Histogram, m_hist: Histogram, p=1) -> AttackMapping:
    """Minimum-cost matching of classes to values under |Δcount|^p."""
    if p <= 0:
        raise AttackError("exponent must be positive")
    c_labels, c_counts, m_labels, m_counts = _padded(c_hist, m_hist)
    rows = [[abs(c - m) ** p for m in m_counts] for c in c_counts]
    return _finish(c_labels, m_labels, _assign(rows))


def sorting_attack(unique_classes_in_order, domain) -> AttackMapping:
    """Read values straight off a leaked order.

    Applicable only when every domain value occurs exactly once, so the
    i-th class in leaked order must hold value i.
    """
    size = getattr(domain, "size", domain)
    classes = list(unique_classes_in_order)
    if len(set(classes)) != len(classes):
        raise AttackError("classes must be unique")
    if len(classes) != size:
        raise AttackError(
            f"needs one class per domain value: {len(classes)} classes, domain {size}"
        )
    return AttackMapping("class", tuple((c, v) for v, c in enumerate(classes)))


def cumulative_attack(
    c_hist: Histogram, c_cdf: Cdf, m_hist: Histogram, m_cdf: Cdf, p=1
) -> AttackMapping:
    """Match classes to values on frequency and cumulative position jointly.

    Cost of pairing class i with value j is
    |Δfrequency|^p + |Δcumulative_fraction|^p.  Both differences are
    cross-multiplied by the totals to stay in integers: every entry picks
    up the same (Tc*Tm)^p factor, which leaves the argmin untouched.
    With equal totals the argmin coincides with the unnormalized sum of
    count and cumulative-count distances.
    """
    if p <= 0:
        raise AttackError("exponent must be positive")
    if len(c_cdf.cum_counts) != len(c_hist.labels):
        raise AttackError("ciphertext cdf does not match its histogram")
    if len(m_cdf.cum_counts) != len(m_hist.labels):
        raise AttackError("message cdf does not match its histogram")
    tc, tm = max(c_cdf.total, 1), max(m_cdf.total, 1)
    c_labels, c_counts, m_labels, m_counts = _padded(c_hist, m_hist)
    c_cums = list(c_cdf.cum_counts) + [c_cdf.total] * (len(c_labels) - len(c_cdf.cum_counts))
    m_cums = list(m_cdf.cum_counts) + [m_cdf.total] * (len(m_labels) - len(m_cdf.cum_counts))
    rows = []
    for c_n, c_c in zip(c_counts, c_cums):
        rows.append(
            [
                abs(c_n * tm - m_n * tc) ** p + abs(c_c * tm - m_c * tc) ** p
                for m_n, m_c in zip(m_counts, m_cums)
            ]
        )
    return _finish(c_labels, m_labels, _assign(rows))


def bucketing_attack(sorted_cipher_positions, known_multiset) -> AttackMapping:
    """Guess the sorted multiset laid out from the array start.

    Against a secretly rotated sorted array this is the natural static
    guess; its expected score is the average overlap between the sorted
    layout and each of the n rotations.
    """
    positions = list(sorted_cipher_positions)
    guess_values = sorted(known_multiset)
    if len(positions) != len(guess_values):
        raise AttackError("position count must match the known multiset size")
    if sorted(positions) != list(range(len(positions))):
        raise AttackError("positions must be a permutation of 0..n-1")
    per_position = [None] * len(positions)
    for value, pos in zip(guess_values, positions):
        per_position[pos] = value
    return AttackMapping("position", tuple(enumerate(per_position)))
