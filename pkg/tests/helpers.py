"""Independent oracles used to pin expected values in the test suite.

Everything in this file is deliberately brute force and written from first
principles (linear scans, enumerating rotations or permutations, exact
rationals).  None of it calls into the package's own search, attack, or
assignment logic, so tests compare two independent routes to each answer.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left, bisect_right
from fractions import Fraction


def in_cyclic(v: int, a: int, b: int, modulus: int) -> bool:
    """Membership of v in the cyclic interval [a, b] over Z_modulus."""
    return (v - a) % modulus <= (b - a) % modulus


def brute_match_indices(values: list[int], a: int, b: int, modulus: int) -> set[int]:
    """Decrypt-and-filter reference: indices whose value lies in [a, b]."""
    return {j for j, v in enumerate(values) if in_cyclic(v, a, b, modulus)}


def rotation_starts(values: list[int]) -> list[int]:
    """All w such that reading values[w:] + values[:w] is sorted."""
    n = len(values)
    target = sorted(values)
    return [w for w in range(n) if values[w:] + values[:w] == target]


def is_rotation_of_sorted(values: list[int]) -> bool:
    if not values:
        return True
    return bool(rotation_starts(values))


def linear_jmin(values: list[int], a: int) -> int:
    """Index of the first cell, in rotation reading order, with value >= a.

    Returns len(values) when every value is < a.  Reading order starts at
    the smallest rotation start (index 0 for an all-equal array).
    """
    n = len(values)
    starts = rotation_starts(values)
    w = 0 if len(starts) == n else starts[0]
    p = bisect_left(sorted(values), a)
    return n if p == n else (w + p) % n


def linear_jmax(values: list[int], b: int) -> int:
    """Index of the last cell, in reading order, with value <= b; -1 if none."""
    n = len(values)
    starts = rotation_starts(values)
    w = 0 if len(starts) == n else starts[0]
    p = bisect_right(sorted(values), b) - 1
    return -1 if p < 0 else (w + p) % n


def valid_insert_layouts(values: list[int], m: int) -> set[tuple[int, ...]]:
    """Every cyclic-order-preserving array obtainable by inserting m."""
    layouts = set()
    for slot in range(len(values) + 1):
        cand = values[:slot] + [m] + values[slot:]
        if is_rotation_of_sorted(cand):
            layouts.add(tuple(cand))
    return layouts


def bucketing_expectation(multiset: list[int]) -> Fraction:
    """Expected per-cell accuracy of the sorted-guess attack on a uniformly
    rotated array of the sorted multiset, by enumerating all n rotations."""
    n = len(multiset)
    guess = sorted(multiset)
    total = 0
    for s in range(n):
        rotated = [guess[(j + s) % n] for j in range(n)]
        total += sum(1 for g, t in zip(guess, rotated) if g == t)
    return Fraction(total, n * n)


def brute_assignment(
    c_counts: list[int],
    m_counts: list[int],
    p: int,
    c_cums: list[int] | None = None,
    m_cums: list[int] | None = None,
) -> tuple[int, list[tuple[int, ...]]]:
    """Exact minimum-cost assignment by enumerating all permutations.

    Cost of assigning cipher class i to plaintext class perm[i] is
    |c_counts[i] - m_counts[perm[i]]|**p, plus the analogous cumulative-count
    term when cumulative vectors are supplied.  Returns the minimal cost and
    every permutation achieving it (cost ties are real and must be visible).
    """
    k = len(c_counts)
    assert len(m_counts) == k
    best_cost: int | None = None
    best: list[tuple[int, ...]] = []
    for perm in itertools.permutations(range(k)):
        cost = sum(abs(c_counts[i] - m_counts[perm[i]]) ** p for i in range(k))
        if c_cums is not None:
            assert m_cums is not None
            cost += sum(abs(c_cums[i] - m_cums[perm[i]]) ** p for i in range(k))
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best = [perm]
        elif cost == best_cost:
            best.append(perm)
    assert best_cost is not None
    return best_cost, best


def chi_square_uniform_p(observed: list[int]) -> float:
    """p-value of a chi-square test against the uniform distribution."""
    from scipy import stats

    return float(stats.chisquare(observed).pvalue)
