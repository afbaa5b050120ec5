from __future__ import annotations

import math
from fractions import Fraction


def state_space_sizes(n: int, m: int):
    """Sizes of the ordered and unordered state spaces for ``m`` objects over ``n`` values.

    Returns ``(ordered, unordered, ratio)`` where ordered = n!/(n-m)!,
    unordered = n!/(m!(n-m)!) and ratio = unordered/ordered = 1/m!.
    Python integers are unbounded, so nothing overflows.
    """
    n, m = int(n), int(m)
    if m < 1:
        raise ValueError("m must be at least 1")
    if m > n:
        raise ValueError(f"cannot place m={m} distinct objects over n={n} values")
    ordered = math.perm(n, m)
    unordered = math.comb(n, m)
    return ordered, unordered, Fraction(unordered, ordered)
