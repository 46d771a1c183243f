"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

from itertools import combinations


def brute_lcs_len(a: str, b: str) -> int:
    subs = {a[i:j] for i in range(len(a)) for j in range(i + 1, len(a) + 1)}
    return max((len(s) for s in subs if s in b), default=0)


def brute_lcs_distance(a: str, b: str) -> float:
    m = max(len(a), len(b))
    return 0.0 if m == 0 else 1.0 - brute_lcs_len(a, b) / m


def suffix_oracle(n: int, k: int) -> list[int]:
    return list(range(n))[-k:] if k < n else list(range(n))


def even_spacing_oracle(n: int, m: int) -> list[int]:
    """Among all m-subsets containing both endpoints, minimise the largest gap, then
    the deviation from the ideal grid j*(n-1)/(m-1) (ties broken toward later picks)."""
    if m >= n:
        return list(range(n))
    if m == 1:
        return [n - 1]
    best, best_key = None, None
    for mid in combinations(range(1, n - 1), m - 2):
        picks = (0, *mid, n - 1)
        gaps = max(b - a for a, b in zip(picks, picks[1:]))
        dev = sum(abs(2 * p * (m - 1) - 2 * j * (n - 1)) for j, p in enumerate(picks))
        key = (gaps, dev, tuple(-p for p in picks))
        if best_key is None or key < best_key:
            best, best_key = list(picks), key
    return best


def grid_oracle(n: int, m: int) -> list[int]:
    """Nearest index to each ideal grid point j*(n-1)/(m-1), halves rounded up, via fractions."""
    from fractions import Fraction
    import math

    if m >= n:
        return list(range(n))
    if m == 1:
        return [n - 1]
    return [math.floor(Fraction(j * (n - 1), m - 1) + Fraction(1, 2)) for j in range(m)]


def composition_oracle(n: int, k: int) -> list[int]:
    if n <= k:
        return list(range(n))
    tail = k - k // 2
    pool = n - tail
    return grid_oracle(pool, k // 2) + list(range(pool, n)) if k // 2 else list(range(pool, n))


def brute_consistency(r: list[str], g: list[str], denominator: str = "as_paper") -> float:
    n = len(r)
    total = sum(1 - brute_lcs_distance(r[i], r[i + 1]) + brute_lcs_distance(g[i], g[i + 1]) for i in range(n - 1))
    return total / (n if denominator == "as_paper" else n - 1)
