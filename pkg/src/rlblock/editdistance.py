"""String edit distances."""

from __future__ import annotations


def levenshtein(a: str, b: str, cutoff: int | None = None) -> int:
    """Levenshtein distance with a two-row buffer.

    With ``cutoff`` set, returns ``cutoff`` as soon as every entry of the
    current row reaches it (the final distance can only be larger), so the
    result is exact below the cutoff and capped at it otherwise.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if cutoff is not None and len(a) - len(b) >= cutoff:
        return cutoff
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if cutoff is not None and min(cur) >= cutoff:
            return cutoff
        prev = cur
    d = prev[-1]
    return d if cutoff is None else min(d, cutoff)


def damerau_levenshtein(a: str, b: str) -> int:
    """Unrestricted Damerau-Levenshtein distance (adjacent transpositions cost 1).

    Unlike optimal string alignment this is a true metric.
    """
    inf = len(a) + len(b)
    last_row: dict[str, int] = {}
    d = [[inf] * (len(b) + 2) for _ in range(len(a) + 2)]
    for i in range(len(a) + 1):
        d[i + 1][0] = inf
        d[i + 1][1] = i
    for j in range(len(b) + 1):
        d[0][j + 1] = inf
        d[1][j + 1] = j
    for i in range(1, len(a) + 1):
        last_match_col = 0
        for j in range(1, len(b) + 1):
            i1 = last_row.get(b[j - 1], 0)
            j1 = last_match_col
            cost = 1
            if a[i - 1] == b[j - 1]:
                cost = 0
                last_match_col = j
            d[i + 1][j + 1] = min(
                d[i][j] + cost,
                d[i + 1][j] + 1,
                d[i][j + 1] + 1,
                d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1),
            )
        last_row[a[i - 1]] = i
    return d[len(a) + 1][len(b) + 1]
