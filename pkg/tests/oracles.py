"""Independent brute-force oracles for the metric tests.

These deliberately share no code with qgsynth.metrics: n-grams are counted
by list scanning, precisions use exact fractions, and the LCS oracle
enumerates every subsequence. Slow by design; only run on small inputs.
"""

from __future__ import annotations

import math
from fractions import Fraction


def brute_bleu4(candidate: list[str], references: list[list[str]]) -> float:
    if len(candidate) == 0:
        return 0.0
    log_total = 0.0
    for n in (1, 2, 3, 4):
        cand_grams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
        matched = 0
        for gram in set(cand_grams):
            in_candidate = cand_grams.count(gram)
            best_reference = 0
            for ref in references:
                ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
                best_reference = max(best_reference, ref_grams.count(gram))
            matched += min(in_candidate, best_reference)
        total = len(cand_grams)
        if n >= 2 and matched == 0:
            matched, total = matched + 1, total + 1
        if matched == 0 or total == 0:
            return 0.0
        log_total += 0.25 * math.log(Fraction(matched, total))
    c = len(candidate)
    r = sorted((abs(len(ref) - c), len(ref)) for ref in references)[0][1]
    brevity = 1.0 if c >= r else math.exp(1 - Fraction(r, c))
    return brevity * math.exp(log_total)


def brute_lcs(a: list[str], b: list[str]) -> int:
    """Exhaustive subsequence search; only sane for len(a) <= 12."""
    assert len(a) <= 12, "oracle is exponential in len(a)"
    best = 0
    for mask in range(1 << len(a)):
        subsequence = [a[i] for i in range(len(a)) if mask >> i & 1]
        remaining = iter(b)
        if all(token in remaining for token in subsequence):
            best = max(best, len(subsequence))
    return best
