#!/usr/bin/env python3
"""Independent high-precision reference values for the unit tests.

Writes tests/data/golden.json, or with --check compares a frozen file
against a fresh evaluation and exits nonzero on mismatch.
"""

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50


def rounding_zero_prob(r):
    r = mp.mpf(r)
    return mp.erf(r) + (mp.exp(-r * r) - 1) / (r * mp.sqrt(mp.pi))


def grassberger(n):
    # G(1) = -gamma - ln 2, G(2) = 2 - gamma - ln 2,
    # G(2m+1) = G(2m), G(2m+2) = G(2m) + 2/(2m+1)
    if n == 1:
        return -mp.euler - mp.log(2)
    g = 2 - mp.euler - mp.log(2)
    m = 1
    while 2 * m < n - (n % 2):
        g += mp.mpf(2) / (2 * m + 1)
        m += 1
    return g


def corrected_entropy(counts, alphabet):
    n = sum(counts)
    s = sum(c * grassberger(c) for c in counts if c > 0)
    return (mp.log(n) - s / n) / mp.log(alphabet)


def kl(p_counts, q_counts, alphabet, pseudo):
    pseudo = mp.mpf(pseudo)
    np_ = sum(p_counts) + pseudo * len(p_counts)
    nq = sum(q_counts) + pseudo * len(q_counts)
    total = mp.mpf(0)
    for a, b in zip(p_counts, q_counts):
        p = (a + pseudo) / np_
        q = (b + pseudo) / nq
        total += p * mp.log(p / q)
    return total / mp.log(alphabet)


def kl_distance(p_counts, q_counts, alphabet, pseudo=0.5):
    return (kl(p_counts, q_counts, alphabet, pseudo) / corrected_entropy(p_counts, alphabet)
            + kl(q_counts, p_counts, alphabet, pseudo) / corrected_entropy(q_counts, alphabet))


def markov_fixture_entropies():
    """Exact 4-symbol entropies of the three-level fixture chain.

    Top-level moves 0/1/2 are uniform; move 1 -> r = -0.4, move 2 -> r = 0.4,
    move 0 emits a sub-move 3/4/5 with returns -0.3/0.1/0.2 drawn from a
    circulant law on the previous sub-move. Quartile symbols:
    -0.4 -> 0, -0.3 and 0.1 -> 1 (Q2 = 0.1), 0.2 -> 2, 0.4 -> 3.
    """
    third = Fraction(1, 3)
    t = {3: {3: Fraction(1, 6), 4: Fraction(1, 3), 5: Fraction(1, 2)},
         4: {3: Fraction(1, 2), 4: Fraction(1, 6), 5: Fraction(1, 3)},
         5: {3: Fraction(1, 3), 4: Fraction(1, 2), 5: Fraction(1, 6)}}
    symbol = {1: 0, 3: 1, 4: 1, 5: 2, 2: 3}

    # Hidden state: last sub-move (3, 4 or 5), uniform stationary law.
    # Emission at a step: top-level 1 or 2 (prob 1/3 each), or a sub-move
    # drawn from t[last] (prob 1/3), which also updates the hidden state.
    def step(last):
        out = [(1, last, third), (2, last, third)]
        for nxt, pr in t[last].items():
            out.append((nxt, nxt, third * pr))
        return out

    p1 = {}
    p2 = {}
    for last in (3, 4, 5):
        w0 = Fraction(1, 3)
        for m1, s1, q1 in step(last):
            a = symbol[m1]
            p1[a] = p1.get(a, 0) + w0 * q1
            for m2, _, q2 in step(s1):
                b = symbol[m2]
                p2[(a, b)] = p2.get((a, b), 0) + w0 * q1 * q2

    def h(dist):
        return -sum(mp.mpf(v.numerator) / v.denominator * mp.log(mp.mpf(v.numerator) / v.denominator)
                    for v in dist.values() if v > 0) / mp.log(4)

    return {"h1": h(p1), "h2": h(p2) / 2, "p11": p2[(1, 1)]}


def upgma_three_leaf():
    # d(A,B) = 1, d(A,C) = 4, d(B,C) = 4 by hand: merge (A,B) at 1, then C
    # joins at (1*4 + 1*4)/2 = 4.
    return [[0, 1, 1.0, 2], [2, 3, 4.0, 3]]


def build():
    fixture = markov_fixture_entropies()
    values = {
        "rounding_zero_prob": {
            "1": float(rounding_zero_prob(1)),
            "0.01": float(rounding_zero_prob(mp.mpf("0.01"))),
            "50": float(rounding_zero_prob(50)),
        },
        "grassberger": {str(n): float(grassberger(n)) for n in (1, 2, 3, 4, 5, 6, 100, 101)},
        "kl_distance_75_25_vs_50_50_A4": float(kl_distance([75, 25], [50, 50], 4)),
        "kl_divergence_75_25_vs_50_50_A4": float(kl([75, 25], [50, 50], 4, 0.5)),
        "markov_fixture": {
            "h1": float(fixture["h1"]),
            "h2": float(fixture["h2"]),
            "p11": [fixture["p11"].numerator, fixture["p11"].denominator],
        },
        "staleness_bound_n1000_p001": float(10 + mp.mpf("1.96") * mp.sqrt(mp.mpf("9.9"))),
        "upgma_three_leaf": upgma_three_leaf(),
        "block_length": {
            # direct enumeration of the K < floor(log_A n_b(K)) rule
            "A4_n1000": select_k(4, 1000),
            "A3_n1000": select_k(3, 1000),
            "A4_n10000": select_k(4, 10000),
        },
    }
    return values


def floor_log(n, base):
    k = 0
    while base ** (k + 1) <= n:
        k += 1
    return k


def select_k(alphabet, n):
    best = 1
    for k in range(2, 64):
        nb = n - k + 1
        if nb < 1:
            break
        if k < floor_log(nb, alphabet):
            best = k
    return best


def close(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-13 * max(1.0, abs(a))
    return a == b


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path,
                        default=Path(__file__).resolve().parents[1] / "data" / "golden.json")
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()
    values = build()
    if args.check:
        frozen = json.loads(args.out.read_text())
        if not close(frozen, values):
            print("frozen golden values differ from the oracle", file=sys.stderr)
            return 1
        print("golden values match the oracle")
        return 0
    args.out.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
