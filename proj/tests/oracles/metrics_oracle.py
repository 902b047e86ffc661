#!/usr/bin/env python3
"""Independent reference values for the metric fixtures.

Written without looking at the C++ code paths: n-grams via collections.Counter,
LCS by exhaustive subsequence search (inputs are tiny), entropy via Fraction
counts. Prints tests/metric_fixtures.inc to stdout; the output is committed
and the C++ tests read it.
"""
import itertools
import math
from collections import Counter
from fractions import Fraction


def grams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def bleu(hyps, refs):
    # Corpus BLEU-4, uniform weights, Chen & Cherry smoothing 4 with the
    # guards: log length floored at 2, zero candidate count read as 1,
    # all-empty hypotheses score 0.
    c = sum(len(h) for h in hyps)
    r = sum(len(x) for x in refs)
    if c == 0:
        return 0.0
    match = [0] * 4
    total = [0] * 4
    for h, x in zip(hyps, refs):
        for n in range(1, 5):
            hg, rg = grams(h, n), grams(x, n)
            total[n - 1] += sum(hg.values())
            match[n - 1] += sum(min(v, rg[g]) for g, v in hg.items())
    invcnt = 1.0
    logs = []
    for n in range(4):
        denom = max(total[n], 1)
        if match[n] == 0:
            invcnt *= 5.0 / math.log(max(c, 2))
            p = 1.0 / (invcnt * denom)
        else:
            p = match[n] / denom
        logs.append(math.log(p))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(sum(logs) / 4.0)


def lcs_brute(a, b):
    best = 0
    for k in range(min(len(a), len(b)), 0, -1):
        subs_b = set(itertools.combinations(b, k))
        if any(s in subs_b for s in itertools.combinations(a, k)):
            return k
    return best


def rouge_l(h, r):
    if not h:
        return 0.0
    l = lcs_brute(h, r)
    if l == 0:
        return 0.0
    p, rec = Fraction(l, len(h)), Fraction(l, len(r))
    return float(2 * p * rec / (p + rec))


def dist(qs, n):
    allg = Counter()
    for q in qs:
        allg.update(grams(q, n))
    tot = sum(allg.values())
    return 0.0 if tot == 0 else len(allg) / tot


def ent(qs, n=4):
    allg = Counter()
    for q in qs:
        allg.update(grams(q, n))
    tot = sum(allg.values())
    return -sum((v / tot) * math.log(v / tot) for v in allg.values()) if tot else 0.0


S = str.split

BLEU_CASES = [
    ([S("a b c d")], [S("a b c d e")]),
    ([S("what is the name of the cat ?")], [S("what is the name of the cat ?")]),
    ([S("who is it ?")], [S("what is it called ?")]),
    ([S("where did she go ?")], [S("where did he go after school ?")]),
    ([S("what color is it ?"), S("who owns it ?")], [S("what color is the cat ?"), S("who owns the cat ?")]),
    ([S("a b a b a b")], [S("a b c")]),
    ([S("why ?")], [S("why did he leave ?")]),
    ([S("x y z w v")], [S("a b c d")]),
    ([S("the the the the")], [S("the cat sat on the mat")]),
    ([S("did she like it ?"), S("what was it ?"), S("when ?")],
     [S("did she like the food ?"), S("what was the food ?"), S("when did she eat ?")]),
    ([S("how many cats were there in the house ?")], [S("how many cats ?")]),
    ([S("a")], [S("a")]),
    ([[]], [S("a b")]),
]

ROUGE_CASES = [
    (S("a b c"), S("a c d")),
    (S("a b c d"), S("a b c d")),
    (S("a b"), S("c d")),
    (S("what is the name of the cat ?"), S("what was the cat called ?")),
    (S("who is he ?"), S("who was he ?")),
    (S("the the the"), S("the cat the")),
    (S("a b c d e f"), S("f e d c b a")),
    (S("where did they go"), S("where did she go ?")),
    (S("x"), S("x y z")),
    (S("b a c a b"), S("a b c b a")),
    ([], S("a b")),
]

DIST_CASES = [
    ([S("what is it"), S("what is that")], 1),
    ([S("what is it"), S("what is that")], 2),
    ([S("a b c d")], 1),
    ([S("who is he ?")] * 3, 1),
    ([S("who is he ?")] * 3, 2),
    ([S("what color is the cat ?"), S("what color is the dog ?"), S("why ?")], 1),
    ([S("what color is the cat ?"), S("what color is the dog ?"), S("why ?")], 2),
    ([S("a a a a")], 1),
    ([S("a a a a")], 2),
    ([S("did she go ?"), S("did he go ?"), S("where ?")], 2),
    ([S("x")], 2),
]

ENT_CASES = [
    [S("a b c d"), S("a b c d")],
    [S("a b c d e f g")],
    [S("a b c d"), S("a b c d"), S("e f g h"), S("i j k l")],
    [S("what is the name of the cat ?")],
    [S("what is it ?"), S("what is it ?"), S("who is it ?")],
    [S("a a a a a a")],
    [S("a a a a a b")],
    [S("who did she see there ?"), S("who did he see there ?"), S("why ?")],
    [S("a b c")],
    [S("p q r s t"), S("p q r s u"), S("p q r s t")],
    [S("w x y z")] * 5 + [S("z y x w")],
]


def cxx_tokens(t):
    return "{" + ", ".join('"%s"' % w for w in t) + "}"


def cxx_list(ts):
    return "{" + ", ".join(cxx_tokens(t) if t else "Tokens{}" for t in ts) + "}"


print("// Generated by tests/oracles/metrics_oracle.py. Do not edit.")
print("static const BleuFixture kBleuFixtures[] = {")
for h, r in BLEU_CASES:
    print("    {%s, %s, %.17g}," % (cxx_list(h), cxx_list(r), bleu(h, r)))
print("};")
print("static const RougeFixture kRougeFixtures[] = {")
for h, r in ROUGE_CASES:
    print("    {%s, %s, %.17g}," % (cxx_tokens(h), cxx_tokens(r), rouge_l(h, r)))
print("};")
print("static const DistFixture kDistFixtures[] = {")
for qs, n in DIST_CASES:
    print("    {%s, %d, %.17g}," % (cxx_list(qs), n, dist(qs, n)))
print("};")
print("static const EntFixture kEntFixtures[] = {")
for qs in ENT_CASES:
    print("    {%s, %.17g}," % (cxx_list(qs), ent(qs)))
print("};")
