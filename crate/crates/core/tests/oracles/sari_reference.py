#!/usr/bin/env python3
"""Sentence-level SARI, following the released reference implementation.

Usage: sari_reference.py [--empty-is-one] < cases.tsv
Each input line is `source<TAB>candidate<TAB>ref1<TAB>ref2...` with
space-separated tokens; each output line is the overall score (0-100) and
the twelve per-n components `keep del add` for n = 1..4.

With --empty-is-one, a component whose candidate-side and reference-side
sets are both empty scores 1 instead of 0.
"""
import sys
from collections import Counter


def ngrams(tokens, n):
    return [" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def sari_ngram(sgrams, cgrams, rgramslist, numref, empty_is_one):
    rgramsall = [g for rgrams in rgramslist for g in rgrams]
    rgramcounter = Counter(rgramsall)

    sgramcounter = Counter(sgrams)
    sgramcounter_rep = Counter()
    for g, c in sgramcounter.items():
        sgramcounter_rep[g] = c * numref

    cgramcounter = Counter(cgrams)
    cgramcounter_rep = Counter()
    for g, c in cgramcounter.items():
        cgramcounter_rep[g] = c * numref

    # KEEP
    keepgramcounter_rep = sgramcounter_rep & cgramcounter_rep
    keepgramcountergood_rep = keepgramcounter_rep & rgramcounter
    keepgramcounterall_rep = sgramcounter_rep & rgramcounter

    keeptmpscore1 = 0
    keeptmpscore2 = 0
    for g in keepgramcountergood_rep:
        keeptmpscore1 += keepgramcountergood_rep[g] / keepgramcounter_rep[g]
        keeptmpscore2 += keepgramcountergood_rep[g] / keepgramcounterall_rep[g]
    keepscore_precision = 0
    if len(keepgramcounter_rep) > 0:
        keepscore_precision = keeptmpscore1 / len(keepgramcounter_rep)
    keepscore_recall = 0
    if len(keepgramcounterall_rep) > 0:
        keepscore_recall = keeptmpscore2 / len(keepgramcounterall_rep)
    keepscore = 0
    if keepscore_precision > 0 or keepscore_recall > 0:
        keepscore = 2 * keepscore_precision * keepscore_recall / (keepscore_precision + keepscore_recall)
    if empty_is_one and not keepgramcounter_rep and not keepgramcounterall_rep:
        keepscore = 1

    # DELETION
    delgramcounter_rep = sgramcounter_rep - cgramcounter_rep
    delgramcountergood_rep = delgramcounter_rep - rgramcounter
    delgramcounterall_rep = sgramcounter_rep - rgramcounter
    deltmpscore1 = 0
    for g in delgramcountergood_rep:
        deltmpscore1 += delgramcountergood_rep[g] / delgramcounter_rep[g]
    delscore_precision = 0
    if len(delgramcounter_rep) > 0:
        delscore_precision = deltmpscore1 / len(delgramcounter_rep)
    if empty_is_one and not delgramcounter_rep and not delgramcounterall_rep:
        delscore_precision = 1

    # ADDITION
    addgramcounter = set(cgramcounter) - set(sgramcounter)
    addgramcountergood = set(addgramcounter) & set(rgramcounter)
    addgramcounterall = set(rgramcounter) - set(sgramcounter)

    addtmpscore = 0
    for _ in addgramcountergood:
        addtmpscore += 1
    addscore_precision = 0
    addscore_recall = 0
    if len(addgramcounter) > 0:
        addscore_precision = addtmpscore / len(addgramcounter)
    if len(addgramcounterall) > 0:
        addscore_recall = addtmpscore / len(addgramcounterall)
    addscore = 0
    if addscore_precision > 0 or addscore_recall > 0:
        addscore = 2 * addscore_precision * addscore_recall / (addscore_precision + addscore_recall)
    if empty_is_one and not addgramcounter and not addgramcounterall:
        addscore = 1

    return keepscore, delscore_precision, addscore


def sari_sent(source, candidate, references, empty_is_one):
    s = source.lower().split(" ")
    c = candidate.lower().split(" ")
    rs = [r.lower().split(" ") for r in references]
    parts = []
    for n in range(1, 5):
        parts.append(sari_ngram(ngrams(s, n), ngrams(c, n), [ngrams(r, n) for r in rs], len(rs), empty_is_one))
    keep = sum(p[0] for p in parts) / 4
    dele = sum(p[1] for p in parts) / 4
    add = sum(p[2] for p in parts) / 4
    return 100 * (keep + dele + add) / 3, parts


def main():
    empty_is_one = "--empty-is-one" in sys.argv[1:]
    for line in sys.stdin:
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        score, parts = sari_sent(fields[0], fields[1], fields[2:], empty_is_one)
        flat = [repr(float(v)) for p in parts for v in p]
        print(repr(float(score)), *flat)


if __name__ == "__main__":
    main()
