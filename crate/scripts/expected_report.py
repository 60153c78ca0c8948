#!/usr/bin/env python3
"""Brute-force scoring of a tagged hypothesis against a tagged reference.

Usage: expected_report.py REFERENCE HYPOTHESIS

Prints the report layout of `detgram evaluate` (columns All, Det, aDet,
deDet). Written independently of the Rust evaluator, as a cross-check.
"""
import re
import sys
from fractions import Fraction

TAG = re.compile(r"<(/?)(d|ad|dd)>")


def spans(text):
    raw, out, open_tag, pos = [], [], None, 0
    offset = 0
    for m in TAG.finditer(text):
        raw.append(text[pos:m.start()])
        offset += m.start() - pos
        pos = m.end()
        if m.group(1):
            assert open_tag and open_tag[0] == m.group(2), m.start()
            out.append((open_tag[0], open_tag[1], offset))
            open_tag = None
        else:
            assert open_tag is None, m.start()
            open_tag = (m.group(2), offset)
    raw.append(text[pos:])
    return "".join(raw), out


def pct(n, d):
    if d == 0:
        return 100
    x = Fraction(100 * n, d)
    return int(x + Fraction(1, 2))


def main(ref_path, hyp_path):
    gold_raw, gold = spans(open(ref_path, encoding="utf-8").read())
    hyp_raw, hyp = spans(open(hyp_path, encoding="utf-8").read())
    assert gold_raw == hyp_raw

    def same(a, b):
        return a[1] == b[1] and a[2] == b[2]

    def overlap(a, b):
        return a[1] < b[2] and b[1] < a[2]

    cols = []
    merged = sum(1 for g in gold if any(same(g, h) for h in hyp))
    cols.append((len(gold), len(hyp), merged))
    for tag in ["d", "ad", "dd"]:
        g_t = [g for g in gold if g[0] == tag]
        h_t = [h for h in hyp if h[0] == tag]
        m = sum(1 for g in g_t if any(same(g, h) for h in h_t))
        cols.append((len(g_t), len(h_t), m))

    tag_mismatch = sum(1 for g in gold if any(same(g, h) and g[0] != h[0] for h in hyp))
    gold_free = [g for g in gold if not any(same(g, h) for h in hyp)]
    hyp_free = [h for h in hyp if not any(same(g, h) for g in gold)]
    boundary = sum(1 for g in gold_free if any(overlap(g, h) for h in hyp))
    boundary += sum(1 for h in hyp_free if any(overlap(g, h) for g in gold))
    missed = sum(1 for g in gold_free if not any(overlap(g, h) for h in hyp))
    spurious = sum(1 for h in hyp_free if not any(overlap(g, h) for g in gold))

    rows = [
        "\tAll\tDet\taDet\tdeDet",
        "Precision\t" + "\t".join(f"{pct(m, h)}%" for g, h, m in cols),
        "Recall\t" + "\t".join(f"{pct(m, g)}%" for g, h, m in cols),
        "Gold\t" + "\t".join(str(g) for g, h, m in cols),
        "Hypothesis\t" + "\t".join(str(h) for g, h, m in cols),
        "Matched\t" + "\t".join(str(m) for g, h, m in cols),
        "",
        f"tag_mismatch\t{tag_mismatch}",
        f"boundary_mismatch\t{boundary}",
        f"missed\t{missed}",
        f"spurious\t{spurious}",
    ]
    sys.stdout.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
