"""Brute-force golden report for the fixture suite.

Reads the corpus JSONL files directly and recomputes every number with
plain set arithmetic, scipy for the paired t-test. Writes JSON laid out
like the Rust report so the two can be compared byte for byte.

    python3 fixtures/scripts/golden_report.py fixtures/suite > fixtures/suite/golden/report.json
"""

import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats

SOURCES = ["biosample", "geo"]
COHORTS = ["lung", "liver", "ovarian"]
CONDITIONS = ["baseline", "dd", "cedar"]
QUERIES = {
    "lung": ["tissue:lung", "tissue:blood"],
    "liver": ["tissue:liver", "tissue:blood"],
    "ovarian": ["tissue:ovary", "tissue:blood"],
}
SYNONYMS = {"tissue type": "tissue", "tissue_type": "tissue", "organism name": "organism"}


def canon(text):
    return " ".join(text.split()).lower()


def tissue_value(record):
    for pair in record["fields"]:
        name = canon(pair["name"])
        if SYNONYMS.get(name, name) == "tissue":
            v = canon(pair["value"])
            return None if v == "na" else v
    return None


def gold(value):
    v = value or ""
    if "lung" in v:
        return "lung"
    if "liver" in v or "hcc" in v:
        return "liver"
    if "ovary" in v or "ovarian" in v:
        return "ovary"
    if "pbmc" in v or "blood" in v:
        return "blood"
    if "plasma" in v:
        return "plasma"
    if "lymph" in v:
        return "lymph"
    return "unknown"


def load(root, source, cohort, condition):
    path = root / "corpora" / condition / f"{source}-{cohort}-{condition}.jsonl"
    lines = path.read_text().splitlines()
    return [json.loads(l) for l in lines[1:] if l.strip()]


def prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 0.0 if p + r == 0 else 2.0 * p * r / (p + r)
    return p, r, f


def mean(xs):
    s = 0.0
    for x in xs:
        s += x
    return s / len(xs)


def real(x):
    s = "%.10f" % x
    return "0.0000000000" if s == "-0.0000000000" else s


def main(root):
    root = Path(root)
    cells = []
    footnotes = []
    for source in SOURCES:
        for cohort in COHORTS:
            base = load(root, source, cohort, "baseline")
            labels = {r["id"]: gold(tissue_value(r)) for r in base}
            for condition in CONDITIONS:
                corpus = load(root, source, cohort, condition)
                for query in sorted(QUERIES[cohort]):
                    value = query.split(":", 1)[1]
                    relevant = {i for i, l in labels.items() if l == value}
                    retrieved = {r["id"] for r in corpus if tissue_value(r) == value}
                    tp = len(relevant & retrieved)
                    fp = len(retrieved - relevant)
                    fn = len(relevant - retrieved)
                    p, r, f = prf(tp, fp, fn)
                    tag = f"{source}/{cohort}/{condition} {query}"
                    if not retrieved:
                        footnotes.append(f"{tag}: no records retrieved; precision reported as 0")
                    if not relevant:
                        footnotes.append(f"{tag}: no relevant records; recall reported as 0")
                    cells.append(dict(source=source, cohort=cohort, condition=condition, query=query,
                                      relevant=len(relevant), retrieved=len(retrieved),
                                      tp=tp, fp=fp, fn=fn, p=p, r=r, f=f))

    by_source = []
    overall = []
    for condition in CONDITIONS:
        per_source = []
        for source in SOURCES:
            per_cohort = []
            for cohort in COHORTS:
                sel = [c for c in cells if (c["source"], c["cohort"], c["condition"]) == (source, cohort, condition)]
                per_cohort.append(tuple(mean([c[k] for c in sel]) for k in "prf"))
            m = tuple(mean([pc[i] for pc in per_cohort]) for i in range(3))
            per_source.append(m)
            by_source.append((source, condition, m))
        overall.append((condition, tuple(mean([ps[i] for ps in per_source]) for i in range(3))))
    by_source.sort(key=lambda s: (SOURCES.index(s[0]), CONDITIONS.index(s[1])))

    comparisons = []
    for a, b in [("baseline", "dd"), ("dd", "cedar"), ("baseline", "cedar")]:
        key = lambda c: (SOURCES.index(c["source"]), COHORTS.index(c["cohort"]), c["query"])
        xa = [c["r"] for c in sorted((c for c in cells if c["condition"] == a), key=key)]
        xb = [c["r"] for c in sorted((c for c in cells if c["condition"] == b), key=key)]
        res = stats.ttest_rel(xb, xa)
        diff = np.array(xb) - np.array(xa)
        d = diff.mean() / diff.std(ddof=1)
        comparisons.append((a, b, len(xa), float(res.statistic), float(res.pvalue), len(xa) - 1, float(d)))

    out = []
    w = out.append
    w("{")
    w('  "averaging": "macro",')
    w('  "cells": [')
    for i, c in enumerate(cells):
        w("    {")
        w(f'      "source": "{c["source"]}",')
        w(f'      "cohort": "{c["cohort"]}",')
        w(f'      "condition": "{c["condition"]}",')
        w(f'      "query": "{c["query"]}",')
        for k in ["relevant", "retrieved", "tp", "fp", "fn"]:
            w(f'      "{k}": {c[k]},')
        w(f'      "precision": {real(c["p"])},')
        w(f'      "recall": {real(c["r"])},')
        w(f'      "f1": {real(c["f"])}')
        w("    }" + ("," if i + 1 < len(cells) else ""))
    w("  ],")

    def metric_lines(m, indent):
        return [f'{indent}"precision": {real(m[0])},', f'{indent}"recall": {real(m[1])},', f'{indent}"f1": {real(m[2])}']

    w('  "by_source": [')
    for i, (source, condition, m) in enumerate(by_source):
        w("    {")
        w(f'      "source": "{source}",')
        w(f'      "condition": "{condition}",')
        out.extend(metric_lines(m, "      "))
        w("    }" + ("," if i + 1 < len(by_source) else ""))
    w("  ],")
    w('  "overall": [')
    for i, (condition, m) in enumerate(overall):
        w("    {")
        w(f'      "condition": "{condition}",')
        out.extend(metric_lines(m, "      "))
        w("    }" + ("," if i + 1 < len(overall) else ""))
    w("  ],")
    w('  "comparisons": [')
    for i, (a, b, n, t, p, dof, d) in enumerate(comparisons):
        w("    {")
        w(f'      "condition_a": "{a}",')
        w(f'      "condition_b": "{b}",')
        w('      "metric": "recall",')
        w(f'      "n_pairs": {n},')
        w(f'      "t_statistic": {real(t)},')
        w(f'      "p_value": {real(p)},')
        w(f'      "degrees_of_freedom": {dof},')
        w(f'      "cohens_d": {real(d)}')
        w("    }" + ("," if i + 1 < len(comparisons) else ""))
    w("  ],")
    if footnotes:
        w('  "footnotes": [')
        for i, f in enumerate(footnotes):
            w(f"    {json.dumps(f)}" + ("," if i + 1 < len(footnotes) else ""))
        w("  ]")
    else:
        w('  "footnotes": []')
    w("}")
    sys.stdout.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures/suite")
