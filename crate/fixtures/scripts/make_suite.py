"""Writes the raw payloads of the synthetic fixture suite.

Two sources x three cohorts, 20 well-formed records each, plus two malformed
payloads and one duplicate per cohort. Tissue values come from fixed
per-cohort category lists so the suite always contains the corruptions the
tests rely on; everything else (ids, ages, sexes, order, surface casing) is
drawn from a seeded RNG.

    python3 fixtures/scripts/make_suite.py fixtures/suite/raw
"""

import random
import shutil
import sys
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

SEED = 20240521

# (tissue value or None for "field absent", count)
TISSUES = {
    "lung": [
        ("lung", 3), ("Lung ", 1), ("lung tissue", 2), ("lung cancer", 3),
        ("plasma of lung patient", 1), ("NSCLC tumor", 1), ("NA", 1), (None, 1),
        ("blood", 2), ("whole blood", 1), ("PBMC", 2), ("bone marrow", 1), ("lymph node", 1),
    ],
    "liver": [
        ("liver", 3), ("Liver", 1), ("liver biopsy", 2), ("HCC", 2), ("liver cancer", 1),
        ("hepatocellular carcinoma", 1), ("blood", 2), ("Whole Blood", 1), ("PBMCs", 2),
        ("NA", 1), (None, 1), ("kidney", 1), ("serum", 1), ("tumor tissue", 1),
    ],
    "ovarian": [
        ("ovary", 3), ("OVARY", 1), ("ovary tissue", 1), ("ovarian tissue", 2),
        ("ovarian cancer", 2), ("high grade serous ovarian cancer", 1), ("blood", 2),
        ("peripheral blood", 1), ("PBMC", 1), ("blood sample", 1), ("ascites", 1),
        ("NA", 1), (None, 1), ("plasma", 1), ("lymph node", 1),
    ],
}

DISEASES = {
    "lung": ["lung adenocarcinoma", "non-small cell lung carcinoma"],
    "liver": ["hepatocellular carcinoma", "liver cancer"],
    "ovarian": ["ovarian serous carcinoma", "ovarian cancer"],
}


def records(rng, source, cohort):
    tissues = [t for t, n in TISSUES[cohort] for _ in range(n)]
    assert len(tissues) == 20, (cohort, len(tissues))
    rng.shuffle(tissues)
    used = set()
    out = []
    for i, tissue in enumerate(tissues):
        while True:
            number = rng.randrange(10_000_000, 40_000_000) if source == "biosample" else rng.randrange(100_000, 9_000_000)
            if number not in used:
                used.add(number)
                break
        rid = f"SAMN{number:08d}" if source == "biosample" else f"GSM{number}"
        fields = [("age", str(rng.randrange(25, 86))), ("sex", rng.choice(["female", "male", "Female", "male"]))]
        if tissue is not None:
            name = "tissue" if source == "biosample" or i % 4 else "tissue type"
            fields.append((name, tissue))
        # a quarter of the records already carry a disease
        if rng.random() < 0.25:
            fields.append(("disease", rng.choice(DISEASES[cohort])))
        title = f"{cohort} cancer study sample {i + 1}"
        out.append((rid, title, fields))
    return out


def biosample_xml(rid, title, fields):
    attrs = "\n".join(
        f"    <Attribute attribute_name={quoteattr(n)}>{escape(v)}</Attribute>" for n, v in fields
    )
    return (
        f'<BioSample accession="{rid}" id="{rid[4:].lstrip("0")}">\n'
        f"  <Description>\n    <Title>{escape(title)}</Title>\n"
        f'    <Organism taxonomy_name="Homo sapiens"/>\n  </Description>\n'
        f"  <Attributes>\n{attrs}\n  </Attributes>\n</BioSample>\n"
    )


def geo_soft(rid, title, fields):
    lines = [f"^SAMPLE = {rid}", f"!Sample_title = {title}", f"!Sample_geo_accession = {rid}",
             "!Sample_organism_ch1 = Homo sapiens"]
    lines += [f"!Sample_characteristics_ch1 = {n}: {v}" for n, v in fields]
    return "\n".join(lines) + "\n"


def malformed(source, k):
    if source == "biosample":
        # unclosed <Attributes>
        return f'<BioSample accession="SAMN9999000{k}">\n  <Attributes>\n    <Attribute attribute_name="tissue">lung</Attribute>\n</BioSample>\n'
    return "this payload lost its fields in transit\n"


def main(out_dir):
    out = Path(out_dir)
    if out.exists():
        shutil.rmtree(out)
    rng = random.Random(SEED)
    for source in ("biosample", "geo"):
        for cohort in ("lung", "liver", "ovarian"):
            d = out / source / cohort
            d.mkdir(parents=True)
            recs = records(rng, source, cohort)
            render = biosample_xml if source == "biosample" else geo_soft
            for rid, title, fields in recs:
                (d / rid).write_text(render(rid, title, fields))
            for k in range(2):
                (d / f"zz-malformed-{k}").write_text(malformed(source, k))
            rid, title, fields = recs[0]
            (d / f"{rid}-dup").write_text(render(rid, title, fields))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures/suite/raw")
