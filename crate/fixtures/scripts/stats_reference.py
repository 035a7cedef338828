"""Reference values for the paired t-test and paired Cohen's d.

Computed with scipy/numpy, independently of the Rust implementation.
Regenerate with: python3 fixtures/scripts/stats_reference.py > fixtures/oracle/stats_reference.json
"""
import json

import numpy as np
from scipy import stats


def case(name, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, p = stats.ttest_rel(b, a)
    d = b - a
    dz = d.mean() / d.std(ddof=1)
    return {
        "name": name,
        "a": a.tolist(),
        "b": b.tolist(),
        "t": float(t),
        "p": float(p),
        "dof": int(len(a) - 1),
        "cohens_d": float(dz),
    }


def main():
    rng = np.random.default_rng(20240521)
    cases = [
        case("spec-t-example", [1, 2, 3, 4], [2, 3, 5, 6]),
        case("spec-d-example", [0.2, 0.3, 0.1], [0.8, 0.9, 0.85]),
    ]
    for i in range(20):
        n = int(rng.integers(3, 31))
        a = rng.uniform(0.0, 1.0, size=n)
        shift = rng.normal(0.0, 0.3)
        b = np.clip(a + shift + rng.normal(0.0, 0.2, size=n), 0.0, 1.0)
        cases.append(case(f"random-{i:02d}", a.round(6), b.round(6)))
    print(json.dumps({"cases": cases}, indent=2))


if __name__ == "__main__":
    main()
