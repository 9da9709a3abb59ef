#!/usr/bin/env python3
"""Independent golden lists for hash-ordered subset selection.

Selection key: SHA-256(seed || 0x1F || id); items ordered by digest bytes
ascending, first n taken. Regenerates tests/fixtures/subset_golden.json.
"""

import hashlib
import json
import pathlib


def select(ids, seed, n):
    keyed = sorted(ids, key=lambda i: hashlib.sha256(
        seed.encode() + b"\x1f" + i.encode()).digest())
    return keyed[:n]


def main():
    cases = []

    ids10 = [f"item-{i}" for i in range(10)]
    cases.append({
        "seed": "s1",
        "n": 3,
        "universe": len(ids10),
        "ids": select(ids10, "s1", 3),
    })

    ids1000 = [f"item-{i}" for i in range(1000)]
    cases.append({
        "seed": "paper",
        "n": 100,
        "universe": len(ids1000),
        "ids": select(ids1000, "paper", 100),
    })

    out = pathlib.Path(__file__).resolve().parent.parent / \
        "crates" / "exitlens" / "tests" / "fixtures" / "subset_golden.json"
    out.write_text(json.dumps(cases, indent=2) + "\n")
    print(f"wrote {out}")
    for c in cases:
        print(f"  seed={c['seed']} n={c['n']} first3={c['ids'][:3]}")


if __name__ == "__main__":
    main()
