#!/usr/bin/env python3
"""Full pipeline demo against the two built-in stub oracles.

Generates a synthetic corpus, audits annotations and eligibility, runs
the replacement loop against the memorizer stub (which collapses) and
the context-reader stub (which is immune), and prints the resulting F1
deltas and shortcut/diversity comparisons.

Example:
    python scripts/run_demo_pipeline.py --workdir demo/ --n 150 --seed 7
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def cli(*args: str) -> None:
    result = subprocess.run([sys.executable, "-m", "entre.cli", *args])
    if result.returncode != 0:
        raise SystemExit(f"step failed ({result.returncode}): entre {' '.join(args)}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True)
    parser.add_argument("--n", type=int, default=150)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--max-iter", type=int, default=5)
    args = parser.parse_args()

    ws = Path(args.workdir)
    subprocess.run(
        [
            sys.executable, "scripts/make_synthetic_corpus.py",
            "--out", str(ws), "--n", str(args.n), "--seed", str(args.seed),
            "--n-ineligible", "5",
        ],
        check=True,
    )
    memorizer = f"{sys.executable} -m entre.stub_server --spec {ws / 'memorizer_stub.json'}"
    reader = f"{sys.executable} -m entre.stub_server --spec {ws / 'context_stub.json'}"
    ner = f"{sys.executable} -m entre.stub_server --spec {ws / 'ner_stub.json'}"

    cli("audit", "annotations", "--corpus", str(ws / "corpus.json"),
        "--ner-oracle", ner, "--clean-out", str(ws / "clean.json"),
        "--report", str(ws / "disagreements.json"))
    cli("audit", "eligibility", "--corpus", str(ws / "clean.json"),
        "--eligible-out", str(ws / "eligible.json"),
        "--report", str(ws / "ineligible.json"))

    for tag, oracle in (("memorizer", memorizer), ("reader", reader)):
        cli("audit", "shortcuts", "--corpus", str(ws / "eligible.json"),
            "--oracle", oracle, "--report", str(ws / f"shortcuts_before_{tag}.json"))
        cli("run", "--corpus", str(ws / "eligible.json"),
            "--out", str(ws / f"entred_{tag}.json"),
            "--trace", str(ws / f"trace_{tag}.json"),
            "--mode", "full", "--max-iter", str(args.max_iter),
            "--seed", str(args.seed), "--oracle", oracle,
            "--person-lexicon", str(ws / "person.txt"),
            "--org-lexicon", str(ws / "org.txt"))
        cli("audit", "shortcuts", "--corpus", str(ws / f"entred_{tag}.json"),
            "--oracle", oracle, "--report", str(ws / f"shortcuts_after_{tag}.json"))
        cli("audit", "compare",
            "--before", str(ws / f"shortcuts_before_{tag}.json"),
            "--after", str(ws / f"shortcuts_after_{tag}.json"),
            "--out", str(ws / f"shortcut_delta_{tag}.json"))
        cli("eval", "robustness", "--before", str(ws / "eligible.json"),
            "--after", str(ws / f"entred_{tag}.json"), "--oracle", oracle,
            "--report", str(ws / f"delta_{tag}.json"))

    print("\n=== summary ===")
    for tag in ("memorizer", "reader"):
        delta = json.loads((ws / f"delta_{tag}.json").read_text())
        shortcut = json.loads((ws / f"shortcut_delta_{tag}.json").read_text())
        print(
            f"{tag:10s}  F1 {delta['f1_before']:.3f} -> {delta['f1_after']:.3f} "
            f"(drop {100 * delta['relative_drop']:.0f}%), "
            f"shortcut ratio {shortcut['overall']['before_ratio']:.2f} -> "
            f"{shortcut['overall']['after_ratio']:.2f}"
        )


if __name__ == "__main__":
    main()
