#!/usr/bin/env python3
"""Generate a synthetic workspace: corpus, lexicon files, and stub specs.

Example:
    python scripts/make_synthetic_corpus.py --out work/ --n 200 --seed 7
"""

import argparse
import json
from pathlib import Path

from entre.corpus import write_corpus
from entre.synthetic import (
    default_trigger_map,
    synthetic_corpus,
    synthetic_lexicon,
    write_lexicon_files,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n", type=int, default=100, help="corpus size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-ineligible", type=int, default=0)
    parser.add_argument("--lexicon-size", type=int, default=2000,
                        help="names per replacement pool")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    corpus = synthetic_corpus(args.n, seed=args.seed, n_ineligible=args.n_ineligible)
    write_corpus(corpus, out / "corpus.json")
    lexicon = synthetic_lexicon(args.lexicon_size, args.lexicon_size)
    write_lexicon_files(lexicon, out / "person.txt", out / "org.txt")

    (out / "context_stub.json").write_text(
        json.dumps({"kind": "context", "triggers": default_trigger_map()}, indent=2)
    )
    pairs = [
        {"subj": list(i.subject_name), "obj": list(i.object_name), "relation": i.relation}
        for i in corpus
        if i.relation != "no_relation"
    ]
    (out / "memorizer_stub.json").write_text(
        json.dumps({"kind": "memorizer", "pairs": pairs}, indent=2)
    )
    (out / "ner_stub.json").write_text(
        json.dumps({"kind": "ner_echo", "corpus": "corpus.json"}, indent=2)
    )
    print(f"wrote {args.n} instances plus lexicons and stub specs to {out}/")


if __name__ == "__main__":
    main()
