"""Runnable stub-oracle server: ``python -m entre.stub_server --spec f.json``.

The spec file selects the stub:

  {"kind": "constant", "label": "no_relation"}
  {"kind": "memorizer",
   "pairs": [{"subj": ["John"], "obj": ["Acme"], "relation": "works_at"}]}
  {"kind": "context", "triggers": {"works": "works_at"}}
  {"kind": "ner_echo", "corpus": "corpus.json"}

Optional spec key ``with_scores`` (relation stubs) adds a one-hot score
map to every prediction.  By default the server speaks the line
protocol on stdin/stdout; ``--transport http`` serves the same oracle
over HTTP instead.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import load_corpus
from .oracle.serve import make_http_server, serve_stdio
from .oracle.stubs import (
    annotation_echo_ner,
    constant_oracle,
    context_reader_stub,
    entity_memorizer_stub,
)


def build_stub(spec: dict, base_dir: Path):
    kind = spec.get("kind")
    with_scores = bool(spec.get("with_scores", False))
    if kind == "constant":
        return constant_oracle(spec.get("label", "no_relation"), with_scores=with_scores)
    if kind == "memorizer":
        pairs = {
            (tuple(p["subj"]), tuple(p["obj"])): p["relation"] for p in spec["pairs"]
        }
        return entity_memorizer_stub(pairs, with_scores=with_scores)
    if kind == "context":
        return context_reader_stub(spec["triggers"], with_scores=with_scores)
    if kind == "ner_echo":
        corpus_path = Path(spec["corpus"])
        if not corpus_path.is_absolute():
            corpus_path = base_dir / corpus_path
        return annotation_echo_ner(load_corpus(corpus_path))
    raise SystemExit(f"unknown stub kind: {kind!r}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="entre.stub_server", description=__doc__)
    parser.add_argument("--spec", required=True, help="stub spec JSON file")
    parser.add_argument("--transport", choices=["stdio", "http"], default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument(
        "--reverse-chunk",
        type=int,
        default=0,
        help="stdio: buffer N requests and answer them in reverse order",
    )
    parser.add_argument(
        "--reverse", action="store_true", help="http: reverse every batch's responses"
    )
    args = parser.parse_args(argv)

    spec_path = Path(args.spec)
    spec = json.loads(spec_path.read_text(encoding="utf-8"))
    oracle = build_stub(spec, spec_path.parent)

    if args.transport == "stdio":
        serve_stdio(oracle, reverse_chunk=args.reverse_chunk)
        return 0
    server = make_http_server(oracle, args.host, args.port, reverse=args.reverse)
    print(f"serving on http://{args.host}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
