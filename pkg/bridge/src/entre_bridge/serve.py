"""Launcher: load a checkpoint and serve it over stdio or HTTP.

Examples:
    entre-bridge --model ./checkpoints/my-re-model --task relation
    entre-bridge --model dslim/bert-base-NER --task ner \
        --label-map ner_labels.json --transport http --port 8500
"""

from __future__ import annotations

import argparse
import sys

from .config import BridgeConfig, TASKS
from .models import load_model
from .protocol import make_http_server, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entre-bridge", description=__doc__)
    parser.add_argument("--model", required=True, help="checkpoint path or hub id")
    parser.add_argument("--task", choices=TASKS, default="relation")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-length", type=int, default=256)
    parser.add_argument("--label-map", help="JSON file mapping model labels to protocol labels")
    parser.add_argument("--transport", choices=["stdio", "http"], default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument(
        "--reverse-chunk", type=int, default=0,
        help="stdio: buffer N requests and answer them in reverse order",
    )
    parser.add_argument(
        "--reverse", action="store_true",
        help="http: reverse every batch's responses",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(
        model=args.model,
        task=args.task,
        device=args.device,
        batch_size=args.batch_size,
        max_length=args.max_length,
        label_map=args.label_map,
    )
    model = load_model(config)
    print(f"{model.identity}: labels {model.labels}", file=sys.stderr)
    if args.transport == "stdio":
        serve_stdio(model.handle, model.labels, reverse_chunk=args.reverse_chunk)
        return 0
    server = make_http_server(
        model.handle, model.labels, args.host, args.port, reverse=args.reverse
    )
    print(
        f"serving on http://{args.host}:{server.server_address[1]}", file=sys.stderr
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
