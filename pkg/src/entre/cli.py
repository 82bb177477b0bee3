"""Single entry point wiring corpus ops, lexicon ops, audits, the
replacement loop, and evaluation.

Every value settable by a flag can instead come from a flat JSON config
file (``--config run.json`` with keys equal to the flag names,
underscored); explicit flags win over the config file, which wins over
defaults.  The ``ENTRE_ORACLE`` environment variable overrides any
configured oracle endpoint.  Commands that produce files drop a
``manifest.json`` with input/output digests next to their outputs.

Exit codes: 0 success, 1 validation error, 2 oracle/protocol error,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .audit import (
    ReportMismatchError,
    compare_reports,
    diversity_stats,
    eligibility_filter,
    flag_annotations,
    load_report,
    shortcut_analysis,
)
from .corpus import (
    CorpusError,
    corpus_stats,
    load_corpus,
    load_corpus_with_report,
    write_corpus,
)
from .lexicon import LexiconError, build_lexicon
from .loop import LoopConfig, PipelineError, run_entre
from .manifest import RunManifest
from .oracle.client import NerClient, OracleClient, transport_for
from .oracle.wire import OracleError
from .replace import EligibilityError
from .scoring import load_predictions, robustness_eval, score_instances

logger = logging.getLogger("entre")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ORACLE = 2
EXIT_USAGE = 64

ORACLE_ENV_VAR = "ENTRE_ORACLE"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 (argparse API)
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


@dataclass(frozen=True)
class Opt:
    """One settable value: a flag with a config-file twin."""

    key: str
    default: object = None
    required: bool = False
    type: type = str
    is_flag: bool = False
    choices: tuple | None = None
    help: str = ""

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")


_ORACLE_OPTS = (
    Opt("batch_size", default=64, type=int, help="requests per oracle batch"),
    Opt("workers", default=1, type=int, help="concurrent oracle batches"),
)

COMMANDS: dict[tuple[str, ...], tuple[tuple[Opt, ...], str]] = {}


def command(path: tuple[str, ...], *opts: Opt):
    def register(fn):
        COMMANDS[path] = (opts, fn)
        return fn

    return register


def _add_opts(parser: argparse.ArgumentParser, opts: tuple[Opt, ...]) -> None:
    parser.add_argument("--config", help="flat JSON config file mirroring the flags")
    for opt in opts:
        if opt.is_flag:
            parser.add_argument(
                opt.flag,
                dest=opt.key,
                action=argparse.BooleanOptionalAction,
                default=None,
                help=opt.help,
            )
        else:
            parser.add_argument(
                opt.flag,
                dest=opt.key,
                type=opt.type,
                default=None,
                choices=opt.choices,
                help=opt.help,
            )


def _merge(args: argparse.Namespace, opts: tuple[Opt, ...], parser) -> dict:
    config: dict = {}
    if args.config:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            parser.error("--config must contain a JSON object")
        unknown = set(config) - {o.key for o in opts}
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for opt in opts:
        value = getattr(args, opt.key)
        if value is None:
            value = config.get(opt.key, opt.default)
        merged[opt.key] = value
    for key in ("oracle", "ner_oracle"):
        if key in merged and os.environ.get(ORACLE_ENV_VAR):
            merged[key] = os.environ[ORACLE_ENV_VAR]
    for opt in opts:
        if opt.required and merged[opt.key] is None:
            parser.error(f"the following argument is required: {opt.flag}")
    return merged


def _emit(obj: dict, path: str | None) -> None:
    """Machine-readable output: to the file when given, else stdout."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _finish_manifest(
    command_path: tuple[str, ...],
    merged: dict,
    inputs: dict[str, str],
    outputs: dict[str, str],
    oracle: str | None = None,
    manifest: RunManifest | None = None,
) -> None:
    """Record digests and write one manifest per output directory."""
    if not outputs:
        return
    manifest = manifest or RunManifest(command=" ".join(command_path), config={})
    manifest.config = {k: v for k, v in merged.items()}
    manifest.seed = merged.get("seed")
    manifest.oracle = oracle
    for name, path in inputs.items():
        if path:
            manifest.add_input(name, path)
    for name, path in outputs.items():
        if path:
            manifest.add_output(name, path)
    for directory in sorted({str(Path(p).parent) for p in outputs.values() if p}):
        manifest.write(directory)


def _relation_client(merged: dict, spec_key: str = "oracle") -> OracleClient:
    return OracleClient(
        transport_for(merged[spec_key]),
        batch_size=merged.get("batch_size", 64),
        workers=merged.get("workers", 1),
    )


def _ner_client(merged: dict) -> NerClient:
    return NerClient(
        transport_for(merged["ner_oracle"]),
        batch_size=merged.get("batch_size", 64),
        workers=merged.get("workers", 1),
    )


@command(
    ("corpus", "stats"),
    Opt("corpus", required=True, help="corpus JSON file"),
    Opt("lenient", is_flag=True, default=False, help="skip bad records"),
)
def _corpus_stats(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    _emit(corpus_stats(instances).to_json(), None)
    return EXIT_OK


@command(
    ("corpus", "validate"),
    Opt("corpus", required=True),
    Opt("lenient", is_flag=True, default=False),
    Opt("report", help="write the skipped-record report here"),
)
def _corpus_validate(merged, path):
    instances, skipped = load_corpus_with_report(
        merged["corpus"], lenient=merged["lenient"]
    )
    report = {
        "n_loaded": len(instances),
        "n_skipped": len(skipped),
        "skipped": [s.to_json() for s in skipped],
    }
    _emit(report, merged["report"])
    if merged["report"]:
        _finish_manifest(path, merged, {"corpus": merged["corpus"]}, {"report": merged["report"]})
    logger.info("%d loaded, %d skipped", len(instances), len(skipped))
    return EXIT_OK


@command(
    ("lexicon", "stats"),
    Opt("person_lexicon", required=True, help="newline-delimited person names"),
    Opt("org_lexicon", required=True, help="newline-delimited organization names"),
)
def _lexicon_stats(merged, path):
    lexicon = build_lexicon(merged["person_lexicon"], merged["org_lexicon"])
    _emit(lexicon.counts, None)
    return EXIT_OK


@command(
    ("lexicon", "sample"),
    Opt("person_lexicon", required=True),
    Opt("org_lexicon", required=True),
    Opt("type", default="PERSON", choices=("PERSON", "ORGANIZATION")),
    Opt("n", default=5, type=int),
    Opt("seed", default=0, type=int),
)
def _lexicon_sample(merged, path):
    lexicon = build_lexicon(merged["person_lexicon"], merged["org_lexicon"])
    rng = random.Random(merged["seed"])
    for _ in range(merged["n"]):
        sys.stdout.write(" ".join(lexicon.sample_name(merged["type"], rng=rng)) + "\n")
    return EXIT_OK


@command(
    ("audit", "annotations"),
    Opt("corpus", required=True),
    Opt("ner_oracle", required=True, help="NER oracle: command line or http URL"),
    Opt("clean_out", help="write tagger-agreeing instances here"),
    Opt("report", help="write the disagreement report here"),
    Opt("jaccard", type=float, help="span overlap tolerance (default exact match)"),
    Opt("lenient", is_flag=True, default=False),
    *_ORACLE_OPTS,
)
def _audit_annotations(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    with _ner_client(merged) as client:
        clean, report = flag_annotations(
            instances, client, jaccard_threshold=merged["jaccard"]
        )
        oracle_id = client.identity
    if merged["clean_out"]:
        write_corpus(clean, merged["clean_out"])
    _emit(report.to_json(), merged["report"])
    logger.info(
        "flagged %d/%d instances (%.1f%%)",
        report.n_flagged, report.n_instances, 100 * report.flagged_ratio,
    )
    outputs = {
        k: merged[k] for k in ("clean_out", "report") if merged[k]
    }
    _finish_manifest(path, merged, {"corpus": merged["corpus"]}, outputs, oracle_id)
    return EXIT_OK


@command(
    ("audit", "eligibility"),
    Opt("corpus", required=True),
    Opt("eligible_out", help="write replacement-eligible instances here"),
    Opt("report", help="write the ineligible list here"),
    Opt("lenient", is_flag=True, default=False),
)
def _audit_eligibility(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    eligible, ineligible = eligibility_filter(instances)
    if merged["eligible_out"]:
        write_corpus(eligible, merged["eligible_out"])
    report = {
        "n_eligible": len(eligible),
        "n_ineligible": len(ineligible),
        "ineligible": [{"id": inst.id, "reason": reason} for inst, reason in ineligible],
    }
    _emit(report, merged["report"])
    outputs = {k: merged[k] for k in ("eligible_out", "report") if merged[k]}
    _finish_manifest(path, merged, {"corpus": merged["corpus"]}, outputs)
    return EXIT_OK


@command(
    ("audit", "shortcuts"),
    Opt("corpus", required=True),
    Opt("oracle", required=True, help="relation oracle: command line or http URL"),
    Opt("mask_mode", default="preserve_positions",
        choices=("preserve_positions", "entities_only")),
    Opt("mask_token", default="[MASK]"),
    Opt("report", help="write the shortcut report here"),
    Opt("lenient", is_flag=True, default=False),
    *_ORACLE_OPTS,
)
def _audit_shortcuts(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    with _relation_client(merged) as client:
        report = shortcut_analysis(
            instances, client, mask_mode=merged["mask_mode"], mask_token=merged["mask_token"]
        )
        oracle_id = client.identity
    _emit(report.to_json(), merged["report"])
    for row in sorted(report.per_relation.values(), key=lambda r: r.relation):
        logger.info("%-40s %5d/%5d  %.3f", row.relation, row.n_shortcut, row.n_instances, row.ratio)
    logger.info("overall shortcut ratio: %.3f", report.overall_ratio)
    outputs = {"report": merged["report"]} if merged["report"] else {}
    _finish_manifest(path, merged, {"corpus": merged["corpus"]}, outputs, oracle_id)
    return EXIT_OK


@command(
    ("audit", "diversity"),
    Opt("corpus", required=True),
    Opt("report", help="write the diversity report here"),
    Opt("top_k", default=10, type=int),
    Opt("lenient", is_flag=True, default=False),
)
def _audit_diversity(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    report = diversity_stats(instances, top_k=merged["top_k"])
    _emit(report.to_json(), merged["report"])
    outputs = {"report": merged["report"]} if merged["report"] else {}
    _finish_manifest(path, merged, {"corpus": merged["corpus"]}, outputs)
    return EXIT_OK


@command(
    ("audit", "compare"),
    Opt("before", required=True, help="report JSON from the original corpus"),
    Opt("after", required=True, help="report JSON from the replaced corpus"),
    Opt("out", help="write the delta report here"),
)
def _audit_compare(merged, path):
    delta = compare_reports(load_report(merged["before"]), load_report(merged["after"]))
    _emit(delta, merged["out"])
    outputs = {"out": merged["out"]} if merged["out"] else {}
    _finish_manifest(
        path, merged, {"before": merged["before"], "after": merged["after"]}, outputs
    )
    return EXIT_OK


@command(
    ("run",),
    Opt("corpus", required=True),
    Opt("out", required=True, help="write the replaced corpus here"),
    Opt("mode", default="full", choices=("full", "fast")),
    Opt("max_iter", default=200, type=int),
    Opt("seed", default=0, type=int),
    Opt("oracle", required=True),
    Opt("trace", help="write the loop trace here"),
    Opt("person_lexicon", required=True),
    Opt("org_lexicon", required=True),
    Opt("initial_pass", is_flag=True, default=False,
        help="replace every eligible entity once before the loop"),
    Opt("include_no_relation_matches", is_flag=True, default=True,
        help="full mode: also replace correct no_relation instances"),
    Opt("roles", default="subject,object", help="comma-separated roles to replace"),
    Opt("lenient", is_flag=True, default=False),
    *_ORACLE_OPTS,
)
def _run(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    lexicon = build_lexicon(merged["person_lexicon"], merged["org_lexicon"])
    config = LoopConfig(
        max_iterations=merged["max_iter"],
        mode=merged["mode"],
        seed=merged["seed"],
        initial_pass=merged["initial_pass"],
        eligible_roles=tuple(r.strip() for r in merged["roles"].split(",") if r.strip()),
        include_no_relation_matches=merged["include_no_relation_matches"],
    )
    with _relation_client(merged) as client:
        replaced, trace = run_entre(instances, lexicon, client, config)
        oracle_id = client.identity
    write_corpus(replaced, merged["out"])
    if merged["trace"]:
        trace.write(merged["trace"])
    logger.info(
        "finished after %d iterations, %d replacements, %d oracle requests",
        len(trace.iterations), trace.total_replacements, trace.total_oracle_requests,
    )
    outputs = {"out": merged["out"]}
    if merged["trace"]:
        outputs["trace"] = merged["trace"]
    inputs = {
        "corpus": merged["corpus"],
        "person_lexicon": merged["person_lexicon"],
        "org_lexicon": merged["org_lexicon"],
    }
    _finish_manifest(path, merged, inputs, outputs, oracle_id)
    return EXIT_OK


@command(
    ("eval", "score"),
    Opt("corpus", required=True, help="gold corpus JSON"),
    Opt("predictions", required=True, help="JSON array (or JSONL) of {id, label}"),
    Opt("report", help="write the score report here"),
    Opt("min_f1", type=float, help="exit nonzero when micro-F1 falls below this"),
    Opt("lenient", is_flag=True, default=False),
)
def _eval_score(merged, path):
    instances = load_corpus(merged["corpus"], lenient=merged["lenient"])
    predictions = load_predictions(merged["predictions"])
    report = score_instances(instances, predictions)
    _emit(report.to_json(), merged["report"])
    logger.info("P=%.4f R=%.4f F1=%.4f", report.precision, report.recall, report.f1)
    outputs = {"report": merged["report"]} if merged["report"] else {}
    _finish_manifest(
        path, merged,
        {"corpus": merged["corpus"], "predictions": merged["predictions"]}, outputs,
    )
    if merged["min_f1"] is not None and report.f1 < merged["min_f1"]:
        logger.error("F1 %.4f below the configured floor %.4f", report.f1, merged["min_f1"])
        return EXIT_VALIDATION
    return EXIT_OK


@command(
    ("eval", "robustness"),
    Opt("before", required=True, help="original corpus JSON"),
    Opt("after", required=True, help="replaced corpus JSON"),
    Opt("oracle", required=True),
    Opt("report", help="write the delta report here"),
    Opt("min_f1", type=float, help="exit nonzero when post-replacement F1 falls below this"),
    Opt("lenient", is_flag=True, default=False),
    *_ORACLE_OPTS,
)
def _eval_robustness(merged, path):
    before = load_corpus(merged["before"], lenient=merged["lenient"])
    after = load_corpus(merged["after"], lenient=merged["lenient"])
    with _relation_client(merged) as client:
        delta = robustness_eval(before, after, client)
        oracle_id = client.identity
    _emit(delta.to_json(), merged["report"])
    logger.info(
        "F1 %.4f -> %.4f (relative drop %.1f%%)",
        delta.f1_before, delta.f1_after, 100 * delta.relative_drop,
    )
    outputs = {"report": merged["report"]} if merged["report"] else {}
    _finish_manifest(
        path, merged, {"before": merged["before"], "after": merged["after"]},
        outputs, oracle_id,
    )
    if merged["min_f1"] is not None and delta.f1_after < merged["min_f1"]:
        logger.error("post-replacement F1 %.4f below the floor %.4f",
                     delta.f1_after, merged["min_f1"])
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="entre", description=__doc__)
    parser.add_argument("--version", action="version", version=f"entre {__version__}")
    top = parser.add_subparsers(dest="group", metavar="{corpus,lexicon,audit,run,eval}")
    groups: dict[str, argparse.ArgumentParser] = {}
    for path, (opts, fn) in COMMANDS.items():
        if len(path) == 1:
            sub = top.add_parser(path[0])
            _add_opts(sub, opts)
            sub.set_defaults(_fn=fn, _opts=opts, _path=path)
            continue
        group, name = path
        if group not in groups:
            group_parser = top.add_parser(group)
            groups[group] = group_parser.add_subparsers(dest="subcommand", metavar=name)
        sub = groups[group].add_parser(name)
        _add_opts(sub, opts)
        sub.set_defaults(_fn=fn, _opts=opts, _path=path)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "_fn"):
            parser.error("a subcommand is required")
        merged = _merge(args, args._opts, parser)
        return args._fn(merged, args._path)
    except UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return EXIT_USAGE
    except OracleError as exc:
        sys.stderr.write(f"oracle error: {exc}\n")
        return EXIT_ORACLE
    except (
        CorpusError,
        LexiconError,
        EligibilityError,
        PipelineError,
        ReportMismatchError,
        ValueError,
        OSError,
    ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
