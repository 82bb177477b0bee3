import json
import sys

import pytest

from entre.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from entre.corpus import load_corpus, write_corpus
from entre.manifest import load_manifest, verify_digests
from entre.synthetic import (
    default_trigger_map,
    synthetic_corpus,
    synthetic_lexicon,
    write_lexicon_files,
)


@pytest.fixture
def workspace(tmp_path):
    corpus = synthetic_corpus(20, seed=13, n_ineligible=2)
    write_corpus(corpus, tmp_path / "corpus.json")
    lexicon = synthetic_lexicon(150, 90)
    write_lexicon_files(lexicon, tmp_path / "person.txt", tmp_path / "org.txt")
    (tmp_path / "ctx_stub.json").write_text(
        json.dumps({"kind": "context", "triggers": default_trigger_map()})
    )
    (tmp_path / "ner_stub.json").write_text(
        json.dumps({"kind": "ner_echo", "corpus": "corpus.json"})
    )
    return tmp_path


def stub_cmd(workspace, name: str) -> str:
    return f"{sys.executable} -m entre.stub_server --spec {workspace / name}"


def run_args(workspace, out="out.json", trace="trace.json", seed="7", extra=()):
    return [
        "run",
        "--corpus", str(workspace / "corpus.json"),
        "--out", str(workspace / out),
        "--mode", "fast",
        "--max-iter", "2",
        "--seed", seed,
        "--oracle", stub_cmd(workspace, "ctx_stub.json"),
        "--trace", str(workspace / trace),
        "--person-lexicon", str(workspace / "person.txt"),
        "--org-lexicon", str(workspace / "org.txt"),
        *extra,
    ]


class TestUsage:
    def test_no_subcommand(self, capsys):
        assert main([]) == EXIT_USAGE

    def test_missing_corpus(self, capsys):
        assert main(["corpus", "stats"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["corpus", "stats", "--corpus", "x.json", "--bogus"]) == EXIT_USAGE

    def test_missing_file_is_validation_error(self, tmp_path):
        assert main(["corpus", "stats", "--corpus", str(tmp_path / "nope.json")]) == 1


class TestCorpusCommands:
    def test_stats_to_stdout(self, workspace, capsys):
        assert main(["corpus", "stats", "--corpus", str(workspace / "corpus.json")]) == EXIT_OK
        stats = json.loads(capsys.readouterr().out)
        assert stats["n_sentences"] == 20

    def test_validate_lenient_report(self, workspace, capsys):
        records = json.loads((workspace / "corpus.json").read_text())
        records[0]["obj_end"] = 99
        bad = workspace / "bad.json"
        bad.write_text(json.dumps(records))
        report_path = workspace / "skipped.json"
        code = main([
            "corpus", "validate", "--corpus", str(bad), "--lenient",
            "--report", str(report_path),
        ])
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report["n_skipped"] == 1
        assert report["n_loaded"] == 19

    def test_validate_strict_fails(self, workspace):
        records = json.loads((workspace / "corpus.json").read_text())
        records[0]["obj_end"] = 99
        bad = workspace / "bad.json"
        bad.write_text(json.dumps(records))
        assert main(["corpus", "validate", "--corpus", str(bad)]) == EXIT_VALIDATION


class TestLexiconCommands:
    def test_stats(self, workspace, capsys):
        code = main([
            "lexicon", "stats",
            "--person-lexicon", str(workspace / "person.txt"),
            "--org-lexicon", str(workspace / "org.txt"),
        ])
        assert code == EXIT_OK
        counts = json.loads(capsys.readouterr().out)
        assert counts == {"ORGANIZATION": 90, "PERSON": 150}

    def test_sample_deterministic(self, workspace, capsys):
        args = [
            "lexicon", "sample",
            "--person-lexicon", str(workspace / "person.txt"),
            "--org-lexicon", str(workspace / "org.txt"),
            "--type", "ORGANIZATION", "--n", "4", "--seed", "3",
        ]
        assert main(args) == EXIT_OK
        first = capsys.readouterr().out
        assert main(args) == EXIT_OK
        assert capsys.readouterr().out == first
        assert len(first.splitlines()) == 4


class TestPipelineCommands:
    def test_run_writes_manifest_with_digests(self, workspace):
        assert main(run_args(workspace)) == EXIT_OK
        manifest = load_manifest(workspace / "manifest.json")
        assert manifest["command"] == "run"
        assert manifest["seed"] == 7
        assert manifest["oracle"].startswith("stdio:")
        assert verify_digests(manifest) == []
        assert set(manifest["outputs"]) == {"out", "trace"}

    def test_run_deterministic_across_invocations(self, workspace):
        assert main(run_args(workspace, out="a.json", trace="ta.json")) == EXIT_OK
        manifest_a = load_manifest(workspace / "manifest.json")
        assert main(run_args(workspace, out="b.json", trace="tb.json")) == EXIT_OK
        manifest_b = load_manifest(workspace / "manifest.json")
        assert (workspace / "a.json").read_bytes() == (workspace / "b.json").read_bytes()
        assert (workspace / "ta.json").read_bytes() == (workspace / "tb.json").read_bytes()
        assert (
            manifest_a["outputs"]["out"]["sha256"]
            == manifest_b["outputs"]["out"]["sha256"]
        )

    def test_inputs_never_mutated(self, workspace):
        before = (workspace / "corpus.json").read_bytes()
        assert main(run_args(workspace)) == EXIT_OK
        assert (workspace / "corpus.json").read_bytes() == before

    def test_flag_config_equivalence(self, workspace):
        flags = run_args(workspace, out="flag.json", trace="tf.json")
        assert main(flags) == EXIT_OK
        manifest_flags = load_manifest(workspace / "manifest.json")

        config = {
            "corpus": str(workspace / "corpus.json"),
            "out": str(workspace / "flag.json"),
            "mode": "fast",
            "max_iter": 2,
            "seed": 7,
            "oracle": stub_cmd(workspace, "ctx_stub.json"),
            "trace": str(workspace / "tf.json"),
            "person_lexicon": str(workspace / "person.txt"),
            "org_lexicon": str(workspace / "org.txt"),
        }
        config_path = workspace / "run_config.json"
        config_path.write_text(json.dumps(config))
        assert main(["run", "--config", str(config_path)]) == EXIT_OK
        manifest_config = load_manifest(workspace / "manifest.json")

        drop = ("started_at", "finished_at")
        trimmed_flags = {k: v for k, v in manifest_flags.items() if k not in drop}
        trimmed_config = {k: v for k, v in manifest_config.items() if k not in drop}
        assert trimmed_flags == trimmed_config

    def test_cli_flag_overrides_config(self, workspace):
        config_path = workspace / "run_config.json"
        config_path.write_text(json.dumps({"seed": 99}))
        args = run_args(workspace, extra=["--config", str(config_path)])
        assert main(args) == EXIT_OK
        assert load_manifest(workspace / "manifest.json")["seed"] == 7

    def test_unknown_config_key_rejected(self, workspace):
        config_path = workspace / "run_config.json"
        config_path.write_text(json.dumps({"sedd": 1}))
        assert main(run_args(workspace, extra=["--config", str(config_path)])) == EXIT_USAGE

    def test_oracle_env_override(self, workspace, monkeypatch):
        monkeypatch.setenv("ENTRE_ORACLE", stub_cmd(workspace, "ctx_stub.json"))
        args = run_args(workspace)
        # Point the flag at something that would fail; env must win.
        idx = args.index("--oracle")
        args[idx + 1] = "definitely-not-a-real-command"
        assert main(args) == EXIT_OK
        manifest = load_manifest(workspace / "manifest.json")
        assert "stub_server" in manifest["oracle"]

    def test_oracle_failure_exit_code(self, workspace):
        args = run_args(workspace)
        idx = args.index("--oracle")
        args[idx + 1] = f"{sys.executable} -c 'raise SystemExit(1)'"
        assert main(args) == 2


class TestAuditCommands:
    def test_annotations_and_eligibility(self, workspace):
        code = main([
            "audit", "annotations",
            "--corpus", str(workspace / "corpus.json"),
            "--ner-oracle", stub_cmd(workspace, "ner_stub.json"),
            "--clean-out", str(workspace / "clean.json"),
            "--report", str(workspace / "disagreements.json"),
        ])
        assert code == EXIT_OK
        report = json.loads((workspace / "disagreements.json").read_text())
        assert report["n_flagged"] == 0
        assert len(load_corpus(workspace / "clean.json")) == 20

        code = main([
            "audit", "eligibility",
            "--corpus", str(workspace / "clean.json"),
            "--eligible-out", str(workspace / "eligible.json"),
            "--report", str(workspace / "ineligible.json"),
        ])
        assert code == EXIT_OK
        assert len(load_corpus(workspace / "eligible.json")) == 18

    def test_shortcuts_diversity_compare(self, workspace, capsys):
        for name, corpus_file in (("before", "corpus.json"), ("after", "corpus.json")):
            code = main([
                "audit", "shortcuts",
                "--corpus", str(workspace / corpus_file),
                "--oracle", stub_cmd(workspace, "ctx_stub.json"),
                "--report", str(workspace / f"short_{name}.json"),
            ])
            assert code == EXIT_OK
        code = main([
            "audit", "compare",
            "--before", str(workspace / "short_before.json"),
            "--after", str(workspace / "short_after.json"),
            "--out", str(workspace / "delta.json"),
        ])
        assert code == EXIT_OK
        delta = json.loads((workspace / "delta.json").read_text())
        assert delta["overall"]["absolute_delta"] == 0.0

        assert main([
            "audit", "diversity", "--corpus", str(workspace / "corpus.json"),
        ]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["n_instances"] == 20


class TestEvalCommands:
    def test_score_with_floor(self, workspace):
        corpus = load_corpus(workspace / "corpus.json")
        predictions = [{"id": inst.id, "label": inst.relation} for inst in corpus]
        pred_path = workspace / "preds.json"
        pred_path.write_text(json.dumps(predictions))
        base = [
            "eval", "score",
            "--corpus", str(workspace / "corpus.json"),
            "--predictions", str(pred_path),
            "--report", str(workspace / "score.json"),
        ]
        assert main(base) == EXIT_OK
        assert json.loads((workspace / "score.json").read_text())["f1"] == 1.0
        assert main(base + ["--min-f1", "1.1"]) == EXIT_VALIDATION

    def test_robustness(self, workspace):
        assert main(run_args(workspace, out="entred.json")) == EXIT_OK
        code = main([
            "eval", "robustness",
            "--before", str(workspace / "corpus.json"),
            "--after", str(workspace / "entred.json"),
            "--oracle", stub_cmd(workspace, "ctx_stub.json"),
            "--report", str(workspace / "robust.json"),
        ])
        assert code == EXIT_OK
        delta = json.loads((workspace / "robust.json").read_text())
        assert delta["relative_drop"] == 0.0
