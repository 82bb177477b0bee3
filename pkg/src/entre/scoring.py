"""Micro-F1 scoring with no_relation as the background class.

Zero-denominator conventions mirror the official TACRED scorer so
numbers stay comparable with published results: precision is 1.0 when
nothing was guessed, recall is 1.0 when there is no positive gold.
Per-relation rows attribute a false positive to the predicted relation
and a false negative to the gold relation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import NO_RELATION, REInstance
from .oracle.client import OracleClient

REPORT_SCHEMA_VERSION = 1


def _prf(n_correct: int, n_guessed: int, n_gold: int) -> tuple[float, float, float]:
    precision = n_correct / n_guessed if n_guessed > 0 else 1.0
    recall = n_correct / n_gold if n_gold > 0 else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


@dataclass
class RelationScore:
    relation: str
    n_correct: int = 0
    n_guessed: int = 0
    n_gold: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[0]

    @property
    def recall(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[1]

    @property
    def f1(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[2]

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "n_correct": self.n_correct,
            "n_guessed": self.n_guessed,
            "n_gold": self.n_gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class EvalReport:
    n_correct: int
    n_guessed: int
    n_gold: int
    per_relation: dict[str, RelationScore] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[0]

    @property
    def recall(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[1]

    @property
    def f1(self) -> float:
        return _prf(self.n_correct, self.n_guessed, self.n_gold)[2]

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_correct": self.n_correct,
            "n_guessed": self.n_guessed,
            "n_gold": self.n_gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_relation": [
                self.per_relation[r].to_json() for r in sorted(self.per_relation)
            ],
        }


def micro_f1(golds: Sequence[str], preds: Sequence[str]) -> EvalReport:
    """Score aligned gold/predicted label sequences.

    Counts: guessed = predictions != no_relation, gold = golds !=
    no_relation, correct = exact positive matches.
    """
    if len(golds) != len(preds):
        raise ValueError(f"length mismatch: {len(golds)} golds vs {len(preds)} preds")
    n_correct = n_guessed = n_gold = 0
    per_relation: dict[str, RelationScore] = {}

    def row(relation: str) -> RelationScore:
        return per_relation.setdefault(relation, RelationScore(relation))

    for gold, pred in zip(golds, preds):
        if pred != NO_RELATION:
            n_guessed += 1
            row(pred).n_guessed += 1
        if gold != NO_RELATION:
            n_gold += 1
            row(gold).n_gold += 1
        if pred == gold != NO_RELATION:
            n_correct += 1
            row(gold).n_correct += 1
    return EvalReport(
        n_correct=n_correct, n_guessed=n_guessed, n_gold=n_gold, per_relation=per_relation
    )


def score_instances(
    instances: Sequence[REInstance], predictions: dict[str, str]
) -> EvalReport:
    golds = [inst.relation for inst in instances]
    preds = [predictions[inst.id] for inst in instances]
    return micro_f1(golds, preds)


@dataclass
class DeltaReport:
    """Before/after scores with the relative F1 drop."""

    before: EvalReport
    after: EvalReport

    @property
    def f1_before(self) -> float:
        return self.before.f1

    @property
    def f1_after(self) -> float:
        return self.after.f1

    @property
    def relative_drop(self) -> float:
        if self.f1_before == 0.0:
            return 0.0
        return (self.f1_before - self.f1_after) / self.f1_before

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "f1_before": self.f1_before,
            "f1_after": self.f1_after,
            "relative_drop": self.relative_drop,
            "before": self.before.to_json(),
            "after": self.after.to_json(),
        }


def robustness_eval(
    before: Sequence[REInstance],
    after: Sequence[REInstance],
    client: OracleClient,
) -> DeltaReport:
    """Query the oracle on both corpora and report the F1 delta.

    Corpora must be id-aligned (same ids, same order) so the per-id
    comparison is meaningful.
    """
    if [i.id for i in before] != [i.id for i in after]:
        raise ValueError("corpora are not id-aligned")
    report_before = score_instances(before, client.predict_labels(before))
    report_after = score_instances(after, client.predict_labels(after))
    return DeltaReport(before=report_before, after=report_after)


def load_predictions(path: str | Path) -> dict[str, str]:
    """Read a predictions file: JSON array (or JSONL) of {id, label}."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        rows = json.loads(text)
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    out: dict[str, str] = {}
    for row in rows:
        out[row["id"]] = row["label"]
    return out
