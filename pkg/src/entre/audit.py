"""Eligibility filtering, annotation auditing, shortcut and diversity reports.

The annotation auditor flags instances where an external tagger
disagrees with the gold entity annotations and exports the disagreement
list for human review; nothing is re-annotated automatically.  The
shortcut auditor measures how often a model predicts the gold relation
from a context-masked counterfactual input, i.e. from the entity names
alone.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .corpus import ORGANIZATION, PERSON, REPLACEABLE_TYPES, REInstance, Role, Span
from .lexicon import EntityName
from .oracle.client import NerClient, OracleClient
from .oracle.wire import NerSpan
from .replace import (
    ContextMaskMode,
    DEFAULT_MASK_TOKEN,
    SEPARATOR_TOKEN,
    mask_context,
)

REPORT_SCHEMA_VERSION = 1

Verdict = Literal["match", "span_mismatch", "type_mismatch", "missing"]


@dataclass(frozen=True)
class RoleVerdict:
    """Agreement verdict for one annotated entity against a tagger."""

    instance_id: str
    role: Role
    annotated_span: Span
    annotated_type: str
    ner_span: Span | None
    ner_type: str | None
    verdict: Verdict

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "role": self.role,
            "annotated_span": list(self.annotated_span),
            "annotated_type": self.annotated_type,
            "ner_span": list(self.ner_span) if self.ner_span else None,
            "ner_type": self.ner_type,
            "verdict": self.verdict,
        }


@dataclass
class DisagreementReport:
    entries: list[RoleVerdict] = field(default_factory=list)
    n_instances: int = 0
    flagged_ids: list[str] = field(default_factory=list)

    @property
    def n_flagged(self) -> int:
        return len(self.flagged_ids)

    @property
    def flagged_ratio(self) -> float:
        return self.n_flagged / self.n_instances if self.n_instances else 0.0

    def to_json(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_instances": self.n_instances,
            "n_flagged": self.n_flagged,
            "flagged_ratio": self.flagged_ratio,
            "flagged_ids": list(self.flagged_ids),
            "entries": [e.to_json() for e in self.entries],
        }


def _jaccard(a: Span, b: Span) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union else 0.0


def _judge_role(
    inst: REInstance,
    role: Role,
    ner_spans: Sequence[NerSpan],
    jaccard_threshold: float | None,
) -> RoleVerdict:
    annotated = inst.span_for(role)
    annotated_type = inst.type_for(role)
    best: NerSpan | None = None
    best_overlap = 0.0
    for span in ner_spans:
        overlap = _jaccard(annotated, span.span)
        if overlap == 0.0:
            continue
        # Ties go to the earlier span, for a deterministic report.
        if best is None or overlap > best_overlap or (
            overlap == best_overlap and span.span < best.span
        ):
            best, best_overlap = span, overlap
    if best is None:
        verdict: Verdict = "missing"
    else:
        span_agrees = best.span == annotated or (
            jaccard_threshold is not None and best_overlap >= jaccard_threshold
        )
        if not span_agrees:
            verdict = "span_mismatch"
        elif best.type != annotated_type:
            verdict = "type_mismatch"
        else:
            verdict = "match"
    return RoleVerdict(
        instance_id=inst.id,
        role=role,
        annotated_span=annotated,
        annotated_type=annotated_type,
        ner_span=best.span if best else None,
        ner_type=best.type if best else None,
        verdict=verdict,
    )


def flag_annotations(
    instances: Sequence[REInstance],
    ner_client: NerClient,
    *,
    jaccard_threshold: float | None = None,
) -> tuple[list[REInstance], DisagreementReport]:
    """Split a corpus into tagger-agreeing instances and a review list.

    An instance is flagged iff either role's verdict is not ``match``.
    By default a match requires exact span and type equality; with
    ``jaccard_threshold`` spans overlapping at least that much (token
    Jaccard) also count as agreeing.
    """
    report = DisagreementReport(n_instances=len(instances))
    responses = ner_client.tag_instances(instances)
    clean: list[REInstance] = []
    for inst in instances:
        spans = responses[inst.id].spans
        verdicts = [
            _judge_role(inst, role, spans, jaccard_threshold)
            for role in ("subject", "object")
        ]
        report.entries.extend(verdicts)
        if all(v.verdict == "match" for v in verdicts):
            clean.append(inst)
        else:
            report.flagged_ids.append(inst.id)
    return clean, report


def eligibility_filter(
    instances: Iterable[REInstance],
) -> tuple[list[REInstance], list[tuple[REInstance, str]]]:
    """Keep instances with at least one PERSON/ORGANIZATION role."""
    eligible: list[REInstance] = []
    ineligible: list[tuple[REInstance, str]] = []
    for inst in instances:
        if inst.subj_type in REPLACEABLE_TYPES or inst.obj_type in REPLACEABLE_TYPES:
            eligible.append(inst)
        else:
            ineligible.append(
                (inst, f"no replaceable role (subj={inst.subj_type}, obj={inst.obj_type})")
            )
    return eligible, ineligible


@dataclass
class RelationShortcut:
    relation: str
    n_instances: int
    n_shortcut: int

    @property
    def ratio(self) -> float:
        return self.n_shortcut / self.n_instances if self.n_instances else 0.0

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "n_instances": self.n_instances,
            "n_shortcut": self.n_shortcut,
            "ratio": self.ratio,
        }


@dataclass
class ShortcutReport:
    """Per-relation counts of instances whose masked input still yields
    the gold relation."""

    mask_mode: str
    mask_token: str
    per_relation: dict[str, RelationShortcut] = field(default_factory=dict)

    @property
    def n_instances(self) -> int:
        return sum(r.n_instances for r in self.per_relation.values())

    @property
    def n_shortcut(self) -> int:
        return sum(r.n_shortcut for r in self.per_relation.values())

    @property
    def overall_ratio(self) -> float:
        return self.n_shortcut / self.n_instances if self.n_instances else 0.0

    def to_json(self) -> dict:
        return {
            "kind": "shortcut",
            "schema_version": REPORT_SCHEMA_VERSION,
            "mask_mode": self.mask_mode,
            "mask_token": self.mask_token,
            "separator_token": SEPARATOR_TOKEN,
            "n_instances": self.n_instances,
            "n_shortcut": self.n_shortcut,
            "overall_ratio": self.overall_ratio,
            "per_relation": [
                self.per_relation[r].to_json() for r in sorted(self.per_relation)
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ShortcutReport":
        report = cls(mask_mode=d["mask_mode"], mask_token=d["mask_token"])
        for row in d["per_relation"]:
            report.per_relation[row["relation"]] = RelationShortcut(
                relation=row["relation"],
                n_instances=row["n_instances"],
                n_shortcut=row["n_shortcut"],
            )
        return report


def shortcut_analysis(
    instances: Sequence[REInstance],
    client: OracleClient,
    *,
    mask_mode: ContextMaskMode | str = ContextMaskMode.PRESERVE_POSITIONS,
    mask_token: str = DEFAULT_MASK_TOKEN,
) -> ShortcutReport:
    """Count instances whose counterfactual prediction equals the gold.

    Each instance's context is masked (entities kept), the oracle is
    queried on the masked input, and the instance counts as a shortcut
    iff the counterfactual label equals its gold relation.
    """
    mask_mode = ContextMaskMode(mask_mode)
    report = ShortcutReport(mask_mode=mask_mode.value, mask_token=mask_token)
    masked = [mask_context(inst, mask_token, mask_mode) for inst in instances]
    predictions = client.predict_labels(masked)
    for inst in instances:
        row = report.per_relation.setdefault(
            inst.relation, RelationShortcut(inst.relation, 0, 0)
        )
        row.n_instances += 1
        if predictions[inst.id] == inst.relation:
            row.n_shortcut += 1
    return report


@dataclass
class DiversityReport:
    """Distinct-name counts; names compared by exact token sequence."""

    n_instances: int
    n_distinct_subjects: int
    n_distinct_persons: int
    n_distinct_organizations: int
    top_subjects: list[tuple[EntityName, int]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "diversity",
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_instances": self.n_instances,
            "n_distinct_subjects": self.n_distinct_subjects,
            "n_distinct_persons": self.n_distinct_persons,
            "n_distinct_organizations": self.n_distinct_organizations,
            "top_subjects": [
                {"name": list(name), "count": count} for name, count in self.top_subjects
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "DiversityReport":
        return cls(
            n_instances=d["n_instances"],
            n_distinct_subjects=d["n_distinct_subjects"],
            n_distinct_persons=d["n_distinct_persons"],
            n_distinct_organizations=d["n_distinct_organizations"],
            top_subjects=[(tuple(r["name"]), r["count"]) for r in d["top_subjects"]],
        )


def diversity_stats(instances: Sequence[REInstance], top_k: int = 10) -> DiversityReport:
    """Distinct subject / PERSON / ORGANIZATION name counts plus the
    most-reused subject names (ties broken lexicographically)."""
    subject_counts: Counter[EntityName] = Counter()
    persons: set[EntityName] = set()
    organizations: set[EntityName] = set()
    for inst in instances:
        subject_counts[inst.subject_name] += 1
        for role in ("subject", "object"):
            if inst.type_for(role) == PERSON:
                persons.add(inst.name_for(role))
            elif inst.type_for(role) == ORGANIZATION:
                organizations.add(inst.name_for(role))
    top = sorted(subject_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return DiversityReport(
        n_instances=len(instances),
        n_distinct_subjects=len(subject_counts),
        n_distinct_persons=len(persons),
        n_distinct_organizations=len(organizations),
        top_subjects=top,
    )


class ReportMismatchError(Exception):
    """Before/after reports do not describe comparable runs."""


@dataclass
class ShortcutDelta:
    relation: str
    before_ratio: float
    after_ratio: float

    @property
    def absolute_delta(self) -> float:
        return self.before_ratio - self.after_ratio

    @property
    def relative_reduction(self) -> float | None:
        if self.before_ratio == 0.0:
            return None
        return (self.before_ratio - self.after_ratio) / self.before_ratio

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "before_ratio": self.before_ratio,
            "after_ratio": self.after_ratio,
            "absolute_delta": self.absolute_delta,
            "relative_reduction": self.relative_reduction,
        }


def compare_shortcut_reports(before: ShortcutReport, after: ShortcutReport) -> dict:
    """Per-relation shortcut deltas; relation sets must coincide."""
    if set(before.per_relation) != set(after.per_relation):
        raise ReportMismatchError(
            f"relation sets differ: {sorted(set(before.per_relation) ^ set(after.per_relation))}"
        )
    deltas = [
        ShortcutDelta(
            relation=rel,
            before_ratio=before.per_relation[rel].ratio,
            after_ratio=after.per_relation[rel].ratio,
        )
        for rel in sorted(before.per_relation)
    ]
    overall = ShortcutDelta("__overall__", before.overall_ratio, after.overall_ratio)
    return {
        "kind": "shortcut_delta",
        "overall": overall.to_json(),
        "per_relation": [d.to_json() for d in deltas],
    }


def compare_diversity_reports(before: DiversityReport, after: DiversityReport) -> dict:
    """Diversity multipliers (after / before per distinct-name counter)."""

    def multiplier(b: int, a: int) -> float | None:
        return a / b if b else None

    return {
        "kind": "diversity_delta",
        "subjects": {
            "before": before.n_distinct_subjects,
            "after": after.n_distinct_subjects,
            "multiplier": multiplier(before.n_distinct_subjects, after.n_distinct_subjects),
        },
        "persons": {
            "before": before.n_distinct_persons,
            "after": after.n_distinct_persons,
            "multiplier": multiplier(before.n_distinct_persons, after.n_distinct_persons),
        },
        "organizations": {
            "before": before.n_distinct_organizations,
            "after": after.n_distinct_organizations,
            "multiplier": multiplier(
                before.n_distinct_organizations, after.n_distinct_organizations
            ),
        },
    }


def compare_reports(before, after) -> dict:
    """Dispatch on report type; mixed types are an error."""
    if isinstance(before, ShortcutReport) and isinstance(after, ShortcutReport):
        return compare_shortcut_reports(before, after)
    if isinstance(before, DiversityReport) and isinstance(after, DiversityReport):
        return compare_diversity_reports(before, after)
    raise ReportMismatchError(
        f"cannot compare {type(before).__name__} with {type(after).__name__}"
    )


def load_report(path: str | Path) -> ShortcutReport | DiversityReport:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = d.get("kind")
    if kind == "shortcut":
        return ShortcutReport.from_json(d)
    if kind == "diversity":
        return DiversityReport.from_json(d)
    raise ReportMismatchError(f"unknown report kind: {kind!r}")
