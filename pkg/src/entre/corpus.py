"""Core instance data model and TACRED-interchange corpus I/O.

The on-disk format is a UTF-8 JSON array of records with the fields
``id, token, subj_start, subj_end, obj_start, obj_end, subj_type,
obj_type, relation`` where span end indices are *inclusive* (TACRED
convention).  Internally every span is a half-open ``[start, end)``
token-index range, so length and shift arithmetic never needs a ``+1``;
the conversion happens only at the I/O boundary.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace as _dc_replace
from pathlib import Path
from typing import Iterable, Literal, Sequence

PERSON = "PERSON"
ORGANIZATION = "ORGANIZATION"
#: Entity types eligible for replacement; everything else is opaque.
REPLACEABLE_TYPES = frozenset({PERSON, ORGANIZATION})

NO_RELATION = "no_relation"

Role = Literal["subject", "object"]
ROLES: tuple[Role, Role] = ("subject", "object")

Span = tuple[int, int]

TACRED_FIELDS = (
    "id",
    "token",
    "subj_start",
    "subj_end",
    "obj_start",
    "obj_end",
    "subj_type",
    "obj_type",
    "relation",
)


class CorpusError(Exception):
    """Base class for corpus-level failures."""


class CorpusFormatError(CorpusError):
    """The file (or a record in it) is not well-formed interchange JSON."""

    def __init__(self, message: str, record_index: int | None = None):
        self.record_index = record_index
        if record_index is not None:
            message = f"record {record_index}: {message}"
        super().__init__(message)


class CorpusValidationError(CorpusError):
    """One or more records violate the instance invariants."""

    def __init__(self, message: str, instance_ids: Sequence[str] = ()):
        self.instance_ids = list(instance_ids)
        if self.instance_ids:
            message = f"{message} (offending ids: {', '.join(self.instance_ids)})"
        super().__init__(message)


@dataclass(frozen=True)
class REInstance:
    """One sentence with subject/object entity spans and a gold relation.

    Invariants (checked at construction):
      * tokens non-empty, no empty token string
      * 0 <= start < end <= len(tokens) for both spans
      * subject and object spans do not overlap
      * relation is a non-empty label string
    """

    id: str
    tokens: tuple[str, ...]
    subj_span: Span
    obj_span: Span
    subj_type: str
    obj_type: str
    relation: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "subj_span", tuple(self.subj_span))
        object.__setattr__(self, "obj_span", tuple(self.obj_span))
        problems = self._problems()
        if problems:
            raise CorpusValidationError("; ".join(problems), [self.id])

    def _problems(self) -> list[str]:
        problems = []
        if not self.tokens:
            problems.append("tokens list is empty")
        if any(tok == "" for tok in self.tokens):
            problems.append("tokens contain an empty string")
        n = len(self.tokens)
        for name, (start, end) in (("subj", self.subj_span), ("obj", self.obj_span)):
            if not (0 <= start < end <= n):
                problems.append(f"{name}_span [{start},{end}) out of bounds for {n} tokens")
        if not problems and self._spans_overlap(self.subj_span, self.obj_span):
            problems.append(
                f"subj_span {list(self.subj_span)} overlaps obj_span {list(self.obj_span)}"
            )
        if not self.relation:
            problems.append("relation is empty")
        return problems

    @staticmethod
    def _spans_overlap(a: Span, b: Span) -> bool:
        return a[0] < b[1] and b[0] < a[1]

    def span_for(self, role: Role) -> Span:
        return self.subj_span if role == "subject" else self.obj_span

    def type_for(self, role: Role) -> str:
        return self.subj_type if role == "subject" else self.obj_type

    def name_for(self, role: Role) -> tuple[str, ...]:
        start, end = self.span_for(role)
        return self.tokens[start:end]

    @property
    def subject_name(self) -> tuple[str, ...]:
        return self.name_for("subject")

    @property
    def object_name(self) -> tuple[str, ...]:
        return self.name_for("object")

    def replaced(self, **changes) -> "REInstance":
        """Copy with the given fields changed; invariants re-checked."""
        return _dc_replace(self, **changes)


@dataclass
class CorpusStats:
    """Sentence/token counts plus a relation histogram."""

    n_sentences: int = 0
    n_tokens: int = 0
    label_histogram: dict[str, int] = field(default_factory=dict)

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        hist = Counter(self.label_histogram)
        hist.update(other.label_histogram)
        return CorpusStats(
            n_sentences=self.n_sentences + other.n_sentences,
            n_tokens=self.n_tokens + other.n_tokens,
            label_histogram=dict(hist),
        )

    def to_json(self) -> dict:
        return {
            "n_sentences": self.n_sentences,
            "n_tokens": self.n_tokens,
            "label_histogram": dict(sorted(self.label_histogram.items())),
        }


@dataclass(frozen=True)
class SkippedRecord:
    """Why a record was dropped during a lenient load."""

    index: int
    instance_id: str | None
    reason: str

    def to_json(self) -> dict:
        return {"index": self.index, "id": self.instance_id, "reason": self.reason}


def corpus_stats(instances: Iterable[REInstance]) -> CorpusStats:
    stats = CorpusStats()
    hist: Counter[str] = Counter()
    for inst in instances:
        stats.n_sentences += 1
        stats.n_tokens += len(inst.tokens)
        hist[inst.relation] += 1
    stats.label_histogram = dict(hist)
    return stats


def record_to_instance(record: dict, index: int) -> REInstance:
    """Convert one interchange record (inclusive ends) to an instance."""
    if not isinstance(record, dict):
        raise CorpusFormatError(f"expected an object, got {type(record).__name__}", index)
    missing = [f for f in TACRED_FIELDS if f not in record]
    if missing:
        raise CorpusFormatError(f"missing fields: {', '.join(missing)}", index)
    tokens = record["token"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusFormatError("field 'token' must be a list of strings", index)
    for f in ("subj_start", "subj_end", "obj_start", "obj_end"):
        if not isinstance(record[f], int) or isinstance(record[f], bool):
            raise CorpusFormatError(f"field '{f}' must be an integer", index)
    for f in ("id", "subj_type", "obj_type", "relation"):
        if not isinstance(record[f], str):
            raise CorpusFormatError(f"field '{f}' must be a string", index)
    return REInstance(
        id=record["id"],
        tokens=tuple(tokens),
        subj_span=(record["subj_start"], record["subj_end"] + 1),
        obj_span=(record["obj_start"], record["obj_end"] + 1),
        subj_type=record["subj_type"],
        obj_type=record["obj_type"],
        relation=record["relation"],
    )


def instance_to_record(inst: REInstance) -> dict:
    """Inverse of :func:`record_to_instance` (back to inclusive ends)."""
    return {
        "id": inst.id,
        "token": list(inst.tokens),
        "subj_start": inst.subj_span[0],
        "subj_end": inst.subj_span[1] - 1,
        "obj_start": inst.obj_span[0],
        "obj_end": inst.obj_span[1] - 1,
        "subj_type": inst.subj_type,
        "obj_type": inst.obj_type,
        "relation": inst.relation,
    }


def load_corpus_with_report(
    path: str | Path, *, lenient: bool = False
) -> tuple[list[REInstance], list[SkippedRecord]]:
    """Load a corpus file; in lenient mode bad records are skipped and reported.

    In strict mode (default) the first bad record aborts the load:
    malformed records raise :class:`CorpusFormatError`, invariant
    violations raise :class:`CorpusValidationError`.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise CorpusFormatError(f"expected a JSON array, got {type(raw).__name__}")

    instances: list[REInstance] = []
    skipped: list[SkippedRecord] = []
    for index, record in enumerate(raw):
        try:
            instances.append(record_to_instance(record, index))
        except CorpusFormatError as exc:
            if not lenient:
                raise
            rec_id = record.get("id") if isinstance(record, dict) else None
            skipped.append(SkippedRecord(index, rec_id, str(exc)))
        except CorpusValidationError as exc:
            if not lenient:
                raise
            skipped.append(SkippedRecord(index, exc.instance_ids[0], str(exc)))
    return instances, skipped


def load_corpus(path: str | Path, *, lenient: bool = False) -> list[REInstance]:
    """Load a corpus file, returning instances in file order."""
    instances, _ = load_corpus_with_report(path, lenient=lenient)
    return instances


def write_corpus(instances: Iterable[REInstance], path: str | Path) -> None:
    """Write instances as interchange JSON, one record per line.

    Serialization is deterministic (sorted record fields, fixed layout),
    so identical inputs produce byte-identical files.
    """
    path = Path(path)
    records = [
        json.dumps(instance_to_record(inst), sort_keys=True, ensure_ascii=False)
        for inst in instances
    ]
    if records:
        body = "[\n" + ",\n".join(records) + "\n]\n"
    else:
        body = "[]\n"
    path.write_text(body, encoding="utf-8")
